#pragma once
// Parameter containers for the miniature encoder: a shared base stack,
// per-task bottleneck adapters and per-task output heads.

#include <cstdint>
#include <map>
#include <vector>
#include <string>

#include <Eigen/Dense>

namespace boolmrc::tinyformer {

using Matrix = Eigen::MatrixXd;
using ParamMap = std::map<std::string, Matrix>;

struct EncoderConfig {
    int num_layers = 2;
    int hidden_dim = 32;
    int num_heads = 4;
    int ffn_dim = 64;
    int vocab_buckets = 4096;
    int max_seq_len = 128;
    std::uint64_t seed = 17;

    void validate() const;  // throws ValidationError
};

enum class AdapterPlacement { AfterFfn, AfterAttentionAndFfn };

struct AdapterConfig {
    int bottleneck_dim = 4;
    AdapterPlacement placement = AdapterPlacement::AfterFfn;
    bool include_layernorm = false;
    std::uint64_t seed = 29;

    // bottleneck_dim = hidden_dim / 8, at least 1.
    static AdapterConfig defaults_for(const EncoderConfig& config);
};

enum class HeadKind { Pointer, Classifier };

struct HeadSpec {
    HeadKind kind = HeadKind::Classifier;
    int classes = 2;  // a pointer head always has two outputs (start, end)
};

struct AdapterSet {
    AdapterConfig config;
    ParamMap params;
};

struct Head {
    HeadSpec spec;
    ParamMap params;
};

struct ModelBundle {
    EncoderConfig config;
    ParamMap base;
    std::map<std::string, AdapterSet> adapters;
    std::map<std::string, Head> heads;
    bool frozen_base = false;

    bool has_task(const std::string& task) const {
        return heads.count(task) > 0 || adapters.count(task) > 0;
    }
    // Looks a parameter up by its full name across base, adapters and heads.
    const Matrix& param(const std::string& name) const;
    Matrix& mutable_param(const std::string& name);
};

// Fresh base stack drawn from config.seed.
ModelBundle make_bundle(const EncoderConfig& config);

// Registers an output head for `task`; ConflictError if one already exists.
ModelBundle add_head(ModelBundle bundle, const std::string& task, HeadSpec spec,
                     std::uint64_t seed = 101);

// Adds down/up bottleneck adapters for `task` to every layer. The up
// projection starts at zero so the encoder output is unchanged.
ModelBundle insert_adapters(ModelBundle bundle, const std::string& task,
                            const AdapterConfig& config);

enum class ParamScope { Base, Adapters, Heads, All };

// Exact element count. With trainable_only a frozen base counts as zero.
std::int64_t count_parameters(const ModelBundle& bundle, ParamScope scope,
                              bool trainable_only = false);
std::int64_t count_elements(const ParamMap& params);

// Parameter names updated when training `task`.
std::vector<std::string> trainable_names(const ModelBundle& bundle, const std::string& task);

// Name helpers shared by the model code and tests.
std::string layer_prefix(int layer);
std::string adapter_prefix(const std::string& task, int layer, const char* site);
std::string head_prefix(const std::string& task);

}  // namespace boolmrc::tinyformer
