#include "boolmrc/tinyformer/bundle.hpp"

#include <cmath>
#include <random>
#include <utility>

#include "boolmrc/errors.hpp"

namespace boolmrc::tinyformer {

namespace {

Matrix gaussian(int rows, int cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
    return m;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void add_layer_norm(ParamMap& params, const std::string& prefix, int dim) {
    params[prefix + ".gamma"] = Matrix::Ones(1, dim);
    params[prefix + ".beta"] = Matrix::Zero(1, dim);
}

void add_linear(ParamMap& params, const std::string& prefix, int in, int out,
                std::mt19937_64& rng) {
    params[prefix + ".w"] = gaussian(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    params[prefix + ".b"] = Matrix::Zero(1, out);
}

void add_adapter(ParamMap& params, const std::string& prefix, int hidden,
                 const AdapterConfig& cfg, std::mt19937_64& rng) {
    if (cfg.include_layernorm) add_layer_norm(params, prefix + ".ln", hidden);
    add_linear(params, prefix + ".down", hidden, cfg.bottleneck_dim, rng);
    params[prefix + ".up.w"] = Matrix::Zero(cfg.bottleneck_dim, hidden);
    params[prefix + ".up.b"] = Matrix::Zero(1, hidden);
}

}  // namespace

void EncoderConfig::validate() const {
    if (num_layers < 1 || hidden_dim < 1 || num_heads < 1 || ffn_dim < 1 || vocab_buckets < 3 ||
        max_seq_len < 2)
        throw ValidationError("encoder dimensions must be positive (vocab >= 3, seq >= 2)");
    if (hidden_dim % num_heads != 0)
        throw ValidationError("hidden_dim must be divisible by num_heads");
}

AdapterConfig AdapterConfig::defaults_for(const EncoderConfig& config) {
    AdapterConfig a;
    a.bottleneck_dim = std::max(1, config.hidden_dim / 8);
    return a;
}

std::string layer_prefix(int layer) { return "layer" + std::to_string(layer); }

std::string adapter_prefix(const std::string& task, int layer, const char* site) {
    return "adapter." + task + "." + layer_prefix(layer) + "." + site;
}

std::string head_prefix(const std::string& task) { return "head." + task; }

const Matrix& ModelBundle::param(const std::string& name) const {
    if (name.rfind("adapter.", 0) == 0) {
        for (const auto& [task, set] : adapters) {
            if (auto it = set.params.find(name); it != set.params.end()) return it->second;
        }
    } else if (name.rfind("head.", 0) == 0) {
        for (const auto& [task, head] : heads) {
            if (auto it = head.params.find(name); it != head.params.end()) return it->second;
        }
    } else if (auto it = base.find(name); it != base.end()) {
        return it->second;
    }
    throw LookupError("unknown parameter '" + name + "'");
}

Matrix& ModelBundle::mutable_param(const std::string& name) {
    return const_cast<Matrix&>(std::as_const(*this).param(name));
}

ModelBundle make_bundle(const EncoderConfig& config) {
    config.validate();
    ModelBundle b;
    b.config = config;
    std::mt19937_64 rng(config.seed);
    const int h = config.hidden_dim;
    b.base["embed.token"] = gaussian(config.vocab_buckets, h, 0.1, rng);
    b.base["embed.position"] = gaussian(config.max_seq_len, h, 0.1, rng);
    for (int l = 0; l < config.num_layers; ++l) {
        const std::string p = layer_prefix(l);
        add_layer_norm(b.base, p + ".ln1", h);
        add_linear(b.base, p + ".attn.q", h, h, rng);
        add_linear(b.base, p + ".attn.k", h, h, rng);
        add_linear(b.base, p + ".attn.v", h, h, rng);
        add_linear(b.base, p + ".attn.o", h, h, rng);
        add_layer_norm(b.base, p + ".ln2", h);
        add_linear(b.base, p + ".ffn.in", h, config.ffn_dim, rng);
        add_linear(b.base, p + ".ffn.out", config.ffn_dim, h, rng);
    }
    add_layer_norm(b.base, "final_ln", h);
    return b;
}

ModelBundle add_head(ModelBundle bundle, const std::string& task, HeadSpec spec,
                     std::uint64_t seed) {
    if (bundle.heads.count(task)) throw ConflictError("task '" + task + "' already has a head");
    if (spec.kind == HeadKind::Pointer) spec.classes = 2;
    if (spec.classes < 2) throw ValidationError("a classifier head needs at least two classes");
    std::mt19937_64 rng(seed ^ fnv1a(task));
    Head head{spec, {}};
    const std::string p = head_prefix(task);
    head.params[p + ".w"] = gaussian(bundle.config.hidden_dim, spec.classes, 0.02, rng);
    head.params[p + ".b"] = Matrix::Zero(1, spec.classes);
    bundle.heads.emplace(task, std::move(head));
    return bundle;
}

ModelBundle insert_adapters(ModelBundle bundle, const std::string& task,
                            const AdapterConfig& config) {
    if (bundle.adapters.count(task))
        throw ConflictError("task '" + task + "' already has adapters");
    if (config.bottleneck_dim < 1 || config.bottleneck_dim >= bundle.config.hidden_dim)
        throw ValidationError("bottleneck_dim must lie in [1, hidden_dim)");
    std::mt19937_64 rng(config.seed ^ fnv1a(task));
    AdapterSet set{config, {}};
    for (int l = 0; l < bundle.config.num_layers; ++l) {
        if (config.placement == AdapterPlacement::AfterAttentionAndFfn)
            add_adapter(set.params, adapter_prefix(task, l, "attn"), bundle.config.hidden_dim,
                        config, rng);
        add_adapter(set.params, adapter_prefix(task, l, "ffn"), bundle.config.hidden_dim, config,
                    rng);
    }
    bundle.adapters.emplace(task, std::move(set));
    return bundle;
}

std::int64_t count_elements(const ParamMap& params) {
    std::int64_t n = 0;
    for (const auto& [name, m] : params) n += static_cast<std::int64_t>(m.size());
    return n;
}

std::int64_t count_parameters(const ModelBundle& bundle, ParamScope scope, bool trainable_only) {
    std::int64_t base = (trainable_only && bundle.frozen_base) ? 0 : count_elements(bundle.base);
    std::int64_t adapters = 0, heads = 0;
    for (const auto& [task, set] : bundle.adapters) adapters += count_elements(set.params);
    for (const auto& [task, head] : bundle.heads) heads += count_elements(head.params);
    switch (scope) {
        case ParamScope::Base: return base;
        case ParamScope::Adapters: return adapters;
        case ParamScope::Heads: return heads;
        case ParamScope::All: return base + adapters + heads;
    }
    return 0;
}

std::vector<std::string> trainable_names(const ModelBundle& bundle, const std::string& task) {
    std::vector<std::string> names;
    if (!bundle.frozen_base)
        for (const auto& [name, m] : bundle.base) names.push_back(name);
    if (auto it = bundle.adapters.find(task); it != bundle.adapters.end())
        for (const auto& [name, m] : it->second.params) names.push_back(name);
    if (auto it = bundle.heads.find(task); it != bundle.heads.end())
        for (const auto& [name, m] : it->second.params) names.push_back(name);
    return names;
}

}  // namespace boolmrc::tinyformer
