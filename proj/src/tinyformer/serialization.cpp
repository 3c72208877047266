#include "boolmrc/tinyformer/serialization.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "boolmrc/errors.hpp"
#include "boolmrc/tinyformer/inputs.hpp"

namespace boolmrc::tinyformer {

namespace {

using json = nlohmann::json;

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(bytes, 8);
}

double read_f64(const std::vector<unsigned char>& buf, std::size_t index) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | buf[index * 8 + static_cast<std::size_t>(i)];
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

void write_group(const ParamMap& params, const std::filesystem::path& dir, const std::string& file,
                 json& entries) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + (dir / file).string() + "'");
    std::size_t offset = 0;
    for (const auto& [name, m] : params) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
        entries.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()},
                           {"file", file}, {"offset", offset}});
        offset += static_cast<std::size_t>(m.size());
    }
}

const char* placement_name(AdapterPlacement p) {
    return p == AdapterPlacement::AfterFfn ? "AFTER_FFN" : "AFTER_ATTENTION_AND_FFN";
}

AdapterPlacement parse_placement(const std::string& s) {
    if (s == "AFTER_FFN") return AdapterPlacement::AfterFfn;
    if (s == "AFTER_ATTENTION_AND_FFN") return AdapterPlacement::AfterAttentionAndFfn;
    throw ParseError(0, "unknown adapter placement '" + s + "'");
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& c = bundle.config;
    json manifest{{"format", kBundleFormat},
                  {"config",
                   {{"num_layers", c.num_layers},
                    {"hidden_dim", c.hidden_dim},
                    {"num_heads", c.num_heads},
                    {"ffn_dim", c.ffn_dim},
                    {"vocab_buckets", c.vocab_buckets},
                    {"max_seq_len", c.max_seq_len},
                    {"seed", c.seed}}},
                  {"frozen_base", bundle.frozen_base},
                  {"adapters", json::object()},
                  {"heads", json::object()},
                  {"tensors", json::array()}};
    write_group(bundle.base, dir, "base.bin", manifest["tensors"]);
    for (const auto& [task, set] : bundle.adapters) {
        manifest["adapters"][task] = {{"bottleneck_dim", set.config.bottleneck_dim},
                                      {"placement", placement_name(set.config.placement)},
                                      {"include_layernorm", set.config.include_layernorm},
                                      {"seed", set.config.seed}};
        write_group(set.params, dir, "adapter." + task + ".bin", manifest["tensors"]);
    }
    for (const auto& [task, head] : bundle.heads) {
        manifest["heads"][task] = {
            {"kind", head.spec.kind == HeadKind::Pointer ? "POINTER" : "CLASSIFIER"},
            {"classes", head.spec.classes}};
        write_group(head.params, dir, "head." + task + ".bin", manifest["tensors"]);
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) throw ValidationError("cannot write manifest in '" + dir.string() + "'");
    out << manifest.dump(2) << '\n';
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ValidationError("no manifest.json in '" + dir.string() + "'");
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("manifest.json: ") + e.what());
    }
    try {
        if (manifest.at("format") != kBundleFormat)
            throw ParseError(0, "unsupported bundle format");
        ModelBundle b;
        const auto& c = manifest.at("config");
        b.config.num_layers = c.at("num_layers");
        b.config.hidden_dim = c.at("hidden_dim");
        b.config.num_heads = c.at("num_heads");
        b.config.ffn_dim = c.at("ffn_dim");
        b.config.vocab_buckets = c.at("vocab_buckets");
        b.config.max_seq_len = c.at("max_seq_len");
        b.config.seed = c.at("seed");
        b.config.validate();
        b.frozen_base = manifest.at("frozen_base");
        for (const auto& [task, a] : manifest.at("adapters").items()) {
            AdapterConfig cfg;
            cfg.bottleneck_dim = a.at("bottleneck_dim");
            cfg.placement = parse_placement(a.at("placement"));
            cfg.include_layernorm = a.at("include_layernorm");
            cfg.seed = a.at("seed");
            b.adapters[task].config = cfg;
        }
        for (const auto& [task, h] : manifest.at("heads").items()) {
            HeadSpec spec;
            spec.kind = h.at("kind") == "POINTER" ? HeadKind::Pointer : HeadKind::Classifier;
            spec.classes = h.at("classes");
            b.heads[task].spec = spec;
        }

        std::map<std::string, std::vector<unsigned char>> files;
        for (const auto& t : manifest.at("tensors")) {
            const std::string name = t.at("name");
            const std::string file = t.at("file");
            const Eigen::Index rows = t.at("rows"), cols = t.at("cols");
            const std::size_t offset = t.at("offset");
            auto [it, fresh] = files.try_emplace(file);
            if (fresh) {
                std::ifstream bin(dir / file, std::ios::binary);
                if (!bin) throw ValidationError("missing tensor file '" + file + "'");
                it->second.assign(std::istreambuf_iterator<char>(bin), {});
            }
            const auto& buf = it->second;
            const auto count = static_cast<std::size_t>(rows * cols);
            if ((offset + count) * 8 > buf.size())
                throw ParseError(0, "tensor '" + name + "' runs past end of " + file);
            Matrix m(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index col = 0; col < cols; ++col)
                    m(r, col) = read_f64(buf, offset + static_cast<std::size_t>(r * cols + col));

            if (name.rfind("adapter.", 0) == 0) {
                bool placed = false;
                for (auto& [task, set] : b.adapters) {
                    if (name.rfind("adapter." + task + ".", 0) == 0) {
                        set.params[name] = std::move(m);
                        placed = true;
                        break;
                    }
                }
                if (!placed) throw ParseError(0, "adapter tensor without adapter spec: " + name);
            } else if (name.rfind("head.", 0) == 0) {
                bool placed = false;
                for (auto& [task, head] : b.heads) {
                    if (name.rfind(head_prefix(task) + ".", 0) == 0) {
                        head.params[name] = std::move(m);
                        placed = true;
                        break;
                    }
                }
                if (!placed) throw ParseError(0, "head tensor without head spec: " + name);
            } else {
                b.base[name] = std::move(m);
            }
        }
        return b;
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("manifest.json: ") + e.what());
    }
}

std::string bundle_fingerprint(const ModelBundle& bundle) {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&](const ParamMap& params) {
        for (const auto& [name, m] : params) {
            h ^= fnv1a64(name);
            h *= 1099511628211ULL;
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                std::uint64_t bits;
                const double v = m.data()[i];
                std::memcpy(&bits, &v, sizeof bits);
                h ^= bits;
                h *= 1099511628211ULL;
            }
        }
    };
    mix(bundle.base);
    for (const auto& [t, s] : bundle.adapters) mix(s.params);
    for (const auto& [t, hd] : bundle.heads) mix(hd.params);
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

}  // namespace boolmrc::tinyformer
