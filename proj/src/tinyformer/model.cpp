#include "boolmrc/tinyformer/model.hpp"

#include <cmath>
#include <limits>

#include "boolmrc/errors.hpp"

namespace boolmrc::tinyformer {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

using Vector = Eigen::VectorXd;

Matrix& grad_slot(Gradients& g, const std::string& name, const Matrix& like) {
    auto it = g.find(name);
    if (it == g.end()) it = g.emplace(name, Matrix::Zero(like.rows(), like.cols())).first;
    return it->second;
}

// ---- primitive layers -------------------------------------------------------

struct LayerNormCache {
    Matrix xhat;
    Vector inv_std;
};

Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, LayerNormCache& c) {
    const Vector mean = x.rowwise().mean();
    const Matrix centered = x.colwise() - mean;
    const Vector var = centered.array().square().rowwise().mean();
    c.inv_std = (var.array() + kLayerNormEps).rsqrt();
    c.xhat = centered.array().colwise() * c.inv_std.array();
    Matrix y = c.xhat.array().rowwise() * gamma.row(0).array();
    y.rowwise() += beta.row(0);
    return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& gamma, const LayerNormCache& c,
                           Matrix* dgamma, Matrix* dbeta) {
    if (dgamma) *dgamma += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    if (dbeta) *dbeta += dy.colwise().sum();
    const Matrix dxhat = dy.array().rowwise() * gamma.row(0).array();
    const double n = static_cast<double>(dy.cols());
    const Vector sum_dxhat = dxhat.rowwise().sum();
    const Vector sum_dxhat_xhat = (dxhat.array() * c.xhat.array()).rowwise().sum();
    Matrix dx = n * dxhat.array() - c.xhat.array().colwise() * sum_dxhat_xhat.array();
    dx.colwise() -= sum_dxhat;
    return dx.array().colwise() * (c.inv_std.array() / n);
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
    Matrix y = x * w;
    y.rowwise() += b.row(0);
    return y;
}

Matrix affine_backward(const Matrix& dy, const Matrix& x, const Matrix& w, Matrix* dw,
                       Matrix* db) {
    if (dw) *dw += x.transpose() * dy;
    if (db) *db += dy.colwise().sum();
    return dy * w.transpose();
}

Matrix gelu(const Matrix& x) {
    return x.unaryExpr([](double v) {
        return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + 0.044715 * v * v * v)));
    });
}

Matrix gelu_grad(const Matrix& x) {
    return x.unaryExpr([](double v) {
        const double t = std::tanh(kGeluC * (v + 0.044715 * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
    });
}

void softmax_rows(Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
}

// Cross-entropy of softmax(logits) at `target` and d loss / d logits.
double cross_entropy(const Vector& logits, int target, Vector& dlogits) {
    const Vector p = softmax(logits);
    dlogits = p;
    dlogits(target) -= 1.0;
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    return lse - logits(target);
}

// ---- cached forward state -------------------------------------------------

struct AdapterCache {
    std::string prefix;
    bool layernorm = false;
    LayerNormCache ln;
    Matrix input;
    Matrix u;
    Matrix pre;
    Matrix act;
};

struct AttentionCache {
    Matrix x, q, k, v, ctx;
    std::vector<Matrix> probs;
};

struct LayerCache {
    LayerNormCache ln1, ln2;
    Matrix n1, n2;
    AttentionCache attn;
    std::optional<AdapterCache> adapter_attn, adapter_ffn;
    Matrix ffn_pre, ffn_act;
};

struct ForwardState {
    std::vector<int> tokens;
    std::vector<LayerCache> layers;
    LayerNormCache final_ln;
    Matrix hidden;
    bool truncated = false;
};

struct Names {
    std::string p;
    explicit Names(int layer) : p(layer_prefix(layer)) {}
    std::string operator()(const char* suffix) const { return p + suffix; }
};

Matrix adapter_forward(const ModelBundle& b, const std::string& prefix, bool layernorm,
                       const Matrix& z, AdapterCache& c) {
    c.prefix = prefix;
    c.layernorm = layernorm;
    c.input = z;
    c.u = layernorm ? layer_norm(z, b.param(prefix + ".ln.gamma"), b.param(prefix + ".ln.beta"), c.ln)
                    : z;
    c.pre = affine(c.u, b.param(prefix + ".down.w"), b.param(prefix + ".down.b"));
    c.act = gelu(c.pre);
    return z + affine(c.act, b.param(prefix + ".up.w"), b.param(prefix + ".up.b"));
}

Matrix adapter_backward(const ModelBundle& b, const AdapterCache& c, const Matrix& dout,
                        Gradients& g) {
    const std::string& p = c.prefix;
    const Matrix& up_w = b.param(p + ".up.w");
    const Matrix& down_w = b.param(p + ".down.w");
    const Matrix dact = affine_backward(dout, c.act, up_w, &grad_slot(g, p + ".up.w", up_w),
                                        &grad_slot(g, p + ".up.b", b.param(p + ".up.b")));
    const Matrix dpre = dact.array() * gelu_grad(c.pre).array();
    Matrix du = affine_backward(dpre, c.u, down_w, &grad_slot(g, p + ".down.w", down_w),
                                &grad_slot(g, p + ".down.b", b.param(p + ".down.b")));
    if (c.layernorm) {
        const Matrix& gamma = b.param(p + ".ln.gamma");
        du = layer_norm_backward(du, gamma, c.ln, &grad_slot(g, p + ".ln.gamma", gamma),
                                 &grad_slot(g, p + ".ln.beta", b.param(p + ".ln.beta")));
    }
    return dout + du;
}

Matrix attention_forward(const ModelBundle& b, const Names& n, const Matrix& x,
                         AttentionCache& c) {
    const int heads = b.config.num_heads;
    const int d = b.config.hidden_dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    c.x = x;
    c.q = affine(x, b.param(n(".attn.q.w")), b.param(n(".attn.q.b")));
    c.k = affine(x, b.param(n(".attn.k.w")), b.param(n(".attn.k.b")));
    c.v = affine(x, b.param(n(".attn.v.w")), b.param(n(".attn.v.b")));
    c.ctx = Matrix::Zero(x.rows(), x.cols());
    c.probs.assign(static_cast<std::size_t>(heads), Matrix());
    for (int h = 0; h < heads; ++h) {
        Matrix scores = c.q.middleCols(h * d, d) * c.k.middleCols(h * d, d).transpose() * scale;
        softmax_rows(scores);
        c.ctx.middleCols(h * d, d) = scores * c.v.middleCols(h * d, d);
        c.probs[static_cast<std::size_t>(h)] = std::move(scores);
    }
    return affine(c.ctx, b.param(n(".attn.o.w")), b.param(n(".attn.o.b")));
}

Matrix attention_backward(const ModelBundle& b, const Names& n, const AttentionCache& c,
                          const Matrix& dout, Gradients* g) {
    const int heads = b.config.num_heads;
    const int d = b.config.hidden_dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    auto slot = [&](const std::string& name) -> Matrix* {
        return g ? &grad_slot(*g, name, b.param(name)) : nullptr;
    };
    const Matrix dctx =
        affine_backward(dout, c.ctx, b.param(n(".attn.o.w")), slot(n(".attn.o.w")), slot(n(".attn.o.b")));
    Matrix dq = Matrix::Zero(c.q.rows(), c.q.cols());
    Matrix dk = Matrix::Zero(c.k.rows(), c.k.cols());
    Matrix dv = Matrix::Zero(c.v.rows(), c.v.cols());
    for (int h = 0; h < heads; ++h) {
        const Matrix& p = c.probs[static_cast<std::size_t>(h)];
        const auto dctx_h = dctx.middleCols(h * d, d);
        const Matrix dp = dctx_h * c.v.middleCols(h * d, d).transpose();
        dv.middleCols(h * d, d) = p.transpose() * dctx_h;
        const Vector row_dot = (dp.array() * p.array()).rowwise().sum();
        Matrix ds = dp;
        ds.colwise() -= row_dot;
        ds = ds.array() * p.array();
        dq.middleCols(h * d, d) = ds * c.k.middleCols(h * d, d) * scale;
        dk.middleCols(h * d, d) = ds.transpose() * c.q.middleCols(h * d, d) * scale;
    }
    Matrix dx = affine_backward(dq, c.x, b.param(n(".attn.q.w")), slot(n(".attn.q.w")), slot(n(".attn.q.b")));
    dx += affine_backward(dk, c.x, b.param(n(".attn.k.w")), slot(n(".attn.k.w")), slot(n(".attn.k.b")));
    dx += affine_backward(dv, c.x, b.param(n(".attn.v.w")), slot(n(".attn.v.w")), slot(n(".attn.v.b")));
    return dx;
}

ForwardState forward(const ModelBundle& b, const std::string& task,
                     const std::vector<int>& tokens) {
    if (!b.has_task(task)) throw LookupError("task '" + task + "' is not registered");
    if (tokens.empty()) throw ValidationError("cannot encode an empty token sequence");
    ForwardState st;
    const auto max_len = static_cast<std::size_t>(b.config.max_seq_len);
    st.truncated = tokens.size() > max_len;
    st.tokens.assign(tokens.begin(), tokens.begin() + static_cast<long>(std::min(max_len, tokens.size())));

    const Matrix& tok = b.param("embed.token");
    const Matrix& pos = b.param("embed.position");
    Matrix x(static_cast<Eigen::Index>(st.tokens.size()), b.config.hidden_dim);
    for (std::size_t i = 0; i < st.tokens.size(); ++i) {
        const int id = st.tokens[i];
        if (id < 0 || id >= b.config.vocab_buckets) throw RangeError("token id out of range");
        x.row(static_cast<Eigen::Index>(i)) = tok.row(id) + pos.row(static_cast<Eigen::Index>(i));
    }

    const AdapterSet* adapters = nullptr;
    if (auto it = b.adapters.find(task); it != b.adapters.end()) adapters = &it->second;

    st.layers.resize(static_cast<std::size_t>(b.config.num_layers));
    for (int l = 0; l < b.config.num_layers; ++l) {
        auto& c = st.layers[static_cast<std::size_t>(l)];
        const Names n(l);
        c.n1 = layer_norm(x, b.param(n(".ln1.gamma")), b.param(n(".ln1.beta")), c.ln1);
        Matrix s = attention_forward(b, n, c.n1, c.attn);
        if (adapters && adapters->config.placement == AdapterPlacement::AfterAttentionAndFfn) {
            c.adapter_attn.emplace();
            s = adapter_forward(b, adapter_prefix(task, l, "attn"),
                                adapters->config.include_layernorm, s, *c.adapter_attn);
        }
        const Matrix h = x + s;
        c.n2 = layer_norm(h, b.param(n(".ln2.gamma")), b.param(n(".ln2.beta")), c.ln2);
        c.ffn_pre = affine(c.n2, b.param(n(".ffn.in.w")), b.param(n(".ffn.in.b")));
        c.ffn_act = gelu(c.ffn_pre);
        Matrix f = affine(c.ffn_act, b.param(n(".ffn.out.w")), b.param(n(".ffn.out.b")));
        if (adapters) {
            c.adapter_ffn.emplace();
            f = adapter_forward(b, adapter_prefix(task, l, "ffn"),
                                adapters->config.include_layernorm, f, *c.adapter_ffn);
        }
        x = h + f;
    }
    st.hidden = layer_norm(x, b.param("final_ln.gamma"), b.param("final_ln.beta"), st.final_ln);
    return st;
}

// Backpropagates d loss / d hidden through the encoder. Base gradients are
// only produced when the base is trainable.
void backward(const ModelBundle& b, const ForwardState& st, const Matrix& dhidden,
              Gradients& g) {
    const bool base_grads = !b.frozen_base;
    auto base_slot = [&](const std::string& name) -> Matrix* {
        return base_grads ? &grad_slot(g, name, b.param(name)) : nullptr;
    };
    Matrix dx = layer_norm_backward(dhidden, b.param("final_ln.gamma"), st.final_ln,
                                    base_slot("final_ln.gamma"), base_slot("final_ln.beta"));
    for (int l = b.config.num_layers - 1; l >= 0; --l) {
        const auto& c = st.layers[static_cast<std::size_t>(l)];
        const Names n(l);
        // out = h + f
        Matrix df = dx;
        if (c.adapter_ffn) df = adapter_backward(b, *c.adapter_ffn, df, g);
        const Matrix dact = affine_backward(df, c.ffn_act, b.param(n(".ffn.out.w")),
                                            base_slot(n(".ffn.out.w")), base_slot(n(".ffn.out.b")));
        const Matrix dpre = dact.array() * gelu_grad(c.ffn_pre).array();
        const Matrix dn2 = affine_backward(dpre, c.n2, b.param(n(".ffn.in.w")),
                                           base_slot(n(".ffn.in.w")), base_slot(n(".ffn.in.b")));
        Matrix dh = dx + layer_norm_backward(dn2, b.param(n(".ln2.gamma")), c.ln2,
                                             base_slot(n(".ln2.gamma")), base_slot(n(".ln2.beta")));
        // h = x + s
        Matrix ds = dh;
        if (c.adapter_attn) ds = adapter_backward(b, *c.adapter_attn, ds, g);
        const Matrix dn1 = attention_backward(b, n, c.attn, ds, base_grads ? &g : nullptr);
        dx = dh + layer_norm_backward(dn1, b.param(n(".ln1.gamma")), c.ln1,
                                      base_slot(n(".ln1.gamma")), base_slot(n(".ln1.beta")));
    }
    if (base_grads) {
        Matrix& dtok = grad_slot(g, "embed.token", b.param("embed.token"));
        Matrix& dpos = grad_slot(g, "embed.position", b.param("embed.position"));
        for (std::size_t i = 0; i < st.tokens.size(); ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            dtok.row(st.tokens[i]) += dx.row(row);
            dpos.row(row) += dx.row(row);
        }
    }
}

const Head& head_for(const ModelBundle& b, const std::string& task, HeadKind kind) {
    auto it = b.heads.find(task);
    if (it == b.heads.end()) throw LookupError("task '" + task + "' has no head");
    if (it->second.spec.kind != kind)
        throw ValidationError("task '" + task + "' has a head of a different kind");
    return it->second;
}

}  // namespace

Vector softmax(const Vector& logits) {
    const double mx = logits.maxCoeff();
    Vector e = (logits.array() - mx).exp();
    return e / e.sum();
}

EncodeResult encode(const ModelBundle& bundle, const std::string& task,
                    const std::vector<int>& tokens) {
    auto st = forward(bundle, task, tokens);
    return {std::move(st.hidden), st.truncated};
}

PointerLogits pointer_head(const ModelBundle& bundle, const std::string& task,
                           const Matrix& hidden) {
    if (hidden.rows() == 0) throw ValidationError("pointer head needs a non-empty sequence");
    const std::string p = head_prefix(task);
    head_for(bundle, task, HeadKind::Pointer);
    const Matrix logits = affine(hidden, bundle.param(p + ".w"), bundle.param(p + ".b"));
    return {logits.col(0), logits.col(1)};
}

Vector classification_head(const ModelBundle& bundle, const std::string& task,
                           const Matrix& hidden) {
    if (hidden.rows() == 0) throw ValidationError("classification head needs a non-empty sequence");
    const std::string p = head_prefix(task);
    head_for(bundle, task, HeadKind::Classifier);
    return (hidden.row(0) * bundle.param(p + ".w") + bundle.param(p + ".b")).transpose();
}

SpanChoice select_span(const Vector& start_logits, const Vector& end_logits,
                       std::size_t max_answer_len, std::size_t first,
                       std::optional<std::size_t> last) {
    const auto n = static_cast<std::size_t>(start_logits.size());
    if (n == 0 || end_logits.size() != start_logits.size())
        throw ValidationError("start/end logits must be non-empty and equally long");
    const std::size_t hi = std::min(last.value_or(n - 1), n - 1);
    if (first > hi) throw ValidationError("empty candidate range for span selection");
    SpanChoice best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t s = first; s <= hi; ++s) {
        const std::size_t e_hi = std::min(hi, s + max_answer_len);
        for (std::size_t e = s; e <= e_hi; ++e) {
            const double score = start_logits(static_cast<Eigen::Index>(s)) +
                                 end_logits(static_cast<Eigen::Index>(e));
            if (score > best_score) {
                best_score = score;
                best = {s, e, score};
            }
        }
    }
    return best;
}

LossAndGradients loss_and_gradients(const ModelBundle& bundle, const std::string& task,
                                    const TrainingExample& example, double loss_scale) {
    auto it = bundle.heads.find(task);
    if (it == bundle.heads.end()) throw LookupError("task '" + task + "' has no head");
    const Head& head = it->second;
    const auto st = forward(bundle, task, example.tokens);
    const std::string p = head_prefix(task);
    const Matrix& w = bundle.param(p + ".w");
    const Matrix& b = bundle.param(p + ".b");
    const auto len = static_cast<int>(st.hidden.rows());

    LossAndGradients out;
    Matrix& dw = grad_slot(out.gradients, p + ".w", w);
    Matrix& db = grad_slot(out.gradients, p + ".b", b);
    Matrix dhidden = Matrix::Zero(st.hidden.rows(), st.hidden.cols());

    if (head.spec.kind == HeadKind::Pointer) {
        if (example.start < 0 || example.end < 0 || example.start >= len || example.end >= len)
            throw RangeError("span target outside the (possibly truncated) input");
        const Matrix logits = affine(st.hidden, w, b);
        Vector ds, de;
        out.loss = cross_entropy(logits.col(0), example.start, ds) +
                   cross_entropy(logits.col(1), example.end, de);
        Matrix dlogits(logits.rows(), 2);
        dlogits.col(0) = ds * loss_scale;
        dlogits.col(1) = de * loss_scale;
        dhidden = affine_backward(dlogits, st.hidden, w, &dw, &db);
    } else {
        if (example.label < 0 || example.label >= head.spec.classes)
            throw RangeError("class label out of range");
        const Vector logits = (st.hidden.row(0) * w + b).transpose();
        Vector dl;
        out.loss = cross_entropy(logits, example.label, dl);
        const Matrix dz = dl.transpose() * loss_scale;
        dw += st.hidden.row(0).transpose() * dz;
        db += dz;
        dhidden.row(0) = dz * w.transpose();
    }
    out.loss *= loss_scale;
    backward(bundle, st, dhidden, out.gradients);
    return out;
}

double loss_only(const ModelBundle& bundle, const std::string& task,
                 const TrainingExample& example) {
    auto it = bundle.heads.find(task);
    if (it == bundle.heads.end()) throw LookupError("task '" + task + "' has no head");
    const auto hidden = encode(bundle, task, example.tokens).hidden;
    Vector unused;
    if (it->second.spec.kind == HeadKind::Pointer) {
        const auto logits = pointer_head(bundle, task, hidden);
        return cross_entropy(logits.start, example.start, unused) +
               cross_entropy(logits.end, example.end, unused);
    }
    return cross_entropy(classification_head(bundle, task, hidden), example.label, unused);
}

}  // namespace boolmrc::tinyformer
