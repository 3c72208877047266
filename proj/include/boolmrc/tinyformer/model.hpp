#pragma once
// Forward and backward passes of the miniature encoder and its heads.
//
// Layer layout (pre-norm):
//   s = Attn(LN1(x)); s += AdapterAttn(s)   [AfterAttentionAndFfn only]
//   h = x + s
//   f = FFN(LN2(h));  f += AdapterFfn(f)
//   out = h + f
// followed by a final LayerNorm. Adapter(z) = Up(gelu(Down(LN?(z)))).

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "boolmrc/tinyformer/bundle.hpp"

namespace boolmrc::tinyformer {

using Gradients = std::map<std::string, Matrix>;

struct EncodeResult {
    Matrix hidden;  // positions x hidden_dim
    bool truncated = false;
};

// Runs the base stack plus `task`'s adapters (if any). Inputs longer than
// max_seq_len are truncated and flagged. LookupError for unknown tasks.
EncodeResult encode(const ModelBundle& bundle, const std::string& task,
                    const std::vector<int>& tokens);

struct PointerLogits {
    Eigen::VectorXd start;
    Eigen::VectorXd end;
};

PointerLogits pointer_head(const ModelBundle& bundle, const std::string& task,
                           const Matrix& hidden);

// Logits from the first position's vector.
Eigen::VectorXd classification_head(const ModelBundle& bundle, const std::string& task,
                                    const Matrix& hidden);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct SpanChoice {
    std::size_t start = 0;
    std::size_t end = 0;
    double score = 0.0;  // start_logit[start] + end_logit[end]
};

// Best (s, e) with first <= s <= e <= last and e - s <= max_answer_len.
// Ties go to the lowest start, then the lowest end.
SpanChoice select_span(const Eigen::VectorXd& start_logits, const Eigen::VectorXd& end_logits,
                       std::size_t max_answer_len, std::size_t first = 0,
                       std::optional<std::size_t> last = std::nullopt);

// Supervision for one model input.
struct TrainingExample {
    std::vector<int> tokens;
    int label = 0;         // classifier heads
    int start = 0;         // pointer heads: target positions
    int end = 0;
};

struct LossAndGradients {
    double loss = 0.0;
    Gradients gradients;  // only parameters on the task's path
};

// Cross-entropy of the task head (start + end for pointer heads), times
// loss_scale, with gradients for every parameter on the task's path.
LossAndGradients loss_and_gradients(const ModelBundle& bundle, const std::string& task,
                                    const TrainingExample& example, double loss_scale = 1.0);

double loss_only(const ModelBundle& bundle, const std::string& task,
                 const TrainingExample& example);

}  // namespace boolmrc::tinyformer
