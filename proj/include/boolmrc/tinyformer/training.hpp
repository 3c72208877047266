#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boolmrc/tinyformer/model.hpp"

namespace boolmrc::tinyformer {

enum class Optimizer { Adam, Sgd };

struct TrainHyper {
    double lr = 5e-3;
    int epochs = 10;
    double l2 = 0.0;
    std::uint64_t seed = 7;
    std::size_t batch_size = 16;  // 0 = full batch
    Optimizer optimizer = Optimizer::Adam;
};

struct TrainLog {
    // Objective (mean cross-entropy + l2/2 |theta|^2 over trainable
    // parameters) before training and after every epoch.
    std::vector<double> epoch_objective;
};

// Mean cross-entropy over `data`.
double mean_loss(const ModelBundle& bundle, const std::string& task,
                 const std::vector<TrainingExample>& data);

// Updates only trainable_names(bundle, task); a frozen base is never touched.
// Shuffling is driven by hyper.seed. Throws TrainingError on a non-finite loss.
ModelBundle train(ModelBundle bundle, const std::string& task,
                  const std::vector<TrainingExample>& data, const TrainHyper& hyper,
                  TrainLog* log = nullptr);

struct GradCheckOptions {
    std::size_t samples = 64;
    std::string name_prefix;  // restrict to parameters whose name starts with this
    std::uint64_t seed = 3;
};

// |analytic - numeric| / max(|analytic| + |numeric|, kGradCheckFloor)
inline constexpr double kGradCheckFloor = 1e-6;

double relative_error(double analytic, double numeric) noexcept;

// Central finite differences on a random subsample of trainable scalars;
// returns the worst relative error.
double grad_check(const ModelBundle& bundle, const std::string& task,
                  const TrainingExample& example, double epsilon,
                  const GradCheckOptions& options = {});

}  // namespace boolmrc::tinyformer
