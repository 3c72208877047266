#include "boolmrc/tinyformer/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "boolmrc/errors.hpp"

namespace boolmrc::tinyformer {

namespace {

struct AdamState {
    Matrix m;
    Matrix v;
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double l2_term(const ModelBundle& bundle, const std::vector<std::string>& names, double l2) {
    if (l2 == 0.0) return 0.0;
    double sq = 0.0;
    for (const auto& n : names) sq += bundle.param(n).squaredNorm();
    return 0.5 * l2 * sq;
}

}  // namespace

double mean_loss(const ModelBundle& bundle, const std::string& task,
                 const std::vector<TrainingExample>& data) {
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (const auto& ex : data) total += loss_only(bundle, task, ex);
    return total / static_cast<double>(data.size());
}

ModelBundle train(ModelBundle bundle, const std::string& task,
                  const std::vector<TrainingExample>& data, const TrainHyper& hyper,
                  TrainLog* log) {
    if (data.empty()) throw ValidationError("training data is empty");
    if (!bundle.heads.count(task)) throw LookupError("task '" + task + "' has no head");
    const auto names = trainable_names(bundle, task);

    if (log) log->epoch_objective.push_back(mean_loss(bundle, task, data) + l2_term(bundle, names, hyper.l2));
    if (hyper.epochs <= 0) return bundle;

    std::map<std::string, AdamState> adam;
    std::mt19937_64 rng(hyper.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = hyper.batch_size == 0 ? data.size() : hyper.batch_size;
    long step = 0;

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        if (hyper.batch_size != 0) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
            const std::size_t b1 = std::min(order.size(), b0 + batch);
            const double inv = 1.0 / static_cast<double>(b1 - b0);
            Gradients sum;
            double batch_loss = 0.0;
            for (std::size_t i = b0; i < b1; ++i) {
                auto lg = loss_and_gradients(bundle, task, data[order[i]], inv);
                batch_loss += lg.loss;
                for (auto& [name, g] : lg.gradients) {
                    auto it = sum.find(name);
                    if (it == sum.end()) sum.emplace(name, std::move(g));
                    else it->second += g;
                }
            }
            if (!std::isfinite(batch_loss)) {
                std::ostringstream msg;
                msg << "non-finite loss " << batch_loss << " at epoch " << epoch << ", examples ["
                    << b0 << "," << b1 << ") of task '" << task << "'";
                throw TrainingError(msg.str());
            }
            ++step;
            for (const auto& name : names) {
                Matrix& theta = bundle.mutable_param(name);
                Matrix grad = Matrix::Zero(theta.rows(), theta.cols());
                if (auto it = sum.find(name); it != sum.end()) grad = it->second;
                if (hyper.l2 != 0.0) grad += hyper.l2 * theta;
                if (hyper.optimizer == Optimizer::Sgd) {
                    theta -= hyper.lr * grad;
                    continue;
                }
                auto [it, fresh] = adam.try_emplace(name);
                if (fresh) {
                    it->second.m = Matrix::Zero(theta.rows(), theta.cols());
                    it->second.v = Matrix::Zero(theta.rows(), theta.cols());
                }
                auto& st = it->second;
                st.m = kBeta1 * st.m + (1.0 - kBeta1) * grad;
                st.v = kBeta2 * st.v + (1.0 - kBeta2) * grad.cwiseAbs2();
                const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
                theta.array() -= hyper.lr * (st.m.array() / c1) /
                                 ((st.v.array() / c2).sqrt() + kAdamEps);
            }
        }
        if (log) log->epoch_objective.push_back(mean_loss(bundle, task, data) + l2_term(bundle, names, hyper.l2));
    }
    return bundle;
}

double relative_error(double analytic, double numeric) noexcept {
    return std::abs(analytic - numeric) /
           std::max(std::abs(analytic) + std::abs(numeric), kGradCheckFloor);
}

double grad_check(const ModelBundle& bundle, const std::string& task,
                  const TrainingExample& example, double epsilon,
                  const GradCheckOptions& options) {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    struct Coord {
        std::string name;
        Eigen::Index index;
    };
    std::vector<Coord> coords;
    for (const auto& name : trainable_names(bundle, task)) {
        if (name.rfind(options.name_prefix, 0) != 0) continue;
        const auto size = bundle.param(name).size();
        for (Eigen::Index i = 0; i < size; ++i) coords.push_back({name, i});
    }
    if (coords.empty()) throw ValidationError("no parameters match '" + options.name_prefix + "'");
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    if (coords.size() > options.samples) coords.resize(options.samples);

    const auto analytic = loss_and_gradients(bundle, task, example).gradients;
    ModelBundle probe = bundle;
    double worst = 0.0;
    for (const auto& c : coords) {
        double& theta = probe.mutable_param(c.name).data()[c.index];
        const double saved = theta;
        theta = saved + epsilon;
        const double up = loss_only(probe, task, example);
        theta = saved - epsilon;
        const double down = loss_only(probe, task, example);
        theta = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        double a = 0.0;
        if (auto it = analytic.find(c.name); it != analytic.end()) a = it->second.data()[c.index];
        worst = std::max(worst, relative_error(a, numeric));
    }
    return worst;
}

}  // namespace boolmrc::tinyformer
