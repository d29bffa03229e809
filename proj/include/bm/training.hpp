#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bm/batch.hpp"
#include "bm/bridge.hpp"
#include "bm/couplings.hpp"
#include "bm/mlp.hpp"
#include "bm/rng.hpp"

namespace bm {

/// Hyperparameters of the matching loop. cond_alpha selects the conditioning
/// level: 0 conditions the predictor on x0, 1 adds no conditioning, interior
/// values condition on the interpolant at time cond_alpha * t.
struct TrainConfig {
    double cond_alpha = 0.0;
    int steps = 1000;
    int batch_size = 128;
    double sigma = 1.0;
    AdamParams adam{};
    std::string lambda_weighting = "uniform";

    void validate() const {
        if (!(cond_alpha >= 0.0 && cond_alpha <= 1.0))
            throw std::invalid_argument("TrainConfig: cond_alpha must be in [0,1]");
        if (steps < 0) throw std::invalid_argument("TrainConfig: steps must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (!(sigma > 0.0)) throw std::invalid_argument("TrainConfig: sigma must be > 0");
        if (lambda_weighting != "uniform")
            throw std::invalid_argument("TrainConfig: unknown lambda_weighting '" +
                                        lambda_weighting + "'");
    }

    CondMode cond_mode() const {
        if (cond_alpha >= 1.0) return CondMode::none;
        if (cond_alpha <= 0.0) return CondMode::initial_point;
        return CondMode::alpha_point;
    }
};

/// Network architecture for the endpoint predictor.
struct ModelSpec {
    std::vector<int> hidden_dims = {128, 128, 128};
    Activation activation = Activation::silu;
    int time_features = 4;
};

struct TrainingExample {
    Vec x_t;
    std::optional<Vec> cond;
    double t = 0.0;
    Vec target;
};

/// One regression example at a forced time t: the interpolant state, the
/// conditioning vector mandated by cond_alpha, and the endpoint target.
inline TrainingExample make_training_example_at(const TrainConfig& cfg, const Vec& x0,
                                                const Vec& x1, double t, RngStream& stream) {
    const BridgeSpec spec(cfg.sigma, static_cast<int>(x0.size()));
    TrainingExample ex;
    ex.t = t;
    ex.target = x1;
    if (cfg.cond_alpha >= 1.0) {
        ex.x_t = sample_bridge_point(spec, x0, x1, t, stream);
    } else if (cfg.cond_alpha <= 0.0) {
        ex.x_t = sample_bridge_point(spec, x0, x1, t, stream);
        ex.cond = x0;
    } else {
        auto [xs, xt] = sample_bridge_pair(spec, x0, x1, cfg.cond_alpha * t, t, stream);
        ex.x_t = std::move(xt);
        ex.cond = std::move(xs);
    }
    return ex;
}

/// Same with t drawn uniformly on [0,1].
inline TrainingExample make_training_example(const TrainConfig& cfg, const Vec& x0, const Vec& x1,
                                             RngStream& stream) {
    const double t = stream.next_uniform();
    return make_training_example_at(cfg, x0, x1, t, stream);
}

struct TrainingAbort : std::runtime_error {
    int step;
    std::uint64_t batch_label;
    TrainingAbort(int step_, std::uint64_t batch_label_)
        : std::runtime_error("training aborted: non-finite loss at step " + std::to_string(step_) +
                             " (batch stream label " + std::to_string(batch_label_) + ")"),
          step(step_), batch_label(batch_label_) {}
};

struct TrainResult {
    MlpModel model;
    std::vector<std::pair<int, double>> loss_log;
};

namespace detail {

// Stream split labels inside train(); fixed so runs are reproducible.
constexpr std::uint64_t kInitLabel = 0;
constexpr std::uint64_t kDataLabel = 1;
constexpr std::uint64_t kBatchLabel = 0;

} // namespace detail

/// The matching loop: per step, draw a coupled batch, build per-example
/// regression inputs with fresh per-example times, take one Adam step on the
/// weighted squared endpoint error. Aborts loudly on a non-finite loss.
/// Dataset is anything with sample(n, stream) -> PairedBatch and dim().
template <class Dataset>
TrainResult train(const Dataset& dataset, const ModelSpec& arch,
                  const TrainConfig& cfg, RngStream& stream) {
    cfg.validate();
    const int d = dataset.dim();
    const CondMode mode = cfg.cond_mode();

    std::vector<int> dims;
    dims.push_back(mlp_input_dim(d, mode, arch.time_features));
    for (int h : arch.hidden_dims) dims.push_back(h);
    dims.push_back(d);

    RngStream init_stream = stream.split(detail::kInitLabel);
    MlpModel model = mlp_init(dims, arch.activation, mode, arch.time_features, init_stream);
    model.cond_alpha = cfg.cond_alpha;
    AdamState adam = adam_init(model, cfg.adam);

    RngStream data_root = stream.split(detail::kDataLabel);
    const int n0 = model.input_dim();

    TrainResult result;
    result.loss_log.reserve(cfg.steps);

    Mat inputs(n0, cfg.batch_size);
    Mat targets(d, cfg.batch_size);
    const Vec lambda = Vec::Ones(cfg.batch_size);  // uniform weighting

    for (int step = 0; step < cfg.steps; ++step) {
        RngStream step_stream = data_root.split(static_cast<std::uint64_t>(step));
        RngStream batch_stream = step_stream.split(detail::kBatchLabel);
        PairedBatch batch = dataset.sample(cfg.batch_size, batch_stream);

        for (int i = 0; i < cfg.batch_size; ++i) {
            RngStream ex_stream = step_stream.split(1 + static_cast<std::uint64_t>(i));
            TrainingExample ex =
                make_training_example(cfg, batch.x0s[i], batch.x1s[i], ex_stream);
            inputs.col(i) = assemble_input(model, ex.x_t, ex.cond ? &*ex.cond : nullptr, ex.t);
            targets.col(i) = ex.target;
        }

        auto [loss, grads] = mlp_loss_grad(model, inputs, targets, lambda);
        if (!std::isfinite(loss)) throw TrainingAbort(step, static_cast<std::uint64_t>(step));
        adam_step(model, adam, grads);
        result.loss_log.emplace_back(step, loss);
    }

    result.model = std::move(model);
    return result;
}

/// Mean squared endpoint-prediction error on n fresh examples drawn the same
/// way training examples are.
template <class Dataset>
double heldout_endpoint_mse(const MlpModel& model, const Dataset& dataset,
                            const TrainConfig& cfg, int n, RngStream& stream) {
    if (n < 1) throw std::invalid_argument("heldout_endpoint_mse: n must be >= 1");
    PairedBatch batch = dataset.sample(n, stream);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        TrainingExample ex = make_training_example(cfg, batch.x0s[i], batch.x1s[i], stream);
        const Vec pred = mlp_predict(model, ex.x_t, ex.cond ? &*ex.cond : nullptr, ex.t);
        acc += (pred - ex.target).squaredNorm();
    }
    return acc / static_cast<double>(n);
}

} // namespace bm
