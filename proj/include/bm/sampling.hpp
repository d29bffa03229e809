#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bm/batch.hpp"
#include "bm/bridge.hpp"
#include "bm/mlp.hpp"
#include "bm/rng.hpp"

namespace bm {

enum class Integrator { euler_maruyama, bridge_posterior };

inline std::string to_string(Integrator i) {
    return i == Integrator::euler_maruyama ? "euler_maruyama" : "bridge_posterior";
}

inline Integrator integrator_from_string(const std::string& s) {
    if (s == "euler_maruyama") return Integrator::euler_maruyama;
    if (s == "bridge_posterior") return Integrator::bridge_posterior;
    throw std::invalid_argument("unknown integrator: " + s);
}

/// Time discretization of the inference SDE on the uniform grid i/N.
/// t_clamp applies to euler_maruyama only: the drift is integrated on
/// [0, 1 - t_clamp] and the final transition jumps deterministically onto the
/// endpoint prediction. 0 means "one grid step", i.e. 1/num_steps.
struct SamplerConfig {
    int num_steps = 200;
    Integrator integrator = Integrator::bridge_posterior;
    double t_clamp = 0.0;

    double effective_clamp() const {
        return t_clamp == 0.0 ? 1.0 / num_steps : t_clamp;
    }

    void validate() const {
        if (num_steps < 1) throw std::invalid_argument("SamplerConfig: num_steps must be >= 1");
        if (integrator == Integrator::euler_maruyama) {
            const double eps = effective_clamp();
            if (!(eps > 0.0 && eps <= 1.0 / num_steps + 1e-15))
                throw std::invalid_argument(
                    "SamplerConfig: t_clamp must satisfy 0 < eps <= 1/num_steps");
        }
    }
};

/// A realized path on the grid plus the endpoint prediction evaluated at each
/// grid point. The final entry of endpoint_preds is the landing state itself
/// (the last prediction actually used by the integrator).
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> endpoint_preds;
};

struct SamplingAbort : std::runtime_error {
    int step;
    explicit SamplingAbort(int step_)
        : std::runtime_error("sampling aborted: non-finite state at step " + std::to_string(step_)),
          step(step_) {}
};

namespace detail {

// Path value at fractional grid position pos (in units of grid steps),
// linearly interpolated between stored states. Exact (no arithmetic) when pos
// falls on a grid point, so conditioning at alpha = 0 returns states[0] and
// alpha = 1 returns the current state bit-for-bit.
inline Vec path_value_at(const std::vector<Vec>& states, double pos) {
    const auto j = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(j);
    if (frac == 0.0 || j + 1 >= states.size()) return states[j];
    return (1.0 - frac) * states[j] + frac * states[j + 1];
}

} // namespace detail

/// Integrate the learned drift from x0 at t = 0 to t = 1. The predictor is
/// any callable (x_t, cond*, t) -> x1_hat; cond_mode/cond_alpha select the
/// conditioning input exactly as at training time, with the alpha_point value
/// read off the realized path.
///
/// bridge_posterior steps with the exact one-step conditional of the pinned
/// process toward the current prediction and lands on it noiselessly at the
/// final step. euler_maruyama steps the drift (x1_hat - x)/(1 - t) up to
/// 1 - t_clamp and then jumps onto the prediction evaluated there.
template <class Predictor>
Trajectory integrate_path_with(Predictor&& predict, CondMode cond_mode, double cond_alpha,
                               const BridgeSpec& spec, const SamplerConfig& cfg, const Vec& x0,
                               RngStream& stream) {
    cfg.validate();
    if (x0.size() != spec.dim)
        throw std::invalid_argument("integrate_path: x0 dim mismatch with spec");
    const int N = cfg.num_steps;
    const auto d = x0.size();

    Trajectory traj;
    traj.times.resize(N + 1);
    for (int i = 0; i <= N; ++i) traj.times[i] = static_cast<double>(i) / N;
    traj.states.reserve(N + 1);
    traj.endpoint_preds.reserve(N + 1);
    traj.states.push_back(x0);

    auto cond_at = [&](double grid_pos) -> Vec {
        switch (cond_mode) {
            case CondMode::none: return Vec();
            case CondMode::initial_point: return traj.states.front();
            case CondMode::alpha_point:
                return detail::path_value_at(traj.states, cond_alpha * grid_pos);
        }
        throw std::logic_error("unknown cond mode");
    };

    for (int i = 0; i < N; ++i) {
        const Vec& x = traj.states.back();
        const double t = traj.times[i];
        const Vec cond = cond_at(static_cast<double>(i));
        const Vec* cond_ptr = cond_mode == CondMode::none ? nullptr : &cond;
        Vec pred = predict(x, cond_ptr, t);
        traj.endpoint_preds.push_back(pred);

        const double rem = static_cast<double>(N - i) / N;       // 1 - t, exact
        const double rem_next = static_cast<double>(N - i - 1) / N;
        const double h = 1.0 / N;
        Vec next;
        if (cfg.integrator == Integrator::bridge_posterior) {
            if (i == N - 1) {
                next = std::move(pred);  // zero-variance final transition
            } else {
                const double r = 1.0 / (N - i);
                const double sd = spec.sigma * std::sqrt(h * rem_next / rem);
                next = (1.0 - r) * x + r * pred + sd * draw_gaussian(stream, d);
            }
        } else {
            if (i < N - 1) {
                next = x + (h / rem) * (pred - x) +
                       spec.sigma * std::sqrt(h) * draw_gaussian(stream, d);
            } else {
                // last segment: advance to 1 - eps, then jump onto the
                // prediction evaluated there
                const double eps = cfg.effective_clamp();
                const double h1 = h - eps;
                if (h1 > 0.0) {
                    Vec sub = x + (h1 / rem) * (pred - x) +
                              spec.sigma * std::sqrt(h1) * draw_gaussian(stream, d);
                    const double t_sub = 1.0 - eps;
                    Vec cond_sub;
                    const Vec* cond_sub_ptr = nullptr;
                    if (cond_mode != CondMode::none) {
                        const double pos = cond_alpha * t_sub * N;
                        if (pos <= static_cast<double>(N - 1)) {
                            cond_sub = detail::path_value_at(traj.states, pos);
                        } else {
                            // between the last grid point and the off-grid sub-step state
                            const double w = (pos - (N - 1)) / (t_sub * N - (N - 1));
                            cond_sub = (1.0 - w) * traj.states.back() + w * sub;
                        }
                        cond_sub_ptr = &cond_sub;
                    }
                    next = predict(sub, cond_sub_ptr, t_sub);
                } else {
                    next = std::move(pred);  // eps == h: grid point is the clamp point
                }
            }
        }
        if (!next.allFinite()) throw SamplingAbort(i);
        traj.states.push_back(std::move(next));
    }
    traj.endpoint_preds.push_back(traj.states.back());
    return traj;
}

inline Trajectory integrate_path(const MlpModel& model, const BridgeSpec& spec,
                                 const SamplerConfig& cfg, const Vec& x0, RngStream& stream) {
    if (x0.size() != model.state_dim())
        throw std::invalid_argument("integrate_path: x0 dim mismatch with model");
    auto predict = [&model](const Vec& x, const Vec* cond, double t) {
        return mlp_predict(model, x, cond, t);
    };
    return integrate_path_with(predict, model.cond_mode, model.cond_alpha, spec, cfg, x0, stream);
}

/// Integrate one path per initial point, each on its own split stream
/// (labeled by index), and return the (x0, X1) pairs. Identical to calling
/// integrate_path per point regardless of execution order.
inline PairedBatch sample_endpoints(const MlpModel& model, const BridgeSpec& spec,
                                    const SamplerConfig& cfg, const std::vector<Vec>& x0s,
                                    RngStream& stream) {
    PairedBatch out;
    out.x0s.reserve(x0s.size());
    out.x1s.reserve(x0s.size());
    for (std::size_t i = 0; i < x0s.size(); ++i) {
        RngStream path_stream = stream.split(static_cast<std::uint64_t>(i));
        Trajectory traj = integrate_path(model, spec, cfg, x0s[i], path_stream);
        out.push(x0s[i], std::move(traj.states.back()));
    }
    return out;
}

/// Generic-predictor variant of sample_endpoints, for oracle predictors.
template <class Predictor>
PairedBatch sample_endpoints_with(Predictor&& predict, CondMode cond_mode, double cond_alpha,
                                  const BridgeSpec& spec, const SamplerConfig& cfg,
                                  const std::vector<Vec>& x0s, RngStream& stream) {
    PairedBatch out;
    out.x0s.reserve(x0s.size());
    out.x1s.reserve(x0s.size());
    for (std::size_t i = 0; i < x0s.size(); ++i) {
        RngStream path_stream = stream.split(static_cast<std::uint64_t>(i));
        Trajectory traj = integrate_path_with(predict, cond_mode, cond_alpha, spec, cfg, x0s[i],
                                              path_stream);
        out.push(x0s[i], std::move(traj.states.back()));
    }
    return out;
}

} // namespace bm
