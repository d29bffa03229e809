#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "bm/rng.hpp"

namespace bm {

/// Reference diffusion: scaled Brownian motion with constant sigma and zero
/// drift. All conditional laws below are Gaussian in closed form. sigma = 0
/// degenerates to deterministic interpolation and is accepted only so the
/// integrators can be exercised without noise; training requires sigma > 0.
struct BridgeSpec {
    double sigma;
    int dim;

    BridgeSpec(double sigma_, int dim_) : sigma(sigma_), dim(dim_) {
        if (!(sigma >= 0.0)) throw std::invalid_argument("BridgeSpec: sigma must be >= 0");
        if (dim < 1) throw std::invalid_argument("BridgeSpec: dim must be >= 1");
    }
};

/// X_t = (1-t) x0 + t x1 + sigma sqrt(t(1-t)) Z. Exact at t in {0,1}.
inline Vec sample_bridge_point(const BridgeSpec& spec, const Vec& x0, const Vec& x1,
                               double t, RngStream& stream) {
    check_same_dim(x0, x1, "sample_bridge_point");
    if (x0.size() != spec.dim) throw std::invalid_argument("sample_bridge_point: dim mismatch with spec");
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("sample_bridge_point: t must be in [0,1]");
    const double sd = spec.sigma * std::sqrt(t * (1.0 - t));
    return (1.0 - t) * x0 + t * x1 + sd * draw_gaussian(stream, x0.size());
}

/// Joint draw (X_s, X_t) of the bridge pinned at (0,x0) and (1,x1), for
/// 0 <= s <= t <= 1: X_s as above, then X_t from the sub-bridge pinned at
/// (s, X_s) and (1, x1), mean (1-r) X_s + r x1 with r = (t-s)/(1-s) and
/// per-coordinate variance sigma^2 (t-s)(1-t)/(1-s).
inline std::pair<Vec, Vec> sample_bridge_pair(const BridgeSpec& spec, const Vec& x0, const Vec& x1,
                                              double s, double t, RngStream& stream) {
    if (s > t) throw std::invalid_argument("sample_bridge_pair: requires s <= t");
    if (!(s >= 0.0 && t <= 1.0)) throw std::invalid_argument("sample_bridge_pair: times must be in [0,1]");
    if (s >= 1.0) return {x1, x1};
    Vec xs = sample_bridge_point(spec, x0, x1, s, stream);
    const double r = (t - s) / (1.0 - s);
    const double var = spec.sigma * spec.sigma * (t - s) * (1.0 - t) / (1.0 - s);
    Vec xt = (1.0 - r) * xs + r * x1 + std::sqrt(var) * draw_gaussian(stream, xs.size());
    return {std::move(xs), std::move(xt)};
}

/// Drift of the pinned process toward a predicted endpoint: (x1_hat - x_t)/(1-t).
inline Vec bridge_drift(const Vec& x1_hat, const Vec& x_t, double t) {
    check_same_dim(x1_hat, x_t, "bridge_drift");
    if (t >= 1.0) throw std::invalid_argument("bridge_drift: singular at t >= 1");
    return (x1_hat - x_t) / (1.0 - t);
}

/// Gradient in x_t of log of the forward transition density to x1 at time 1,
/// N(x1; x_t, sigma^2 (1-t) I): (x1 - x_t)/(sigma^2 (1-t)).
inline Vec bridge_score(const Vec& x1, const Vec& x_t, double t, const BridgeSpec& spec) {
    check_same_dim(x1, x_t, "bridge_score");
    if (t >= 1.0) throw std::invalid_argument("bridge_score: singular at t >= 1");
    if (!(spec.sigma > 0.0)) throw std::invalid_argument("bridge_score: requires sigma > 0");
    return (x1 - x_t) / (spec.sigma * spec.sigma * (1.0 - t));
}

} // namespace bm
