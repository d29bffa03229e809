#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bm/rng.hpp"

namespace bm {

/// Scalar coupling N(0, S) with unit variances, off-diagonal corr_alpha, and
/// reference diffusion scale sigma. corr_alpha is a correlation, not the
/// conditioning level of the training module.
struct GaussianCouplingSpec {
    double corr_alpha;
    double sigma;

    GaussianCouplingSpec(double corr_alpha_, double sigma_)
        : corr_alpha(corr_alpha_), sigma(sigma_) {
        if (!(corr_alpha > 0.0 && corr_alpha < 1.0))
            throw std::invalid_argument("GaussianCouplingSpec: corr_alpha must be in (0,1)");
        if (!(sigma > 0.0))
            throw std::invalid_argument("GaussianCouplingSpec: sigma must be > 0");
    }
};

/// Unique root in (0,1) of 1 - a^2 = sigma^2 a, written to avoid cancellation
/// for large sigma.
inline double alpha_star(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("alpha_star: sigma must be > 0");
    const double s2 = sigma * sigma;
    return 2.0 / (s2 + std::sqrt(s2 * s2 + 4.0));
}

/// Variance of the interpolant marginal at time t: 1 + t(1-t)(sigma^2 + 2a - 2).
/// Positive on the whole valid domain.
inline double interpolant_variance(const GaussianCouplingSpec& spec, double t) {
    const double c = spec.sigma * spec.sigma + 2.0 * spec.corr_alpha - 2.0;
    return 1.0 + t * (1.0 - t) * c;
}

/// Linear drift coefficient of the projected process at time t:
/// kappa(t) = (-1 + a - t(sigma^2 + 2a - 2)) / (1 + t(1-t)(sigma^2 + 2a - 2)).
inline double kappa(double t, const GaussianCouplingSpec& spec) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("kappa: t must be in [0,1]");
    const double c = spec.sigma * spec.sigma + 2.0 * spec.corr_alpha - 2.0;
    return (-1.0 + spec.corr_alpha - t * c) / (1.0 + t * (1.0 - t) * c);
}

struct QuadratureError : std::runtime_error {
    double achieved;
    QuadratureError(const std::string& msg, double achieved_)
        : std::runtime_error(msg), achieved(achieved_) {}
};

/// Composite Simpson rule with an even number of panels.
template <class F>
double simpson(F&& f, double a, double b, int panels) {
    if (panels < 2 || panels % 2 != 0)
        throw std::invalid_argument("simpson: panels must be even and >= 2");
    const double h = (b - a) / panels;
    double acc = f(a) + f(b);
    for (int i = 1; i < panels; ++i) {
        acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

namespace detail {

// Integral of kappa over [0, t], panel-doubling until successive Simpson
// values agree to abs_tol.
inline double kappa_integral(const GaussianCouplingSpec& spec, double t, double abs_tol = 1e-9) {
    auto f = [&](double s) { return kappa(s, spec); };
    double prev = simpson(f, 0.0, t, 8);
    for (int panels = 16; panels <= (1 << 22); panels *= 2) {
        const double cur = simpson(f, 0.0, t, panels);
        if (std::abs(cur - prev) < abs_tol) return cur;
        prev = cur;
    }
    throw QuadratureError("kappa_integral: did not reach tolerance", std::abs(prev));
}

} // namespace detail

/// Endpoint covariance of the projected linear process started at N(0,1):
/// exp(K(1)) with K(t) the integral of kappa. This is the correlation the
/// projection assigns to the coupling with parameter corr_alpha; it equals
/// corr_alpha exactly at corr_alpha = alpha_star(sigma).
inline double f_alpha(const GaussianCouplingSpec& spec) {
    return std::exp(detail::kappa_integral(spec, 1.0));
}

inline double f_alpha(double corr_alpha, double sigma) {
    return f_alpha(GaussianCouplingSpec(corr_alpha, sigma));
}

/// E[X_1 | X_t = x_t] = (t + (1-t)a) / (1 + t(1-t)(sigma^2 + 2a - 2)) x_t.
/// The projected drift is (posterior_mean - x_t)/(1-t) = kappa(t) x_t.
inline double posterior_mean(double x_t, double t, const GaussianCouplingSpec& spec) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("posterior_mean: t must be in [0,1]");
    const double num = t + (1.0 - t) * spec.corr_alpha;
    return num / interpolant_variance(spec, t) * x_t;
}

/// Mean and covariance of a joint Gaussian; cov must be symmetric PSD.
struct GaussianJoint {
    Vec mean;
    Mat cov;
};

/// Condition a joint Gaussian on exact observations of a subset of coordinates.
/// Returns the conditional of the remaining coordinates, in their original order.
inline GaussianJoint gaussian_condition(const GaussianJoint& joint,
                                        const std::vector<int>& observed_idx,
                                        const Vec& observed_values) {
    const Eigen::Index n = joint.mean.size();
    if (joint.cov.rows() != n || joint.cov.cols() != n)
        throw std::invalid_argument("gaussian_condition: cov/mean size mismatch");
    if (static_cast<Eigen::Index>(observed_idx.size()) != observed_values.size())
        throw std::invalid_argument("gaussian_condition: observed index/value size mismatch");

    std::vector<bool> is_obs(n, false);
    for (int i : observed_idx) {
        if (i < 0 || i >= n) throw std::invalid_argument("gaussian_condition: index out of range");
        is_obs[i] = true;
    }
    std::vector<int> rest;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!is_obs[i]) rest.push_back(static_cast<int>(i));

    const Eigen::Index no = static_cast<Eigen::Index>(observed_idx.size());
    const Eigen::Index nr = static_cast<Eigen::Index>(rest.size());

    Mat S_oo(no, no), S_ro(nr, no), S_rr(nr, nr);
    Vec mu_o(no), mu_r(nr);
    for (Eigen::Index i = 0; i < no; ++i) {
        mu_o[i] = joint.mean[observed_idx[i]];
        for (Eigen::Index j = 0; j < no; ++j) S_oo(i, j) = joint.cov(observed_idx[i], observed_idx[j]);
    }
    for (Eigen::Index i = 0; i < nr; ++i) {
        mu_r[i] = joint.mean[rest[i]];
        for (Eigen::Index j = 0; j < no; ++j) S_ro(i, j) = joint.cov(rest[i], observed_idx[j]);
        for (Eigen::Index j = 0; j < nr; ++j) S_rr(i, j) = joint.cov(rest[i], rest[j]);
    }

    Eigen::FullPivLU<Mat> lu(S_oo);
    if (!lu.isInvertible())
        throw std::invalid_argument("gaussian_condition: observed block is singular");

    const Mat gain = S_ro * lu.inverse();            // S_ro S_oo^-1
    GaussianJoint out;
    out.mean = mu_r + gain * (observed_values - mu_o);
    out.cov = S_rr - gain * S_ro.transpose();
    return out;
}

/// Joint Gaussian of (X_0, X_t, X_1) under the bridge interpolation of the
/// coupling: unit endpoint variances, Cov(X0,X1) = a, Cov(Xt,X1) = t + (1-t)a,
/// Cov(Xt,X0) = (1-t) + t a, Var(Xt) = interpolant_variance.
inline GaussianJoint coupling_joint(const GaussianCouplingSpec& spec, double t) {
    const double a = spec.corr_alpha;
    GaussianJoint j;
    j.mean = Vec::Zero(3);
    j.cov = Mat(3, 3);
    j.cov << 1.0, (1.0 - t) + t * a, a,
             (1.0 - t) + t * a, interpolant_variance(spec, t), t + (1.0 - t) * a,
             a, t + (1.0 - t) * a, 1.0;
    return j;
}

/// E[X_1 | X_0 = x0, X_t = x_t]; the endpoint boundaries are handled exactly.
inline double augmented_posterior_mean(double x0, double x_t, double t,
                                       const GaussianCouplingSpec& spec) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("augmented_posterior_mean: t must be in [0,1]");
    if (t <= 0.0) return spec.corr_alpha * x0;  // X_t == X_0, condition on x0 alone
    if (t >= 1.0) return x_t;                   // pinned
    GaussianJoint cond = gaussian_condition(coupling_joint(spec, t), {0, 1},
                                            (Vec(2) << x0, x_t).finished());
    return cond.mean[0];
}

/// Absolute gap between the two drift decompositions of the time-reversed
/// process at (t, x_t, x1), evaluated in the scalar linear-Gaussian setting
/// with reference started at N(0,1). Every term is affine in (x_t, x1);
/// the value is zero up to rounding.
inline double reversal_identity_residual(const GaussianCouplingSpec& spec, double t, double x_t, double x1) {
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("reversal_identity_residual: t must be in (0,1)");
    const double s2 = spec.sigma * spec.sigma;

    // Reference joint (X0, Xt): Var X0 = 1, Cov = 1, Var Xt = 1 + s2 t.
    GaussianJoint ref;
    ref.mean = Vec::Zero(2);
    ref.cov = Mat(2, 2);
    ref.cov << 1.0, 1.0, 1.0, 1.0 + s2 * t;

    const double score_ref_marginal = -x_t / ref.cov(1, 1);

    // X0 | Xt under the reference, mean cq * x_t. The joints are centered, so
    // conditioning on the value 1 reads off the linear gain.
    GaussianJoint q0t = gaussian_condition(ref, {1}, (Vec(1) << 1.0).finished());
    const double cq = q0t.mean[0];
    const double vq = q0t.cov(0, 0);

    // E[X0 | Xt = x_t, X1 = x1] under the coupled interpolation.
    GaussianJoint p0 = gaussian_condition(coupling_joint(spec, t), {1, 2},
                                          (Vec(2) << x_t, x1).finished());
    const double m0 = p0.mean[0];

    // d/dx_t log of the reference conditional of X0 given x_t equals
    // (x0 - cq x_t) cq / vq; affine in x0, so the conditional mean plugs in.
    const double e_term = (m0 - cq * x_t) * cq / vq;
    const double lhs = score_ref_marginal + e_term;

    // Xt | X1 under the coupled interpolation.
    GaussianJoint jt1;
    jt1.mean = Vec::Zero(2);
    jt1.cov = Mat(2, 2);
    jt1.cov << interpolant_variance(spec, t), t + (1.0 - t) * spec.corr_alpha,
               t + (1.0 - t) * spec.corr_alpha, 1.0;
    GaussianJoint pt1 = gaussian_condition(jt1, {1}, (Vec(1) << x1).finished());

    const double score_pt1 = -(x_t - pt1.mean[0]) / pt1.cov(0, 0);
    const double score_q1t = (x1 - x_t) / (s2 * (1.0 - t));
    const double rhs = score_pt1 - score_q1t;

    return std::abs(lhs - rhs);
}

} // namespace bm
