#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bm/batch.hpp"
#include "bm/gaussian.hpp"
#include "bm/rng.hpp"

namespace bm {

/// A simple marginal law used as a building block for couplings: either a
/// standard normal or an isotropic Gaussian mixture with shared per-component
/// std.
struct MarginalSpec {
    enum class Kind { std_normal, gaussian_mixture };

    Kind kind = Kind::std_normal;
    int dim = 1;
    std::vector<Vec> centers;
    std::vector<double> weights;
    double comp_std = 1.0;

    static MarginalSpec std_normal(int dim) {
        if (dim < 1) throw std::invalid_argument("MarginalSpec: dim must be >= 1");
        MarginalSpec m;
        m.kind = Kind::std_normal;
        m.dim = dim;
        return m;
    }

    static MarginalSpec gaussian_mixture(std::vector<Vec> centers, std::vector<double> weights,
                                         double comp_std) {
        if (centers.empty()) throw std::invalid_argument("MarginalSpec: mixture needs centers");
        if (centers.size() != weights.size())
            throw std::invalid_argument("MarginalSpec: centers/weights length mismatch");
        if (!(comp_std >= 0.0)) throw std::invalid_argument("MarginalSpec: comp_std must be >= 0");
        double total = 0.0;
        for (double w : weights) {
            if (!(w > 0.0)) throw std::invalid_argument("MarginalSpec: weights must be positive");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("MarginalSpec: weights must sum to 1");
        MarginalSpec m;
        m.kind = Kind::gaussian_mixture;
        m.dim = static_cast<int>(centers.front().size());
        for (const Vec& c : centers)
            if (c.size() != m.dim) throw std::invalid_argument("MarginalSpec: center dims differ");
        m.centers = std::move(centers);
        m.weights = std::move(weights);
        m.comp_std = comp_std;
        return m;
    }

    int sample_component(RngStream& stream) const {
        const double u = stream.next_uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u <= acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    Vec sample(RngStream& stream) const {
        if (kind == Kind::std_normal) return draw_gaussian(stream, dim);
        const int c = sample_component(stream);
        return centers[c] + comp_std * draw_gaussian(stream, dim);
    }
};

/// Discrete transport plan between two finite supports. Row sums match the
/// source weights exactly; column sums match the target weights up to the
/// solver's stopping tolerance.
struct DiscretePlan {
    std::vector<Vec> row_points;
    std::vector<Vec> col_points;
    Mat plan;  // nonnegative, rows x cols
};

/// Cross moment E[x y] - E[x] E[y] of scalar supports under the plan.
inline double plan_correlation(const DiscretePlan& plan) {
    if (plan.row_points.empty() || plan.col_points.empty())
        throw std::invalid_argument("plan_correlation: empty plan");
    if (plan.row_points.front().size() != 1 || plan.col_points.front().size() != 1)
        throw std::invalid_argument("plan_correlation: scalar supports required");
    double exy = 0.0, ex = 0.0, ey = 0.0;
    for (Eigen::Index i = 0; i < plan.plan.rows(); ++i) {
        for (Eigen::Index j = 0; j < plan.plan.cols(); ++j) {
            const double p = plan.plan(i, j);
            const double x = plan.row_points[i][0];
            const double y = plan.col_points[j][0];
            exy += p * x * y;
            ex += p * x;
            ey += p * y;
        }
    }
    return exy - ex * ey;
}

struct SinkhornError : std::runtime_error {
    double achieved_violation;
    SinkhornError(const std::string& msg, double violation)
        : std::runtime_error(msg), achieved_violation(violation) {}
};

struct SinkhornOptions {
    double epsilon = 1.0;
    double tol = 1e-8;       // L1 violation of the column marginals
    int max_iters = 10000;
};

/// Log-domain Sinkhorn on the squared Euclidean cost. Alternates column and
/// row potential updates; the row update is applied last, so the returned
/// plan has exact row marginals while the column violation is below tol.
/// Optionally records the column violation after every full iteration.
inline DiscretePlan sinkhorn(const std::vector<Vec>& src_points, const Vec& src_weights,
                             const std::vector<Vec>& dst_points, const Vec& dst_weights,
                             const SinkhornOptions& opts = {},
                             std::vector<double>* violation_log = nullptr) {
    const Eigen::Index n = static_cast<Eigen::Index>(src_points.size());
    const Eigen::Index m = static_cast<Eigen::Index>(dst_points.size());
    if (n == 0 || m == 0) throw std::invalid_argument("sinkhorn: empty support");
    if (src_weights.size() != n || dst_weights.size() != m)
        throw std::invalid_argument("sinkhorn: weight length mismatch");
    if (!(opts.epsilon > 0.0)) throw std::invalid_argument("sinkhorn: epsilon must be > 0");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(src_weights[i] > 0.0)) throw std::invalid_argument("sinkhorn: weights must be positive");
    for (Eigen::Index j = 0; j < m; ++j)
        if (!(dst_weights[j] > 0.0)) throw std::invalid_argument("sinkhorn: weights must be positive");
    if (std::abs(src_weights.sum() - 1.0) > 1e-9 || std::abs(dst_weights.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("sinkhorn: weights must sum to 1");

    // M(i,j) = -cost(i,j)/epsilon
    Mat M(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            M(i, j) = -(src_points[i] - dst_points[j]).squaredNorm() / opts.epsilon;

    const Vec log_a = src_weights.array().log();
    const Vec log_b = dst_weights.array().log();
    Vec phi = Vec::Zero(n);  // row potential
    Vec psi = Vec::Zero(m);  // column potential

    auto logsumexp_cols = [&](Vec& out) {
        // out[j] = LSE_i(M(i,j) + phi[i])
        for (Eigen::Index j = 0; j < m; ++j) {
            double mx = -std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < n; ++i) mx = std::max(mx, M(i, j) + phi[i]);
            double s = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) s += std::exp(M(i, j) + phi[i] - mx);
            out[j] = mx + std::log(s);
        }
    };
    auto logsumexp_rows = [&](Vec& out) {
        // out[i] = LSE_j(M(i,j) + psi[j])
        for (Eigen::Index i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < m; ++j) mx = std::max(mx, M(i, j) + psi[j]);
            double s = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) s += std::exp(M(i, j) + psi[j] - mx);
            out[i] = mx + std::log(s);
        }
    };

    double violation = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iters; ++it) {
        Vec lse_c(m);
        logsumexp_cols(lse_c);
        psi = log_b - lse_c;
        Vec lse_r(n);
        logsumexp_rows(lse_r);
        phi = log_a - lse_r;

        // column L1 violation of the current plan (rows are exact after phi)
        violation = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            double col = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) col += std::exp(M(i, j) + phi[i] + psi[j]);
            violation += std::abs(col - dst_weights[j]);
        }
        if (violation_log) violation_log->push_back(violation);
        if (violation < opts.tol) break;
    }
    if (!(violation < opts.tol))
        throw SinkhornError("sinkhorn: max_iters reached, violation " + std::to_string(violation),
                            violation);

    DiscretePlan out;
    out.row_points = src_points;
    out.col_points = dst_points;
    out.plan = Mat(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) out.plan(i, j) = std::exp(M(i, j) + phi[i] + psi[j]);
    return out;
}

/// Training-coupling constructors. Each draw returns an (x0, x1) pair whose
/// marginals match the declared laws.
class CouplingSampler {
public:
    enum class Kind { cross_mixture, entropic_shift, gaussian_corr, independent, discrete_plan };

    /// Two isotropic 2-D components paired crosswise: sources (-2,-2),(-2,2)
    /// map to targets (2,2),(2,-2) respectively.
    static CouplingSampler cross_mixture(double comp_std = 0.2) {
        CouplingSampler s;
        s.kind_ = Kind::cross_mixture;
        s.dim_ = 2;
        s.comp_std_ = comp_std;
        s.src_centers_ = {(Vec(2) << -2.0, -2.0).finished(), (Vec(2) << -2.0, 2.0).finished()};
        s.dst_centers_ = {(Vec(2) << 2.0, 2.0).finished(), (Vec(2) << 2.0, -2.0).finished()};
        return s;
    }

    /// x0 from the base marginal; x1 = x0 + k Z.
    static CouplingSampler entropic_shift(MarginalSpec base, double k) {
        if (!(k >= 0.0)) throw std::invalid_argument("entropic_shift: k must be >= 0");
        CouplingSampler s;
        s.kind_ = Kind::entropic_shift;
        s.dim_ = base.dim;
        s.base_ = std::move(base);
        s.shift_k_ = k;
        return s;
    }

    /// Scalar (x0, x1) jointly Gaussian with unit variances and correlation
    /// corr_alpha: x1 = a x0 + sqrt(1-a^2) Z.
    static CouplingSampler gaussian_corr(const GaussianCouplingSpec& spec) {
        CouplingSampler s;
        s.kind_ = Kind::gaussian_corr;
        s.dim_ = 1;
        s.corr_spec_ = spec;
        return s;
    }

    static CouplingSampler independent(MarginalSpec m0, MarginalSpec m1) {
        if (m0.dim != m1.dim) throw std::invalid_argument("independent: marginal dims differ");
        CouplingSampler s;
        s.kind_ = Kind::independent;
        s.dim_ = m0.dim;
        s.base_ = std::move(m0);
        s.base1_ = std::move(m1);
        return s;
    }

    /// Draw index pairs with probability plan(i,j) and return the atoms.
    static CouplingSampler discrete_plan(DiscretePlan plan) {
        CouplingSampler s;
        s.kind_ = Kind::discrete_plan;
        s.dim_ = static_cast<int>(plan.row_points.front().size());
        const double total = plan.plan.sum();
        s.plan_cdf_.reserve(static_cast<std::size_t>(plan.plan.size()));
        double acc = 0.0;
        for (Eigen::Index i = 0; i < plan.plan.rows(); ++i)
            for (Eigen::Index j = 0; j < plan.plan.cols(); ++j) {
                acc += plan.plan(i, j) / total;
                s.plan_cdf_.push_back(acc);
            }
        s.plan_ = std::move(plan);
        return s;
    }

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    double shift_k() const { return shift_k_; }
    double comp_std() const { return comp_std_; }
    const MarginalSpec& base_marginal() const { return base_; }
    const std::vector<Vec>& source_centers() const { return src_centers_; }
    const std::vector<Vec>& target_centers() const { return dst_centers_; }

    /// Component pairing as a map from source component to target component.
    std::vector<int> pairing_map() const {
        std::vector<int> map(src_centers_.size());
        for (std::size_t i = 0; i < map.size(); ++i) map[i] = static_cast<int>(i);
        return map;
    }

    PairedBatch sample(int n, RngStream& stream) const {
        if (n < 0) throw std::invalid_argument("CouplingSampler::sample: n must be >= 0");
        PairedBatch batch;
        batch.x0s.reserve(n);
        batch.x1s.reserve(n);
        for (int i = 0; i < n; ++i) {
            auto [x0, x1] = draw(stream);
            batch.push(std::move(x0), std::move(x1));
        }
        return batch;
    }

    std::pair<Vec, Vec> draw(RngStream& stream) const {
        switch (kind_) {
            case Kind::cross_mixture: {
                const int c = stream.next_uniform() <= 0.5 ? 0 : 1;
                Vec x0 = src_centers_[c] + comp_std_ * draw_gaussian(stream, 2);
                Vec x1 = dst_centers_[c] + comp_std_ * draw_gaussian(stream, 2);
                return {std::move(x0), std::move(x1)};
            }
            case Kind::entropic_shift: {
                Vec x0 = base_.sample(stream);
                Vec x1 = x0;
                if (shift_k_ > 0.0) x1 += shift_k_ * draw_gaussian(stream, dim_);
                return {std::move(x0), std::move(x1)};
            }
            case Kind::gaussian_corr: {
                const double a = corr_spec_->corr_alpha;
                Vec x0 = draw_gaussian(stream, 1);
                Vec x1 = a * x0 + std::sqrt(1.0 - a * a) * draw_gaussian(stream, 1);
                return {std::move(x0), std::move(x1)};
            }
            case Kind::independent: {
                Vec x0 = base_.sample(stream);
                Vec x1 = base1_.sample(stream);
                return {std::move(x0), std::move(x1)};
            }
            case Kind::discrete_plan: {
                const double u = stream.next_uniform();
                const auto it = std::lower_bound(plan_cdf_.begin(), plan_cdf_.end(), u);
                std::size_t flat = static_cast<std::size_t>(it - plan_cdf_.begin());
                if (flat >= plan_cdf_.size()) flat = plan_cdf_.size() - 1;
                const Eigen::Index cols = plan_.plan.cols();
                const Eigen::Index i = static_cast<Eigen::Index>(flat) / cols;
                const Eigen::Index j = static_cast<Eigen::Index>(flat) % cols;
                return {plan_.row_points[i], plan_.col_points[j]};
            }
        }
        throw std::logic_error("CouplingSampler: unknown kind");
    }

private:
    CouplingSampler() = default;

    Kind kind_ = Kind::independent;
    int dim_ = 1;
    double comp_std_ = 0.2;
    double shift_k_ = 0.0;
    MarginalSpec base_;
    MarginalSpec base1_;
    std::optional<GaussianCouplingSpec> corr_spec_;
    std::vector<Vec> src_centers_;
    std::vector<Vec> dst_centers_;
    DiscretePlan plan_;
    std::vector<double> plan_cdf_;
};

} // namespace bm
