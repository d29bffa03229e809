#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bm/batch.hpp"
#include "bm/rng.hpp"

namespace bm {

/// Index of the nearest center in Euclidean distance.
inline int nearest_center(const Vec& x, const std::vector<Vec>& centers) {
    if (centers.empty()) throw std::invalid_argument("nearest_center: no centers");
    int best = 0;
    double best_d = (x - centers[0]).squaredNorm();
    for (std::size_t i = 1; i < centers.size(); ++i) {
        const double d = (x - centers[i]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

/// Fraction of pairs whose target component (nearest target center) agrees
/// with pairing_map applied to the source component (nearest source center).
inline double pairing_accuracy(const PairedBatch& generated, const std::vector<Vec>& source_centers,
                               const std::vector<Vec>& target_centers,
                               const std::vector<int>& pairing_map) {
    if (generated.empty()) throw std::invalid_argument("pairing_accuracy: empty batch");
    if (source_centers.empty() || target_centers.empty())
        throw std::invalid_argument("pairing_accuracy: centers must be nonempty");
    if (pairing_map.size() != source_centers.size())
        throw std::invalid_argument("pairing_accuracy: pairing map size mismatch");
    std::vector<bool> hit(target_centers.size(), false);
    for (int m : pairing_map) {
        if (m < 0 || m >= static_cast<int>(target_centers.size()) || hit[m])
            throw std::invalid_argument("pairing_accuracy: pairing map must be a bijection");
        hit[m] = true;
    }
    std::size_t agree = 0;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        const int c0 = nearest_center(generated.x0s[i], source_centers);
        const int c1 = nearest_center(generated.x1s[i], target_centers);
        if (c1 == pairing_map[c0]) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(generated.size());
}

/// Energy distance between the empirical measures of two sample sets:
/// 2 E||A - B|| - E||A - A'|| - E||B - B'||, all means taken over all pairs
/// (V-statistic), so equal multisets give exactly zero and the value is
/// never negative beyond rounding. Arguments are ordered canonically before
/// summing, which makes the statistic exactly symmetric.
inline double energy_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("energy_distance: empty sample set");
    if (a.front().size() != b.front().size())
        throw std::invalid_argument("energy_distance: dim mismatch");

    auto lex_less = [](const std::vector<Vec>& p, const std::vector<Vec>& q) {
        if (p.size() != q.size()) return p.size() < q.size();
        for (std::size_t i = 0; i < p.size(); ++i)
            for (Eigen::Index j = 0; j < p[i].size(); ++j)
                if (p[i][j] != q[i][j]) return p[i][j] < q[i][j];
        return false;
    };
    const std::vector<Vec>& first = lex_less(b, a) ? b : a;
    const std::vector<Vec>& second = lex_less(b, a) ? a : b;

    auto mean_cross = [](const std::vector<Vec>& p, const std::vector<Vec>& q) {
        double acc = 0.0;
        for (const Vec& x : p)
            for (const Vec& y : q) acc += (x - y).norm();
        return acc / (static_cast<double>(p.size()) * static_cast<double>(q.size()));
    };
    return 2.0 * mean_cross(first, second) - (mean_cross(first, first) + mean_cross(second, second));
}

/// Unbiased cross-covariance matrix Cov(x0_i, x1_j) of a paired batch.
inline Mat empirical_cov(const PairedBatch& batch) {
    if (batch.size() < 2) throw std::invalid_argument("empirical_cov: need at least 2 samples");
    const int d = batch.dim();
    const double n = static_cast<double>(batch.size());
    Vec m0 = Vec::Zero(d), m1 = Vec::Zero(d);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        m0 += batch.x0s[i];
        m1 += batch.x1s[i];
    }
    m0 /= n;
    m1 /= n;
    Mat cov = Mat::Zero(d, d);
    for (std::size_t i = 0; i < batch.size(); ++i)
        cov += (batch.x0s[i] - m0) * (batch.x1s[i] - m1).transpose();
    return cov / (n - 1.0);
}

/// Mean squared Euclidean distance between paired entries.
inline double endpoint_mse(const std::vector<Vec>& generated, const std::vector<Vec>& reference) {
    if (generated.size() != reference.size())
        throw std::invalid_argument("endpoint_mse: length mismatch");
    if (generated.empty()) throw std::invalid_argument("endpoint_mse: empty lists");
    double acc = 0.0;
    for (std::size_t i = 0; i < generated.size(); ++i)
        acc += (generated[i] - reference[i]).squaredNorm();
    return acc / static_cast<double>(generated.size());
}

/// Flat evaluation summary of a generated coupling.
struct CouplingReport {
    std::optional<double> pairing_accuracy;
    double energy_distance_marginal = 0.0;
    std::optional<double> endpoint_mse;
    Mat empirical_cov;

    std::string to_kv_text() const {
        std::ostringstream os;
        os.precision(10);
        if (pairing_accuracy) os << "pairing_accuracy=" << *pairing_accuracy << "\n";
        os << "energy_distance_marginal=" << energy_distance_marginal << "\n";
        if (endpoint_mse) os << "endpoint_mse=" << *endpoint_mse << "\n";
        for (Eigen::Index i = 0; i < empirical_cov.rows(); ++i)
            for (Eigen::Index j = 0; j < empirical_cov.cols(); ++j)
                os << "empirical_cov_" << i << "_" << j << "=" << empirical_cov(i, j) << "\n";
        return os.str();
    }
};

} // namespace bm
