#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "bm/mlp.hpp"

namespace bm {

/// Serialized training artifact: the model plus the bridge scale it was
/// trained against and the seed that produced it.
struct Checkpoint {
    MlpModel model;
    double sigma = 1.0;
    std::uint64_t train_seed = 0;
};

namespace detail {

// Shortest representation that round-trips an IEEE double exactly.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline void save_checkpoint(std::ostream& os, const Checkpoint& ck) {
    const MlpModel& m = ck.model;
    os << "bm-checkpoint 1\n";
    os << "layer_dims " << m.layer_dims.size();
    for (int n : m.layer_dims) os << ' ' << n;
    os << '\n';
    os << "activation " << to_string(m.activation) << '\n';
    os << "cond_mode " << to_string(m.cond_mode) << '\n';
    os << "time_features " << m.time_features << '\n';
    os << "cond_alpha " << detail::fmt_double(m.cond_alpha) << '\n';
    os << "sigma " << detail::fmt_double(ck.sigma) << '\n';
    os << "train_seed " << ck.train_seed << '\n';
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        const Mat& w = m.weights[l];
        os << "W " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                if (c) os << ' ';
                os << detail::fmt_double(w(r, c));
            }
            os << '\n';
        }
        const Vec& b = m.biases[l];
        os << "b " << l << ' ' << b.size() << '\n';
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            if (i) os << ' ';
            os << detail::fmt_double(b[i]);
        }
        os << '\n';
    }
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    save_checkpoint(os, ck);
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(std::istream& is) {
    auto fail = [](const std::string& what) -> std::runtime_error {
        return std::runtime_error("load_checkpoint: " + what);
    };
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "bm-checkpoint" || version != 1)
        throw fail("bad header");

    Checkpoint ck;
    MlpModel& m = ck.model;
    std::string key;
    std::size_t num_dims = 0;
    if (!(is >> key >> num_dims) || key != "layer_dims" || num_dims < 2)
        throw fail("bad layer_dims");
    m.layer_dims.resize(num_dims);
    for (auto& dim : m.layer_dims)
        if (!(is >> dim)) throw fail("bad layer_dims");

    std::string value;
    if (!(is >> key >> value) || key != "activation") throw fail("bad activation");
    m.activation = activation_from_string(value);
    if (!(is >> key >> value) || key != "cond_mode") throw fail("bad cond_mode");
    m.cond_mode = cond_mode_from_string(value);
    if (!(is >> key >> m.time_features) || key != "time_features") throw fail("bad time_features");
    if (!(is >> key >> m.cond_alpha) || key != "cond_alpha") throw fail("bad cond_alpha");
    if (!(is >> key >> ck.sigma) || key != "sigma") throw fail("bad sigma");
    if (!(is >> key >> ck.train_seed) || key != "train_seed") throw fail("bad train_seed");

    const std::size_t layers = num_dims - 1;
    m.weights.resize(layers);
    m.biases.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        std::size_t idx = 0;
        Eigen::Index rows = 0, cols = 0, len = 0;
        if (!(is >> key >> idx >> rows >> cols) || key != "W" || idx != l)
            throw fail("bad weight header");
        if (rows != m.layer_dims[l + 1] || cols != m.layer_dims[l])
            throw fail("weight shape mismatch");
        m.weights[l].resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                if (!(is >> m.weights[l](r, c))) throw fail("bad weight data");
        if (!(is >> key >> idx >> len) || key != "b" || idx != l) throw fail("bad bias header");
        if (len != rows) throw fail("bias shape mismatch");
        m.biases[l].resize(len);
        for (Eigen::Index i = 0; i < len; ++i)
            if (!(is >> m.biases[l][i])) throw fail("bad bias data");
    }
    if (m.layer_dims.front() != mlp_input_dim(m.state_dim(), m.cond_mode, m.time_features))
        throw fail("input dim inconsistent with conditioning layout");
    return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    return load_checkpoint(is);
}

} // namespace bm
