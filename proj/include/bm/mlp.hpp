#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bm/rng.hpp"

namespace bm {

enum class Activation { tanh, relu, silu };
enum class CondMode { none, initial_point, alpha_point };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::silu: return "silu";
    }
    throw std::logic_error("unknown activation");
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    if (s == "silu") return Activation::silu;
    throw std::invalid_argument("unknown activation: " + s);
}

inline std::string to_string(CondMode m) {
    switch (m) {
        case CondMode::none: return "none";
        case CondMode::initial_point: return "initial_point";
        case CondMode::alpha_point: return "alpha_point";
    }
    throw std::logic_error("unknown cond mode");
}

inline CondMode cond_mode_from_string(const std::string& s) {
    if (s == "none") return CondMode::none;
    if (s == "initial_point") return CondMode::initial_point;
    if (s == "alpha_point") return CondMode::alpha_point;
    throw std::invalid_argument("unknown cond_mode: " + s);
}

/// Dense endpoint predictor. Input layout is [x_t | cond | t-features] where
/// cond is present unless cond_mode == none, and the time features are
/// [t, sin(2 pi k t), cos(2 pi k t)] for k = 1..time_features.
///
/// cond_alpha records the conditioning level the model was trained with; the
/// sampler uses it to locate the conditioning point when cond_mode ==
/// alpha_point (0 pins it to the initial state, 1 to the current state).
struct MlpModel {
    std::vector<int> layer_dims;  // [n0, n1, ..., nL]; nL = state dim
    Activation activation = Activation::silu;
    CondMode cond_mode = CondMode::none;
    int time_features = 4;
    double cond_alpha = 1.0;
    std::vector<Mat> weights;     // W_l: n_l x n_{l-1}
    std::vector<Vec> biases;      // b_l: n_l

    int state_dim() const { return layer_dims.back(); }
    int cond_dim() const { return cond_mode == CondMode::none ? 0 : state_dim(); }
    int input_dim() const { return layer_dims.front(); }
    int num_layers() const { return static_cast<int>(layer_dims.size()) - 1; }
};

/// Input width implied by state dim d, conditioning mode and time features.
inline int mlp_input_dim(int d, CondMode mode, int time_features) {
    return d + (mode == CondMode::none ? 0 : d) + 1 + 2 * time_features;
}

/// Weights ~ U(-a, a) with a = 1/sqrt(fan_in) (per-entry std a/sqrt(3));
/// biases zero.
inline MlpModel mlp_init(const std::vector<int>& layer_dims, Activation activation,
                         CondMode cond_mode, int time_features, RngStream& stream) {
    if (layer_dims.size() < 2)
        throw std::invalid_argument("mlp_init: need at least input and output dims");
    for (int n : layer_dims)
        if (n < 1) throw std::invalid_argument("mlp_init: layer dims must be positive");
    if (time_features < 0) throw std::invalid_argument("mlp_init: time_features must be >= 0");
    const int d = layer_dims.back();
    if (layer_dims.front() != mlp_input_dim(d, cond_mode, time_features))
        throw std::invalid_argument("mlp_init: input dim inconsistent with conditioning layout");

    MlpModel m;
    m.layer_dims = layer_dims;
    m.activation = activation;
    m.cond_mode = cond_mode;
    m.time_features = time_features;
    for (std::size_t l = 1; l < layer_dims.size(); ++l) {
        const int rows = layer_dims[l];
        const int cols = layer_dims[l - 1];
        const double a = 1.0 / std::sqrt(static_cast<double>(cols));
        Mat w(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) w(r, c) = (2.0 * stream.next_uniform() - 1.0) * a;
        m.weights.push_back(std::move(w));
        m.biases.push_back(Vec::Zero(rows));
    }
    return m;
}

namespace detail {

inline void apply_activation(Activation act, Mat& z) {
    switch (act) {
        case Activation::tanh:
            z = z.array().tanh();
            break;
        case Activation::relu:
            z = z.array().max(0.0);
            break;
        case Activation::silu:
            z = z.array() / (1.0 + (-z.array()).exp());
            break;
    }
}

// Derivative as a function of the pre-activation.
inline Mat activation_grad(Activation act, const Mat& z) {
    switch (act) {
        case Activation::tanh: {
            Mat th = z.array().tanh();
            return 1.0 - th.array().square();
        }
        case Activation::relu:
            return (z.array() > 0.0).cast<double>();
        case Activation::silu: {
            Mat sig = 1.0 / (1.0 + (-z.array()).exp());
            return sig.array() * (1.0 + z.array() * (1.0 - sig.array()));
        }
    }
    throw std::logic_error("unknown activation");
}

} // namespace detail

inline Vec time_feature_vec(double t, int features) {
    Vec f(1 + 2 * features);
    f[0] = t;
    for (int k = 1; k <= features; ++k) {
        f[2 * k - 1] = std::sin(2.0 * M_PI * k * t);
        f[2 * k] = std::cos(2.0 * M_PI * k * t);
    }
    return f;
}

/// [x_t | cond | t-features] column for the given model.
inline Vec assemble_input(const MlpModel& model, const Vec& x_t, const Vec* cond, double t) {
    const int d = model.state_dim();
    if (x_t.size() != d) throw std::invalid_argument("assemble_input: state dim mismatch");
    const bool wants_cond = model.cond_mode != CondMode::none;
    if (wants_cond && cond == nullptr)
        throw std::invalid_argument("assemble_input: conditioning vector required");
    if (!wants_cond && cond != nullptr)
        throw std::invalid_argument("assemble_input: unexpected conditioning vector");
    if (wants_cond && cond->size() != d)
        throw std::invalid_argument("assemble_input: conditioning dim mismatch");

    Vec in(model.input_dim());
    in.head(d) = x_t;
    if (wants_cond) in.segment(d, d) = *cond;
    in.tail(1 + 2 * model.time_features) = time_feature_vec(t, model.time_features);
    return in;
}

/// Forward pass on a batch of pre-assembled inputs (n0 x B) -> (d x B).
inline Mat mlp_forward(const MlpModel& model, const Mat& inputs) {
    if (inputs.rows() != model.input_dim())
        throw std::invalid_argument("mlp_forward: input dim mismatch");
    Mat a = inputs;
    const int L = model.num_layers();
    for (int l = 0; l < L; ++l) {
        Mat z = model.weights[l] * a;
        z.colwise() += model.biases[l];
        if (l + 1 < L) detail::apply_activation(model.activation, z);
        a = std::move(z);
    }
    return a;
}

inline Vec mlp_predict(const MlpModel& model, const Vec& x_t, const Vec* cond, double t) {
    return mlp_forward(model, assemble_input(model, x_t, cond, t));
}

struct MlpGrads {
    std::vector<Mat> w;
    std::vector<Vec> b;
};

/// Weighted squared-error loss over a batch of assembled inputs:
/// mean_i lambda_i ||f(in_i) - y_i||^2, with exact reverse-mode gradients.
inline std::pair<double, MlpGrads> mlp_loss_grad(const MlpModel& model, const Mat& inputs,
                                                 const Mat& targets, const Vec& lambda) {
    const Eigen::Index batch = inputs.cols();
    if (batch == 0) throw std::invalid_argument("mlp_loss_grad: empty batch");
    if (inputs.rows() != model.input_dim())
        throw std::invalid_argument("mlp_loss_grad: input dim mismatch");
    if (targets.rows() != model.state_dim() || targets.cols() != batch)
        throw std::invalid_argument("mlp_loss_grad: target shape mismatch");
    if (lambda.size() != batch) throw std::invalid_argument("mlp_loss_grad: lambda size mismatch");

    const int L = model.num_layers();
    std::vector<Mat> acts(L + 1);   // acts[0] = inputs, acts[l] = post-activation of layer l
    std::vector<Mat> pre(L);        // pre-activations
    acts[0] = inputs;
    for (int l = 0; l < L; ++l) {
        pre[l] = model.weights[l] * acts[l];
        pre[l].colwise() += model.biases[l];
        acts[l + 1] = pre[l];
        if (l + 1 < L) detail::apply_activation(model.activation, acts[l + 1]);
    }

    const Mat resid = acts[L] - targets;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i)
        loss += lambda[i] * resid.col(i).squaredNorm();
    loss /= static_cast<double>(batch);

    MlpGrads grads;
    grads.w.resize(L);
    grads.b.resize(L);
    Mat delta = resid;  // d loss / d output, scaled below
    for (Eigen::Index i = 0; i < batch; ++i)
        delta.col(i) *= 2.0 * lambda[i] / static_cast<double>(batch);
    for (int l = L - 1; l >= 0; --l) {
        grads.w[l] = delta * acts[l].transpose();
        grads.b[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = (model.weights[l].transpose() * delta).cwiseProduct(
                detail::activation_grad(model.activation, pre[l - 1]));
        }
    }
    return {loss, std::move(grads)};
}

struct AdamParams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamParams params;
    long step_count = 0;
    std::vector<Mat> m_w, v_w;
    std::vector<Vec> m_b, v_b;
};

inline AdamState adam_init(const MlpModel& model, const AdamParams& params = {}) {
    AdamState s;
    s.params = params;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        s.m_w.push_back(Mat::Zero(model.weights[l].rows(), model.weights[l].cols()));
        s.v_w.push_back(Mat::Zero(model.weights[l].rows(), model.weights[l].cols()));
        s.m_b.push_back(Vec::Zero(model.biases[l].size()));
        s.v_b.push_back(Vec::Zero(model.biases[l].size()));
    }
    return s;
}

/// Bias-corrected Adam update, applied in place.
inline void adam_step(MlpModel& model, AdamState& state, const MlpGrads& grads) {
    if (grads.w.size() != model.weights.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    const AdamParams& p = state.params;
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.step_count));
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        state.m_w[l] = p.beta1 * state.m_w[l] + (1.0 - p.beta1) * grads.w[l];
        state.v_w[l] = p.beta2 * state.v_w[l].array() + (1.0 - p.beta2) * grads.w[l].array().square();
        const Mat mhat = state.m_w[l] / bc1;
        const Mat vhat = state.v_w[l] / bc2;
        model.weights[l].array() -= p.lr * mhat.array() / (vhat.array().sqrt() + p.eps);

        state.m_b[l] = p.beta1 * state.m_b[l] + (1.0 - p.beta1) * grads.b[l];
        state.v_b[l] = p.beta2 * state.v_b[l].array() + (1.0 - p.beta2) * grads.b[l].array().square();
        const Vec mbh = state.m_b[l] / bc1;
        const Vec vbh = state.v_b[l] / bc2;
        model.biases[l].array() -= p.lr * mbh.array() / (vbh.array().sqrt() + p.eps);
    }
}

} // namespace bm
