#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bm/couplings.hpp"
#include "bm/sampling.hpp"
#include "bm/training.hpp"

namespace bm {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline const json& require_field(const json& j, const std::string& ctx, const std::string& key) {
    if (!j.contains(key)) throw ConfigError(ctx + "." + key + ": missing");
    return j.at(key);
}

template <class T>
T get_req(const json& j, const std::string& ctx, const std::string& key) {
    try {
        return require_field(j, ctx, key).get<T>();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError(ctx + "." + key + ": wrong type");
    }
}

template <class T>
T get_opt(const json& j, const std::string& ctx, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const std::exception&) {
        throw ConfigError(ctx + "." + key + ": wrong type");
    }
}

} // namespace detail

inline MarginalSpec parse_marginal(const json& j, const std::string& ctx) {
    const std::string kind = detail::get_req<std::string>(j, ctx, "kind");
    if (kind == "std_normal") {
        return MarginalSpec::std_normal(detail::get_req<int>(j, ctx, "dim"));
    }
    if (kind == "gaussian_mixture") {
        const auto raw = detail::get_req<std::vector<std::vector<double>>>(j, ctx, "centers");
        std::vector<Vec> centers;
        for (const auto& c : raw) {
            Vec v(static_cast<Eigen::Index>(c.size()));
            for (std::size_t i = 0; i < c.size(); ++i) v[static_cast<Eigen::Index>(i)] = c[i];
            centers.push_back(std::move(v));
        }
        std::vector<double> weights = detail::get_opt<std::vector<double>>(
            j, ctx, "weights", std::vector<double>(centers.size(), 1.0 / centers.size()));
        const double std_dev = detail::get_req<double>(j, ctx, "std");
        try {
            return MarginalSpec::gaussian_mixture(std::move(centers), std::move(weights), std_dev);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(ctx + ": " + e.what());
        }
    }
    throw ConfigError(ctx + ".kind: unknown marginal kind '" + kind + "'");
}

inline CouplingSampler parse_dataset(const json& j, const std::string& ctx) {
    const std::string preset = detail::get_req<std::string>(j, ctx, "preset");
    try {
        if (preset == "cross_mixture")
            return CouplingSampler::cross_mixture(detail::get_opt<double>(j, ctx, "comp_std", 0.2));
        if (preset == "gaussian_corr")
            return CouplingSampler::gaussian_corr(
                GaussianCouplingSpec(detail::get_req<double>(j, ctx, "alpha"),
                                     detail::get_req<double>(j, ctx, "sigma")));
        if (preset == "entropic_shift")
            return CouplingSampler::entropic_shift(
                parse_marginal(detail::require_field(j, ctx, "base"), ctx + ".base"),
                detail::get_req<double>(j, ctx, "k"));
        if (preset == "independent")
            return CouplingSampler::independent(
                parse_marginal(detail::require_field(j, ctx, "m0"), ctx + ".m0"),
                parse_marginal(detail::require_field(j, ctx, "m1"), ctx + ".m1"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
    throw ConfigError(ctx + ".preset: unknown preset '" + preset + "'");
}

inline ModelSpec parse_model(const json& j, const std::string& ctx) {
    ModelSpec spec;
    spec.hidden_dims = detail::get_opt<std::vector<int>>(j, ctx, "hidden", spec.hidden_dims);
    spec.time_features = detail::get_opt<int>(j, ctx, "time_features", spec.time_features);
    const std::string act = detail::get_opt<std::string>(j, ctx, "activation", "silu");
    try {
        spec.activation = activation_from_string(act);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(ctx + ".activation: " + e.what());
    }
    return spec;
}

inline TrainConfig parse_train(const json& j, const std::string& ctx) {
    TrainConfig cfg;
    cfg.cond_alpha = detail::get_req<double>(j, ctx, "cond_alpha");
    cfg.steps = detail::get_req<int>(j, ctx, "steps");
    cfg.batch_size = detail::get_opt<int>(j, ctx, "batch_size", cfg.batch_size);
    cfg.sigma = detail::get_req<double>(j, ctx, "sigma");
    cfg.adam.lr = detail::get_opt<double>(j, ctx, "lr", cfg.adam.lr);
    cfg.adam.beta1 = detail::get_opt<double>(j, ctx, "beta1", cfg.adam.beta1);
    cfg.adam.beta2 = detail::get_opt<double>(j, ctx, "beta2", cfg.adam.beta2);
    cfg.adam.eps = detail::get_opt<double>(j, ctx, "eps", cfg.adam.eps);
    cfg.lambda_weighting =
        detail::get_opt<std::string>(j, ctx, "lambda_weighting", cfg.lambda_weighting);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
    return cfg;
}

struct SampleJob {
    int num_paths = 10000;
    SamplerConfig sampler;
    int trajectories = 0;              // how many full paths to write
    std::vector<double> snapshots;     // times for predicted-coupling dumps
};

inline SampleJob parse_sample(const json& j, const std::string& ctx) {
    SampleJob job;
    job.num_paths = detail::get_opt<int>(j, ctx, "num_paths", job.num_paths);
    job.sampler.num_steps = detail::get_opt<int>(j, ctx, "num_steps", job.sampler.num_steps);
    const std::string integ = detail::get_opt<std::string>(j, ctx, "integrator", "bridge_posterior");
    try {
        job.sampler.integrator = integrator_from_string(integ);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(ctx + ".integrator: " + e.what());
    }
    job.sampler.t_clamp = detail::get_opt<double>(j, ctx, "t_clamp", 0.0);
    job.trajectories = detail::get_opt<int>(j, ctx, "trajectories", 0);
    job.snapshots = detail::get_opt<std::vector<double>>(j, ctx, "snapshots", {});
    if (job.num_paths < 0) throw ConfigError(ctx + ".num_paths: must be >= 0");
    try {
        job.sampler.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
    return job;
}

struct GaussianJob {
    double sigma = 1.0;
    double grid_start = 0.05, grid_stop = 0.95, grid_step = 0.05;
};

// grid syntax: "start:stop:step", endpoints inclusive
inline void parse_alpha_grid(const std::string& s, GaussianJob& job, const std::string& ctx) {
    double a = 0, b = 0, st = 0;
    char c1 = 0, c2 = 0;
    std::istringstream is(s);
    if (!(is >> a >> c1 >> b >> c2 >> st) || c1 != ':' || c2 != ':' || !(st > 0) || b < a)
        throw ConfigError(ctx + ": bad alpha grid '" + s + "' (want start:stop:step)");
    job.grid_start = a;
    job.grid_stop = b;
    job.grid_step = st;
}

struct Experiment {
    std::string name;
    std::optional<GaussianJob> gaussian;
    std::optional<CouplingSampler> dataset;
    ModelSpec model;
    std::optional<TrainConfig> train;
    SampleJob sample;
    int eval_reference_n = 10000;
    bool loss_log = false;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::vector<Experiment> experiments;
};

inline ExperimentConfig parse_config(const json& j) {
    ExperimentConfig cfg;
    cfg.seed = detail::get_opt<std::uint64_t>(j, "config", "seed", 0);
    cfg.out_dir = detail::get_opt<std::string>(j, "config", "out_dir", "out");
    const json& exps = detail::require_field(j, "config", "experiments");
    if (!exps.is_array() || exps.empty())
        throw ConfigError("config.experiments: must be a nonempty array");
    for (std::size_t i = 0; i < exps.size(); ++i) {
        const std::string ctx = "experiments[" + std::to_string(i) + "]";
        const json& e = exps[i];
        Experiment exp;
        exp.name = detail::get_req<std::string>(e, ctx, "name");
        if (e.contains("gaussian")) {
            GaussianJob job;
            const json& g = e.at("gaussian");
            job.sigma = detail::get_req<double>(g, ctx + ".gaussian", "sigma");
            if (g.contains("alpha_grid"))
                parse_alpha_grid(g.at("alpha_grid").get<std::string>(), job,
                                 ctx + ".gaussian.alpha_grid");
            exp.gaussian = job;
        } else {
            exp.dataset = parse_dataset(detail::require_field(e, ctx, "dataset"), ctx + ".dataset");
            exp.model = parse_model(detail::get_opt<json>(e, ctx, "model", json::object()),
                                    ctx + ".model");
            if (e.contains("train")) exp.train = parse_train(e.at("train"), ctx + ".train");
            if (e.contains("sample"))
                exp.sample = parse_sample(e.at("sample"), ctx + ".sample");
            if (e.contains("eval"))
                exp.eval_reference_n =
                    detail::get_opt<int>(e.at("eval"), ctx + ".eval", "reference_n", 10000);
            if (e.contains("train"))
                exp.loss_log = detail::get_opt<bool>(e.at("train"), ctx + ".train", "loss_log",
                                                     false);
        }
        cfg.experiments.push_back(std::move(exp));
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

// stable label for per-experiment stream splitting (FNV-1a)
inline std::uint64_t experiment_label(const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace bm
