#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bm/checkpoint.hpp"
#include "bm/config.hpp"
#include "bm/csv.hpp"
#include "bm/metrics.hpp"
#include "bm/svg.hpp"

namespace bm::cli {

// process exit contract: 0 ok, 2 usage/config, 3 numerical abort
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

namespace detail {

// pipeline stage labels under the per-experiment stream
constexpr std::uint64_t kStageTrain = 0;
constexpr std::uint64_t kStageDrawX0 = 1;
constexpr std::uint64_t kStagePaths = 2;
constexpr std::uint64_t kStageEvalRef = 3;

struct CommonArgs {
    std::string config_path;
    std::string only_exp;
    std::optional<std::uint64_t> seed;
    std::string out_dir_override;
};

inline RngStream experiment_stream(const ExperimentConfig& cfg, const CommonArgs& args,
                                   const Experiment& exp) {
    const std::uint64_t seed = args.seed ? *args.seed : cfg.seed;
    return RngStream(seed).split(experiment_label(exp.name));
}

inline std::string out_dir(const ExperimentConfig& cfg, const CommonArgs& args) {
    return args.out_dir_override.empty() ? cfg.out_dir : args.out_dir_override;
}

inline std::string exp_dir(const ExperimentConfig& cfg, const CommonArgs& args,
                           const Experiment& exp) {
    return out_dir(cfg, args) + "/" + exp.name;
}

inline std::vector<const Experiment*> select(const ExperimentConfig& cfg, const CommonArgs& args) {
    std::vector<const Experiment*> out;
    for (const auto& e : cfg.experiments)
        if (args.only_exp.empty() || e.name == args.only_exp) out.push_back(&e);
    if (out.empty())
        throw ConfigError(args.only_exp.empty() ? "config has no experiments"
                                                : "no experiment named '" + args.only_exp + "'");
    return out;
}

inline void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

} // namespace detail

inline int cmd_train(const detail::CommonArgs& args, const std::string& loss_log_override) {
    const ExperimentConfig cfg = load_config(args.config_path);
    const auto selected = detail::select(cfg, args);
    if (!loss_log_override.empty() && selected.size() != 1)
        throw ConfigError("--loss-log needs a single selected experiment");

    for (const Experiment* exp : selected) {
        if (exp->gaussian) continue;
        if (!exp->train) throw ConfigError("experiment '" + exp->name + "' has no train section");
        RngStream stream = detail::experiment_stream(cfg, args, *exp);
        RngStream train_stream = stream.split(detail::kStageTrain);

        TrainResult result = bm::train(*exp->dataset, exp->model, *exp->train, train_stream);

        const std::string dir = detail::exp_dir(cfg, args, *exp);
        detail::ensure_dir(dir);
        Checkpoint ck;
        ck.model = std::move(result.model);
        ck.sigma = exp->train->sigma;
        ck.train_seed = args.seed ? *args.seed : cfg.seed;
        save_checkpoint(dir + "/checkpoint.txt", ck);

        if (exp->loss_log || !loss_log_override.empty()) {
            const std::string path =
                loss_log_override.empty() ? dir + "/loss.csv" : loss_log_override;
            std::ofstream os(path);
            if (!os) throw std::runtime_error("cannot open " + path);
            write_loss_log_csv(os, result.loss_log);
        }
        double final_loss =
            result.loss_log.empty() ? 0.0 : result.loss_log.back().second;
        std::cout << "trained " << exp->name << ": steps=" << exp->train->steps
                  << " final_loss=" << final_loss << " -> " << dir << "/checkpoint.txt\n";
    }
    return kExitOk;
}

struct SampleOverrides {
    std::string checkpoint;
    std::string snapshots;  // comma-separated times
    int num_paths = -1;
    int num_steps = -1;
    std::string integrator;
};

inline int cmd_sample(const detail::CommonArgs& args, const SampleOverrides& ov) {
    const ExperimentConfig cfg = load_config(args.config_path);
    const auto selected = detail::select(cfg, args);
    if (!ov.checkpoint.empty() && selected.size() != 1)
        throw ConfigError("--checkpoint needs a single selected experiment");

    for (const Experiment* exp : selected) {
        if (exp->gaussian) continue;
        const std::string dir = detail::exp_dir(cfg, args, *exp);
        const std::string ck_path =
            ov.checkpoint.empty() ? dir + "/checkpoint.txt" : ov.checkpoint;
        Checkpoint ck = load_checkpoint(ck_path);
        if (exp->dataset->dim() != ck.model.state_dim())
            throw ConfigError("experiment '" + exp->name +
                              "': dataset dim does not match checkpoint");

        SampleJob job = exp->sample;
        if (ov.num_paths >= 0) job.num_paths = ov.num_paths;
        if (ov.num_steps > 0) job.sampler.num_steps = ov.num_steps;
        if (!ov.integrator.empty()) job.sampler.integrator = integrator_from_string(ov.integrator);
        if (!ov.snapshots.empty()) {
            job.snapshots.clear();
            std::istringstream is(ov.snapshots);
            std::string tok;
            while (std::getline(is, tok, ',')) job.snapshots.push_back(std::stod(tok));
        }
        job.sampler.validate();

        RngStream stream = detail::experiment_stream(cfg, args, *exp);
        RngStream x0_stream = stream.split(detail::kStageDrawX0);
        RngStream path_root = stream.split(detail::kStagePaths);
        PairedBatch draws = exp->dataset->sample(job.num_paths, x0_stream);
        const BridgeSpec spec(ck.sigma, ck.model.state_dim());
        const int d = ck.model.state_dim();
        const int N = job.sampler.num_steps;

        std::vector<std::size_t> snap_idx;
        for (double t : job.snapshots) {
            const long idx = std::lround(t * N);
            if (idx < 0 || idx > N)
                throw ConfigError("snapshot time " + std::to_string(t) + " outside [0,1]");
            snap_idx.push_back(static_cast<std::size_t>(idx));
        }

        PairedBatch endpoints;
        std::vector<Trajectory> kept;
        std::vector<std::vector<Vec>> snaps(snap_idx.size());
        for (int p = 0; p < job.num_paths; ++p) {
            RngStream ps = path_root.split(static_cast<std::uint64_t>(p));
            Trajectory traj = integrate_path(ck.model, spec, job.sampler, draws.x0s[p], ps);
            endpoints.push(draws.x0s[p], traj.states.back());
            for (std::size_t k = 0; k < snap_idx.size(); ++k)
                snaps[k].push_back(traj.endpoint_preds[snap_idx[k]]);
            if (p < job.trajectories) kept.push_back(std::move(traj));
        }

        detail::ensure_dir(dir);
        {
            std::ofstream os(dir + "/endpoints.csv");
            write_endpoints_csv(os, endpoints);
        }
        if (!kept.empty()) {
            std::ofstream os(dir + "/trajectories.csv");
            write_trajectories_csv(os, kept, d);
        }
        for (std::size_t k = 0; k < snap_idx.size(); ++k) {
            char name[64];
            std::snprintf(name, sizeof(name), "snapshot_%g.csv", job.snapshots[k]);
            std::ofstream os(dir + "/" + name);
            os << "path_id";
            for (int j = 0; j < d; ++j) os << ",pred_" << j;
            os << '\n';
            for (std::size_t p = 0; p < snaps[k].size(); ++p) {
                os << p;
                for (int j = 0; j < d; ++j)
                    os << ',' << bm::detail::fmt_double(snaps[k][p][j]);
                os << '\n';
            }
        }
        std::cout << "sampled " << exp->name << ": paths=" << job.num_paths << " steps=" << N
                  << " -> " << dir << "/endpoints.csv\n";
    }
    return kExitOk;
}

/// Build the evaluation report for a generated coupling against its dataset.
inline CouplingReport evaluate_against(const CouplingSampler& dataset, const PairedBatch& gen,
                                       int reference_n, RngStream& ref_stream) {
    CouplingReport rep;
    PairedBatch ref = dataset.sample(reference_n, ref_stream);
    rep.energy_distance_marginal = energy_distance(gen.x1s, ref.x1s);
    rep.empirical_cov = empirical_cov(gen);

    using Kind = CouplingSampler::Kind;
    if (dataset.kind() == Kind::cross_mixture) {
        rep.pairing_accuracy = pairing_accuracy(gen, dataset.source_centers(),
                                                dataset.target_centers(), dataset.pairing_map());
    } else if (dataset.kind() == Kind::entropic_shift &&
               dataset.base_marginal().kind == MarginalSpec::Kind::gaussian_mixture) {
        const auto& centers = dataset.base_marginal().centers;
        std::vector<int> identity(centers.size());
        for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);
        rep.pairing_accuracy = pairing_accuracy(gen, centers, centers, identity);
    }
    if (dataset.kind() == Kind::entropic_shift && dataset.shift_k() == 0.0)
        rep.endpoint_mse = endpoint_mse(gen.x1s, gen.x0s);  // identity coupling ground truth
    return rep;
}

inline int cmd_eval(const detail::CommonArgs& args, const std::string& endpoints_override,
                    const std::string& csv_out) {
    const ExperimentConfig cfg = load_config(args.config_path);
    const auto selected = detail::select(cfg, args);
    if (!endpoints_override.empty() && selected.size() != 1)
        throw ConfigError("--endpoints needs a single selected experiment");

    for (const Experiment* exp : selected) {
        if (exp->gaussian) continue;
        const std::string dir = detail::exp_dir(cfg, args, *exp);
        const std::string path =
            endpoints_override.empty() ? dir + "/endpoints.csv" : endpoints_override;
        PairedBatch gen = read_endpoints_csv_file(path);
        if (gen.empty()) throw ConfigError("no endpoint rows in " + path);
        if (gen.dim() != exp->dataset->dim())
            throw ConfigError("endpoint dim does not match dataset for '" + exp->name + "'");

        RngStream stream = detail::experiment_stream(cfg, args, *exp);
        RngStream ref_stream = stream.split(detail::kStageEvalRef);
        CouplingReport rep =
            evaluate_against(*exp->dataset, gen, exp->eval_reference_n, ref_stream);

        const std::string text = rep.to_kv_text();
        std::cout << "=== " << exp->name << " ===\n" << text;
        detail::ensure_dir(dir);
        write_text_file(dir + "/report.txt", text);
        if (!csv_out.empty()) {
            std::string csv = "key,value\n";
            std::istringstream is(text);
            std::string line;
            while (std::getline(is, line)) {
                const auto eq = line.find('=');
                if (eq != std::string::npos)
                    csv += line.substr(0, eq) + "," + line.substr(eq + 1) + "\n";
            }
            write_text_file(csv_out, csv);
        }
    }
    return kExitOk;
}

inline void write_falpha_csv(std::ostream& os, const GaussianJob& job) {
    const double astar = alpha_star(job.sigma);
    os << "alpha,f_alpha,alpha_star\n";
    for (double a = job.grid_start; a <= job.grid_stop + 1e-12; a += job.grid_step) {
        os << bm::detail::fmt_double(a) << ',' << bm::detail::fmt_double(f_alpha(a, job.sigma))
           << ',' << bm::detail::fmt_double(astar) << '\n';
    }
}

inline int cmd_gaussian(const detail::CommonArgs& args, const GaussianJob& direct,
                        bool have_direct, const std::string& out_path) {
    if (have_direct) {
        if (out_path.empty()) throw ConfigError("gaussian: --out is required with --sigma");
        std::ofstream os(out_path);
        if (!os) throw std::runtime_error("cannot open " + out_path);
        write_falpha_csv(os, direct);
        std::cout << "wrote " << out_path << "\n";
        return kExitOk;
    }
    const ExperimentConfig cfg = load_config(args.config_path);
    for (const Experiment* exp : detail::select(cfg, args)) {
        if (!exp->gaussian) continue;
        const std::string dir = detail::exp_dir(cfg, args, *exp);
        detail::ensure_dir(dir);
        std::ofstream os(dir + "/falpha.csv");
        write_falpha_csv(os, *exp->gaussian);
        std::cout << "wrote " << dir << "/falpha.csv\n";
    }
    return kExitOk;
}

namespace detail {

inline const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

// trajectory CSV -> per-path polyline of states
inline std::vector<std::vector<Vec>> read_trajectory_polylines(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw CsvError("missing header", 0);
    const auto header = bm::detail::split_csv_line(line);
    int d = 0;
    for (const auto& h : header)
        if (h.rfind("x_", 0) == 0) ++d;
    if (d == 0) throw CsvError("no state columns", 0);
    std::vector<std::vector<Vec>> out;
    int row = 0;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        const auto f = bm::detail::split_csv_line(line);
        if (f.size() < static_cast<std::size_t>(3 + d)) throw CsvError("bad field count", row);
        try {
            const auto pid = static_cast<std::size_t>(std::stoul(f[0]));
            if (pid >= out.size()) out.resize(pid + 1);
            Vec x(d);
            for (int j = 0; j < d; ++j) x[j] = std::stod(f[3 + j]);
            out[pid].push_back(std::move(x));
        } catch (const CsvError&) {
            throw;
        } catch (const std::exception&) {
            throw CsvError("bad numeric field", row);
        }
    }
    return out;
}

} // namespace detail

struct PlotArgs {
    std::string points_csv;
    std::string traj_csv;
    std::string out_svg;
};

inline int cmd_plot(const detail::CommonArgs& args, const PlotArgs& plot) {
    // target centers for coloring, when a dataset with components is given
    std::vector<Vec> centers;
    if (!args.config_path.empty()) {
        const ExperimentConfig cfg = load_config(args.config_path);
        const auto selected = detail::select(cfg, args);
        const Experiment* exp = selected.front();
        if (exp->dataset) {
            if (exp->dataset->kind() == CouplingSampler::Kind::cross_mixture)
                centers = exp->dataset->target_centers();
            else if (exp->dataset->kind() == CouplingSampler::Kind::entropic_shift &&
                     exp->dataset->base_marginal().kind == MarginalSpec::Kind::gaussian_mixture)
                centers = exp->dataset->base_marginal().centers;
        }
    }

    PairedBatch pts = read_endpoints_csv_file(plot.points_csv);
    if (!pts.empty() && pts.dim() != 2)
        throw ConfigError("plot: points must be 2-D, got dim " + std::to_string(pts.dim()));

    std::vector<SvgPointSet> sets;
    SvgPointSet sources;
    sources.color = "#bbbbbb";
    sources.radius = 1.6;
    const std::size_t ncolors = centers.empty() ? 1 : centers.size();
    std::vector<SvgPointSet> by_comp(ncolors);
    for (std::size_t c = 0; c < ncolors; ++c)
        by_comp[c].color = detail::kPalette[c % 8];
    for (std::size_t i = 0; i < pts.size(); ++i) {
        sources.points.push_back(pts.x0s[i]);
        const std::size_t c = centers.empty()
                                  ? 0
                                  : static_cast<std::size_t>(nearest_center(pts.x1s[i], centers));
        by_comp[c].points.push_back(pts.x1s[i]);
    }
    sets.push_back(std::move(sources));
    for (auto& s : by_comp) sets.push_back(std::move(s));

    std::vector<SvgPolyline> lines;
    if (!plot.traj_csv.empty()) {
        for (auto& poly : detail::read_trajectory_polylines(plot.traj_csv)) {
            SvgPolyline l;
            const std::size_t c =
                centers.empty() || poly.empty()
                    ? 0
                    : static_cast<std::size_t>(nearest_center(poly.back(), centers));
            l.color = detail::kPalette[c % 8];
            l.points = std::move(poly);
            lines.push_back(std::move(l));
        }
    }

    write_text_file(plot.out_svg, render_svg(sets, lines));
    std::cout << "wrote " << plot.out_svg << "\n";
    return kExitOk;
}

/// Full command-line surface; returns the process exit code.
inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"bridge matching toolkit"};
    app.require_subcommand(1);

    detail::CommonArgs common;
    std::uint64_t seed_val = 0;
    std::vector<CLI::Option*> seed_opts;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", common.config_path, "experiment config (json)");
        if (config_required) c->required();
        sub->add_option("--exp", common.only_exp, "run only the named experiment");
        seed_opts.push_back(sub->add_option("--seed", seed_val, "root seed override"));
        sub->add_option("--out-dir", common.out_dir_override, "output directory override");
    };

    auto* t = app.add_subcommand("train", "train endpoint predictors");
    std::string loss_log_path;
    add_common(t, true);
    t->add_option("--loss-log", loss_log_path, "loss log csv path (single experiment)");

    auto* s = app.add_subcommand("sample", "integrate paths from trained checkpoints");
    SampleOverrides sov;
    add_common(s, true);
    s->add_option("--checkpoint", sov.checkpoint, "checkpoint path override");
    s->add_option("--snapshots", sov.snapshots, "comma-separated prediction snapshot times");
    s->add_option("--num-paths", sov.num_paths, "number of paths");
    s->add_option("--num-steps", sov.num_steps, "grid steps");
    s->add_option("--integrator", sov.integrator, "euler_maruyama|bridge_posterior");

    auto* e = app.add_subcommand("eval", "evaluate generated endpoint couplings");
    std::string endpoints_override, eval_csv;
    add_common(e, true);
    e->add_option("--endpoints", endpoints_override, "endpoints csv override");
    e->add_option("--csv", eval_csv, "also write the report as key,value csv");

    auto* g = app.add_subcommand("gaussian", "closed-form projected-correlation table");
    GaussianJob gjob;
    std::string gaussian_out, grid_text;
    add_common(g, false);
    auto* sigma_opt = g->add_option("--sigma", gjob.sigma, "diffusion scale");
    g->add_option("--alpha-grid", grid_text, "start:stop:step (inclusive)");
    g->add_option("--out", gaussian_out, "output csv");

    auto* p = app.add_subcommand("plot", "render endpoint/trajectory csv to svg");
    PlotArgs plot;
    add_common(p, false);
    p->add_option("--points", plot.points_csv, "endpoints csv")->required();
    p->add_option("--traj", plot.traj_csv, "trajectories csv");
    p->add_option("--out", plot.out_svg, "output svg")->required();

    std::vector<const char*> argv;
    argv.push_back("bm");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& help) {
        return app.exit(help);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return kExitUsage;
    }

    for (const CLI::Option* opt : seed_opts)
        if (opt->count() > 0) common.seed = seed_val;

    try {
        if (t->parsed()) return cmd_train(common, loss_log_path);
        if (s->parsed()) return cmd_sample(common, sov);
        if (e->parsed()) return cmd_eval(common, endpoints_override, eval_csv);
        if (g->parsed()) {
            if (!grid_text.empty()) parse_alpha_grid(grid_text, gjob, "--alpha-grid");
            const bool have_sigma = sigma_opt->count() > 0;
            if (!have_sigma && common.config_path.empty())
                throw ConfigError("gaussian: need --sigma or --config");
            return cmd_gaussian(common, gjob, have_sigma, gaussian_out);
        }
        if (p->parsed()) return cmd_plot(common, plot);
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kExitUsage;
    } catch (const CsvError& err) {
        std::cerr << "csv error: " << err.what() << "\n";
        return kExitUsage;
    } catch (const TrainingAbort& err) {
        std::cerr << err.what() << "\n";
        return kExitNumeric;
    } catch (const SamplingAbort& err) {
        std::cerr << err.what() << "\n";
        return kExitNumeric;
    } catch (const SinkhornError& err) {
        std::cerr << err.what() << "\n";
        return kExitNumeric;
    } catch (const QuadratureError& err) {
        std::cerr << err.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& err) {
        std::cerr << "invalid argument: " << err.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace bm::cli
