#pragma once

#include <chrono>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "sgmcmc/config.hpp"
#include "sgmcmc/diagnostics.hpp"
#include "sgmcmc/experiment_common.hpp"
#include "sgmcmc/fokker_planck.hpp"
#include "sgmcmc/lda_experiment.hpp"
#include "sgmcmc/targets.hpp"
#include "sgmcmc/verify_suite.hpp"

namespace sgmcmc {

// ---------------------------------------------------------------------------
// Shared experiment plumbing
// ---------------------------------------------------------------------------

struct MetricsRow {
    std::string preset;
    std::string target;
    int chain = 0;
    long long n_steps = 0;
    double kl = 0.0;
    double autocorr_time = 0.0;
    double runtime_s = 0.0;
};

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open metrics file for writing: " + path);
    out << "preset,target,chain,n_steps,kl,autocorr_time,runtime_s\n";
    for (const MetricsRow& r : rows)
        out << r.preset << "," << r.target << "," << r.chain << "," << r.n_steps << ","
            << format_double(r.kl) << "," << format_double(r.autocorr_time) << ","
            << format_double(r.runtime_s) << "\n";
}

namespace detail {

struct SyntheticSampler {
    bool is_raw = false;
    SamplerSetup setup;
    RawUpdater raw;
    BlockLayout layout;
    std::string name;
};

// Builds any of the synthetic-experiment samplers from config defaults. The
// potential-level metric is anchored at the target's minimum so that the
// offset keeps u + c positive the way it is meant to.
inline SyntheticSampler make_synthetic_sampler(const std::string& name,
                                               const EnergyModel& target, const ConfigMap& cfg,
                                               double potential_min = 0.0) {
    const std::string prefix = "preset." + name;
    const double metric_scale = cfg.get_double("metric.scale", 1.5);
    const double metric_offset = cfg.get_double("metric.offset", 0.5) - potential_min;
    const double noise_v = cfg.get_double("run.gradient_noise_v", 1.0);

    SyntheticSampler out;
    out.name = name;
    PresetConfig pc;
    if (cfg.has(prefix + ".resample_period"))
        pc.resample_period = cfg.get_int(prefix + ".resample_period", 50);

    auto compensation_from = [&](Eigen::Index theta_dim) -> std::optional<NoiseCompensation> {
        std::string comp = cfg.get_string(prefix + ".compensation", "none");
        if (comp == "none") return std::nullopt;
        if (comp == "constant")
            return NoiseCompensation::constant_diagonal(Vector::Constant(theta_dim, noise_v));
        throw config_error(prefix + ".compensation: expected none or constant");
    };

    const Eigen::Index d = target.layout().theta_dim();
    if (name == "sgld") {
        pc.schedule = schedule_from_config(cfg, prefix, 0.01);
        pc.diffusion_diag = Vector::Constant(d, cfg.get_double(prefix + ".diffusion", 1.0));
        pc.compensation = compensation_from(d);
        out.setup = make_sgld(pc, target);
    } else if (name == "sghmc") {
        pc.schedule = schedule_from_config(cfg, prefix, 0.02);
        pc.friction_diag = Vector::Constant(d, cfg.get_double(prefix + ".friction", 1.0));
        pc.compensation = compensation_from(d);
        out.setup = make_sghmc(pc, target);
    } else if (name == "sgnht") {
        pc.schedule = schedule_from_config(cfg, prefix, 0.05);
        pc.thermostat_a = cfg.get_double(prefix + ".thermostat", 1.0);
        pc.compensation = compensation_from(d);
        out.setup = make_sgnht(pc, target);
    } else if (name == "gsgrhmc") {
        pc.schedule = schedule_from_config(cfg, prefix, 0.01);
        pc.metric = level_metric_for(target, metric_scale, metric_offset);
        pc.compensation = compensation_from(d);
        out.setup = make_gsgrhmc(pc, target);
    } else if (name == "naive-sgrhmc") {
        pc.schedule = schedule_from_config(cfg, prefix, 0.01);
        pc.metric = level_metric_for(target, metric_scale, metric_offset);
        out.is_raw = true;
        out.raw = make_naive_sgrhmc(pc, target);
    } else if (name == "naive-sghmc") {
        pc.schedule = schedule_from_config(cfg, prefix, 0.05);
        pc.gradient_noise_v = noise_v;
        out.is_raw = true;
        out.raw = make_naive_sghmc(pc, target);
    } else {
        throw config_error("unknown preset: " + name);
    }
    out.layout = out.is_raw ? out.raw.model.layout() : out.setup.spec.model.layout();
    return out;
}

inline Trace run_synthetic_chain(const SyntheticSampler& sampler, const EnergyModel& target,
                                 const ConfigMap& cfg, std::uint64_t seed, long long n_steps) {
    const double noise_v = cfg.get_double("run.gradient_noise_v", 1.0);
    GradientEstimator est = make_injected_noise_estimator(target, noise_v);
    ChainOptions opts;
    opts.n_steps = n_steps;
    opts.seed = seed;
    StateVector init(sampler.layout);  // zeros
    return sampler.is_raw ? run_chain(sampler.raw, est, init, opts)
                          : run_chain(sampler.setup, est, init, opts);
}

inline void persist_trace(const Trace& trace, const std::string& out_dir,
                          const std::string& stem, long long stride,
                          const std::string& config_echo) {
    Trace thinned;
    thinned.preset = trace.preset;
    thinned.seed = trace.seed;
    thinned.theta_dim = trace.theta_dim;
    thinned.diverged = trace.diverged;
    thinned.divergence_step = trace.divergence_step;
    for (std::size_t k = 0; k < trace.size(); k += static_cast<std::size_t>(stride)) {
        thinned.steps.push_back(trace.steps[k]);
        thinned.epsilons.push_back(trace.epsilons[k]);
        thinned.theta.push_back(trace.theta[k]);
    }
    const std::filesystem::path base = std::filesystem::path(out_dir) / stem;
    write_trace_csv(thinned, base.string() + ".csv");
    write_trace_meta(thinned, base.string() + ".meta", config_echo);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Synthetic experiments
// ---------------------------------------------------------------------------

struct SyntheticResult {
    std::vector<MetricsRow> metrics;
    bool any_divergence = false;

    struct Moment {
        std::string preset;
        int chain = 0;
        Vector mean;
        Vector se;
    };
    std::vector<Moment> moments;  // 2-D experiment only
    Vector target_mean;           // 2-D experiment only
};

// One-peak and two-peaks targets, three chains per preset, KL of the sample
// histogram against the normalized target plus integrated autocorrelation
// time per chain.
inline SyntheticResult run_synthetic_1d(ConfigMap cfg, const std::string& out_dir) {
    static const std::set<std::string> fixed = {
        "run.seed",   "run.n_chains", "run.n_steps", "run.presets", "run.gradient_noise_v",
        "run.trace_points", "run.kl_bins", "metric.scale", "metric.offset"};
    static const std::set<std::string> preset_names = {"sgld", "sghmc", "naive-sgrhmc",
                                                       "gsgrhmc"};
    detail::require_known_with_presets(cfg, fixed, preset_names);

    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 1));
    const int n_chains = static_cast<int>(cfg.get_int("run.n_chains", 3));
    const long long n_steps = cfg.get_int("run.n_steps", 100000);
    const int bins = static_cast<int>(cfg.get_int("run.kl_bins", 100));
    const std::vector<std::string> presets =
        cfg.get_list("run.presets", {"sgld", "sghmc", "naive-sgrhmc", "gsgrhmc"});
    for (const std::string& p : presets)
        if (!preset_names.count(p))
            throw config_error("synthetic-1d: preset " + p + " is not part of this comparison");

    detail::ensure_out_dir(out_dir);
    detail::write_echo(cfg, out_dir);

    SyntheticResult result;
    const std::vector<std::pair<std::string, double>> targets = {
        {"one-peak", 4.0}, {"two-peaks", 2.5}};  // name, half-width of the KL box
    for (const auto& [target_name, half_width] : targets) {
        EnergyModel target = make_synthetic_target(target_name);
        for (const std::string& preset : presets) {
            detail::SyntheticSampler sampler = detail::make_synthetic_sampler(
                preset, target, cfg, potential_minimum(target_name));
            for (int chain = 0; chain < n_chains; ++chain) {
                auto t0 = std::chrono::steady_clock::now();
                Trace trace =
                    detail::run_synthetic_chain(sampler, target, cfg, seed + chain, n_steps);
                if (trace.diverged) result.any_divergence = true;

                MetricsRow row;
                row.preset = preset;
                row.target = target_name;
                row.chain = chain;
                row.n_steps = n_steps;
                if (!trace.diverged && trace.size() >= 1000) {
                    row.kl = kl_divergence(trace, target, bins, -half_width, half_width).value;
                    std::size_t max_lag = std::min<std::size_t>(2000, trace.size() / 10);
                    row.autocorr_time = autocorrelation_time(trace, max_lag);
                } else {
                    row.kl = std::numeric_limits<double>::quiet_NaN();
                    row.autocorr_time = std::numeric_limits<double>::quiet_NaN();
                }
                row.runtime_s = detail::seconds_since(t0);
                result.metrics.push_back(row);

                long long stride =
                    std::max<long long>(1, n_steps / cfg.get_int("run.trace_points", 10000));
                detail::persist_trace(trace, out_dir,
                                      "trace_" + target_name + "_" + preset + "_chain" +
                                          std::to_string(chain),
                                      stride, cfg.echo());
            }
        }
    }
    write_metrics_csv(result.metrics,
                      (std::filesystem::path(out_dir) / "metrics.csv").string());
    return result;
}

namespace detail {

// Marginal masses of exp(-U) over the second coordinate, by trapezoid
// integration of the 2-D density over the first.
inline std::vector<double> marginal_bin_masses(const EnergyModel& target, double lo1, double hi1,
                                               double lo2, double hi2, int bins, int sub = 8) {
    const Eigen::Index n1 = 601;
    std::vector<double> mass(static_cast<std::size_t>(bins), 0.0);
    const double bin_w = (hi2 - lo2) / bins;
    const double h1 = (hi1 - lo1) / static_cast<double>(n1 - 1);
    double total = 0.0;
    Vector point(2);
    for (int b = 0; b < bins; ++b) {
        double acc_bin = 0.0;
        for (int s = 0; s <= sub; ++s) {
            double y = lo2 + bin_w * (b + static_cast<double>(s) / sub);
            double ws = (s == 0 || s == sub) ? 0.5 : 1.0;
            double acc_row = 0.0;
            for (Eigen::Index i = 0; i < n1; ++i) {
                double x = lo1 + h1 * static_cast<double>(i);
                double wi = (i == 0 || i == n1 - 1) ? 0.5 : 1.0;
                point << x, y;
                acc_row += wi * std::exp(-target.potential(point));
            }
            acc_bin += ws * acc_row;
        }
        mass[static_cast<std::size_t>(b)] = acc_bin;
        total += acc_bin;
    }
    for (double& m : mass) m /= total;
    return mass;
}

inline Vector grid_mean_2d(const EnergyModel& target, double lo1, double hi1, double lo2,
                           double hi2) {
    const Eigen::Index n = 801;
    const double h1 = (hi1 - lo1) / static_cast<double>(n - 1);
    const double h2 = (hi2 - lo2) / static_cast<double>(n - 1);
    double z = 0.0, m1 = 0.0, m2 = 0.0;
    Vector point(2);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x = lo1 + h1 * static_cast<double>(i);
        double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            double y = lo2 + h2 * static_cast<double>(j);
            double wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
            point << x, y;
            double p = wi * wj * std::exp(-target.potential(point));
            z += p;
            m1 += p * x;
            m2 += p * y;
        }
    }
    Vector mean(2);
    mean << m1 / z, m2 / z;
    return mean;
}

}  // namespace detail

// Correlated 2-D target: exploration comparison. Emits strided traces, the
// first ten sampled points per chain for path plots, marginal-histogram KL
// on the second coordinate, and batch-means moment summaries.
inline SyntheticResult run_synthetic_2d(ConfigMap cfg, const std::string& out_dir) {
    static const std::set<std::string> fixed = {
        "run.seed",   "run.n_chains", "run.n_steps", "run.presets", "run.gradient_noise_v",
        "run.trace_points", "run.kl_bins", "metric.scale", "metric.offset"};
    static const std::set<std::string> preset_names = {"sgld", "sghmc", "gsgrhmc"};
    detail::require_known_with_presets(cfg, fixed, preset_names);

    // exploration-study defaults: the momentum samplers carry long coherent
    // trajectories with noise compensation, and the level metric runs at a
    // gentler amplitude than in the 1-D study so its tail friction does not
    // swamp the ballistic traversal
    if (!cfg.has("metric.scale")) cfg.set("metric.scale", "0.5");
    if (!cfg.has("preset.sghmc.epsilon")) cfg.set("preset.sghmc.epsilon", "0.02");
    if (!cfg.has("preset.sghmc.friction")) cfg.set("preset.sghmc.friction", "0.5");
    if (!cfg.has("preset.sghmc.resample_period")) cfg.set("preset.sghmc.resample_period", "100");
    if (!cfg.has("preset.sghmc.compensation")) cfg.set("preset.sghmc.compensation", "constant");
    if (!cfg.has("preset.gsgrhmc.epsilon")) cfg.set("preset.gsgrhmc.epsilon", "0.03");
    if (!cfg.has("preset.gsgrhmc.resample_period"))
        cfg.set("preset.gsgrhmc.resample_period", "300");
    if (!cfg.has("preset.gsgrhmc.compensation"))
        cfg.set("preset.gsgrhmc.compensation", "constant");

    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 1));
    const int n_chains = static_cast<int>(cfg.get_int("run.n_chains", 3));
    const long long n_steps = cfg.get_int("run.n_steps", 300000);
    const int bins = static_cast<int>(cfg.get_int("run.kl_bins", 100));
    const std::vector<std::string> presets =
        cfg.get_list("run.presets", {"sgld", "sghmc", "gsgrhmc"});
    for (const std::string& p : presets)
        if (!preset_names.count(p))
            throw config_error("synthetic-2d: preset " + p + " is not part of this comparison");

    detail::ensure_out_dir(out_dir);
    detail::write_echo(cfg, out_dir);

    const double lo1 = -4.5, hi1 = 4.5, lo2 = -3.0, hi2 = 4.0;
    EnergyModel target = make_correlated_2d();
    std::vector<double> marginal2 =
        detail::marginal_bin_masses(target, lo1, hi1, lo2, hi2, bins);

    SyntheticResult result;
    result.target_mean = detail::grid_mean_2d(target, lo1, hi1, lo2, hi2);

    for (const std::string& preset : presets) {
        detail::SyntheticSampler sampler = detail::make_synthetic_sampler(
            preset, target, cfg, potential_minimum("correlated-2d"));
        for (int chain = 0; chain < n_chains; ++chain) {
            auto t0 = std::chrono::steady_clock::now();
            Trace trace =
                detail::run_synthetic_chain(sampler, target, cfg, seed + chain, n_steps);
            if (trace.diverged) result.any_divergence = true;

            MetricsRow row;
            row.preset = preset;
            row.target = "correlated-2d";
            row.chain = chain;
            row.n_steps = n_steps;
            row.kl = std::numeric_limits<double>::quiet_NaN();
            row.autocorr_time = std::numeric_limits<double>::quiet_NaN();
            if (!trace.diverged && trace.size() >= 1000) {
                // histogram of theta_2 against the grid marginal
                std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
                const double width = (hi2 - lo2) / bins;
                for (const Vector& t : trace.theta) {
                    int b = static_cast<int>(std::floor((t[1] - lo2) / width));
                    b = std::clamp(b, 0, bins - 1);
                    counts[static_cast<std::size_t>(b)] += 1.0;
                }
                const double pseudo = 1.0 / (static_cast<double>(trace.size()) * bins);
                double z = 0.0;
                for (double& c : counts) {
                    c = c / static_cast<double>(trace.size()) + pseudo;
                    z += c;
                }
                for (double& c : counts) c /= z;
                row.kl = kl_between_histograms(counts, marginal2);
                std::size_t max_lag = std::min<std::size_t>(5000, trace.size() / 10);
                row.autocorr_time = autocorrelation_time(trace, max_lag, 1);

                SyntheticResult::Moment moment;
                moment.preset = preset;
                moment.chain = chain;
                moment.mean = Vector(2);
                moment.se = Vector(2);
                for (int comp = 0; comp < 2; ++comp) {
                    std::vector<double> xs = component_series(trace, comp);
                    moment.mean[comp] = mean_of(xs);
                    moment.se[comp] = batch_means_se(xs);
                }
                result.moments.push_back(moment);
            }
            row.runtime_s = detail::seconds_since(t0);
            result.metrics.push_back(row);

            // first ten sampled points for the path plot
            {
                std::ofstream path_file(std::filesystem::path(out_dir) /
                                        ("path_" + preset + "_chain" + std::to_string(chain) +
                                         ".csv"));
                path_file << "theta_0,theta_1\n";
                for (std::size_t k = 0; k < std::min<std::size_t>(10, trace.size()); ++k)
                    path_file << format_double(trace.theta[k][0]) << ","
                              << format_double(trace.theta[k][1]) << "\n";
            }
            long long stride =
                std::max<long long>(1, n_steps / cfg.get_int("run.trace_points", 10000));
            detail::persist_trace(trace, out_dir,
                                  "trace_correlated-2d_" + preset + "_chain" +
                                      std::to_string(chain),
                                  stride, cfg.echo());
        }
    }

    // moment summary
    {
        std::ofstream out(std::filesystem::path(out_dir) / "moments.csv");
        out << "preset,chain,mean_theta0,se_theta0,mean_theta1,se_theta1\n";
        for (const auto& m : result.moments)
            out << m.preset << "," << m.chain << "," << format_double(m.mean[0]) << ","
                << format_double(m.se[0]) << "," << format_double(m.mean[1]) << ","
                << format_double(m.se[1]) << "\n";
    }
    write_metrics_csv(result.metrics,
                      (std::filesystem::path(out_dir) / "metrics.csv").string());
    return result;
}

}  // namespace sgmcmc
