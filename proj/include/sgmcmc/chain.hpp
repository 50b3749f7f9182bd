#pragma once

#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgmcmc/minibatch.hpp"
#include "sgmcmc/presets.hpp"

namespace sgmcmc {

// A gradient estimate at theta: the (noisy) potential gradient, and the
// potential value itself when the estimator can produce one (metrics built
// on the potential level want it).
struct GradientEstimate {
    Vector grad;
    std::optional<double> value;
};

using GradientEstimator = std::function<GradientEstimate(const Vector& theta, Rng&)>;

// Exact gradient with synthetic Gaussian noise of variance v per coordinate.
inline GradientEstimator make_injected_noise_estimator(const EnergyModel& target, double v) {
    if (v < 0.0) throw config_error("injected gradient noise variance must be non-negative");
    const double sd = std::sqrt(v);
    return [target, sd](const Vector& theta, Rng& rng) {
        GradientEstimate e;
        e.grad = target.potential_grad(theta) + sd * standard_normal_vector(rng, theta.size());
        e.value = target.potential(theta);
        return e;
    };
}

// Minibatch gradient over a dataset; resamples a subset each call.
inline GradientEstimator make_minibatch_estimator(const LikelihoodModel& model,
                                                  const Dataset& data, std::size_t m,
                                                  bool with_value = false) {
    if (m < 1 || m > data.size()) throw config_error("minibatch estimator: size out of range");
    return [model, data, m, with_value](const Vector& theta, Rng& rng) {
        Minibatch batch = sample_minibatch(data, m, rng);
        GradientEstimate e;
        e.grad = stochastic_potential_grad(model, theta, data, batch);
        if (with_value) e.value = stochastic_potential_value(model, theta, data, batch);
        return e;
    };
}

struct ChainOptions {
    long long n_steps = 0;
    long long record_every = 1;
    bool record_initial = false;
    bool record_aux = false;
    std::uint64_t seed = 1;
};

// Post-step hook for positive-support parameters: boundary reflection of the
// theta block, with exact zeros nudged off the boundary.
inline std::function<void(StateVector&)> make_reflect_positive_hook() {
    return [](StateVector& z) {
        auto theta = z.theta();
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            double x = std::abs(theta[i]);
            theta[i] = x == 0.0 ? 1e-10 : x;
        }
    };
}

// Ordered sample chain. Auxiliary blocks are discarded unless asked for;
// the theta marginal is what the sampler is for.
struct Trace {
    std::string preset;
    std::uint64_t seed = 0;
    Eigen::Index theta_dim = 0;
    std::vector<long long> steps;
    std::vector<double> epsilons;
    std::vector<Vector> theta;
    std::vector<Vector> aux;  // full state, only when record_aux
    bool diverged = false;
    long long divergence_step = -1;

    std::size_t size() const { return theta.size(); }
};

namespace detail {

inline void resample_momentum(StateVector& z, const MassSpec& mass, Rng& rng) {
    const Eigen::Index rd = z.layout().r_dim();
    Vector xi = standard_normal_vector(rng, rd);
    if (mass.is_identity()) {
        z.r() = xi;
    } else {
        z.r() = mass.inv_diag.cwiseInverse().cwiseSqrt().cwiseProduct(xi);
    }
}

inline StateVector leapfrog_step(const EnergyModel& model, const StateVector& z, double eps) {
    const Eigen::Index d = model.layout().theta_dim();
    Vector theta = z.theta();
    Vector r_half = z.r() - 0.5 * eps * model.potential_grad(theta);
    theta += eps * model.mass().apply_inverse(r_half);
    Vector r_next = r_half - 0.5 * eps * model.potential_grad(theta);
    Vector next(2 * d);
    next.head(d) = theta;
    next.segment(d, d) = r_next;
    return StateVector(z.layout(), std::move(next));
}

}  // namespace detail

inline Trace run_chain(const SamplerSetup& setup, const GradientEstimator& estimator,
                       const StateVector& init, const ChainOptions& options) {
    if (options.n_steps < 1) throw config_error("run_chain: n_steps must be at least 1");
    if (options.record_every < 1) throw config_error("run_chain: record_every must be positive");
    if (init.layout() != setup.spec.model.layout())
        throw dimension_error("run_chain: init state does not match the sampler layout");
    if (estimator && setup.full_data_only)
        throw config_error("preset " + setup.spec.name + " is full-data only; "
                           "stochastic gradients are rejected");
    if (setup.integrator == Integrator::leapfrog && !setup.spec.diffusion.is_zero())
        throw config_error("leapfrog integration requires zero diffusion");

    SamplerSpec spec = setup.spec;  // local copy so empirical compensation can be cached
    const bool cache_compensation =
        spec.compensation.kind == NoiseCompensation::Kind::empirical;
    NoiseCompensation empirical = spec.compensation;

    Rng rng = make_rng(options.seed);
    StateVector z = init;

    Trace trace;
    trace.preset = spec.name;
    trace.seed = options.seed;
    trace.theta_dim = spec.model.layout().theta_dim();
    if (options.record_initial) {
        trace.steps.push_back(-1);
        trace.epsilons.push_back(0.0);
        trace.theta.push_back(Vector(z.theta()));
        if (options.record_aux) trace.aux.push_back(z.flat());
    }

    for (long long t = 0; t < options.n_steps; ++t) {
        if (setup.resample_period > 0 && t > 0 && t % setup.resample_period == 0 &&
            spec.model.layout().has_r())
            detail::resample_momentum(z, spec.model.mass(), rng);

        if (cache_compensation && t % empirical.refresh_every == 0)
            spec.compensation = NoiseCompensation::constant_diagonal(empirical.empirical(z));

        const double eps = spec.schedule.epsilon(t);
        StateVector next = z;
        try {
            if (setup.integrator == Integrator::leapfrog) {
                next = detail::leapfrog_step(spec.model, z, eps);
            } else if (estimator) {
                GradientEstimate e = estimator(Vector(z.theta()), rng);
                Vector grad_h = spec.model.grad_with_potential_grad(z, e.grad);
                next = step_minibatch(spec, z, t, grad_h, rng, e.value);
            } else {
                next = step_full_data(spec, z, t, rng);
            }
        } catch (const numeric_error&) {
            trace.diverged = true;
            trace.divergence_step = t;
            break;
        } catch (const step_error&) {
            // a step that cannot be taken (metric singular, covariance not
            // PSD) aborts the chain the same way a non-finite state does
            trace.diverged = true;
            trace.divergence_step = t;
            break;
        }
        if (setup.post_step) setup.post_step(next);
        z = std::move(next);

        if (!z.finite()) {
            trace.diverged = true;
            trace.divergence_step = t;
            break;
        }
        if ((t + 1) % options.record_every == 0) {
            trace.steps.push_back(t);
            trace.epsilons.push_back(eps);
            trace.theta.push_back(Vector(z.theta()));
            if (options.record_aux) trace.aux.push_back(z.flat());
        }
    }
    return trace;
}

// Naive controls run through the same loop structure but with their own raw
// update; there is no compensation machinery to cache.
inline Trace run_chain(const RawUpdater& raw, const GradientEstimator& estimator,
                       const StateVector& init, const ChainOptions& options) {
    if (options.n_steps < 1) throw config_error("run_chain: n_steps must be at least 1");
    if (options.record_every < 1) throw config_error("run_chain: record_every must be positive");
    if (init.layout() != raw.model.layout())
        throw dimension_error("run_chain: init state does not match the sampler layout");

    Rng rng = make_rng(options.seed);
    StateVector z = init;

    Trace trace;
    trace.preset = raw.name;
    trace.seed = options.seed;
    trace.theta_dim = raw.model.layout().theta_dim();
    if (options.record_initial) {
        trace.steps.push_back(-1);
        trace.epsilons.push_back(0.0);
        trace.theta.push_back(Vector(z.theta()));
        if (options.record_aux) trace.aux.push_back(z.flat());
    }

    for (long long t = 0; t < options.n_steps; ++t) {
        if (raw.resample_period > 0 && t > 0 && t % raw.resample_period == 0 &&
            raw.model.layout().has_r())
            detail::resample_momentum(z, raw.model.mass(), rng);

        try {
            Vector grad_u;
            if (estimator) {
                grad_u = estimator(Vector(z.theta()), rng).grad;
            } else {
                grad_u = raw.model.potential_grad(Vector(z.theta()));
            }
            z = raw.step(z, t, grad_u, rng);
        } catch (const numeric_error&) {
            trace.diverged = true;
            trace.divergence_step = t;
            break;
        } catch (const step_error&) {
            trace.diverged = true;
            trace.divergence_step = t;
            break;
        }

        if (!z.finite()) {
            trace.diverged = true;
            trace.divergence_step = t;
            break;
        }
        if ((t + 1) % options.record_every == 0) {
            trace.steps.push_back(t);
            trace.epsilons.push_back(raw.schedule.epsilon(t));
            trace.theta.push_back(Vector(z.theta()));
            if (options.record_aux) trace.aux.push_back(z.flat());
        }
    }
    return trace;
}

// --- persistence -----------------------------------------------------------

// CSV schema: step,epsilon,theta_0,...,theta_{d-1}
inline void write_trace_csv(const Trace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open trace file for writing: " + path);
    out << "step,epsilon";
    for (Eigen::Index i = 0; i < trace.theta_dim; ++i) out << ",theta_" << i;
    out << "\n";
    for (std::size_t k = 0; k < trace.theta.size(); ++k) {
        out << trace.steps[k] << "," << format_double(trace.epsilons[k]);
        for (Eigen::Index i = 0; i < trace.theta_dim; ++i)
            out << "," << format_double(trace.theta[k][i]);
        out << "\n";
    }
}

inline void write_trace_meta(const Trace& trace, const std::string& path,
                             const std::string& config_echo = "") {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open trace metadata file for writing: " + path);
    out << "preset = " << trace.preset << "\n";
    out << "seed = " << trace.seed << "\n";
    out << "samples = " << trace.theta.size() << "\n";
    out << "theta_dim = " << trace.theta_dim << "\n";
    out << "diverged = " << (trace.diverged ? "true" : "false") << "\n";
    if (trace.diverged) out << "divergence_step = " << trace.divergence_step << "\n";
    if (!config_echo.empty()) out << config_echo;
}

}  // namespace sgmcmc
