#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgmcmc/metric.hpp"
#include "sgmcmc/recipe.hpp"

namespace sgmcmc {

enum class Integrator { euler, leapfrog };

// Knobs shared by the preset factories. Each factory accepts only the
// parameters its sampler actually has; anything else set is a configuration
// error, so a typo cannot silently change an unrelated preset.
struct PresetConfig {
    std::optional<double> epsilon;
    std::optional<StepSchedule> schedule;
    std::optional<Vector> mass_diag;            // M (diagonal)
    std::optional<Vector> friction_diag;        // C
    std::optional<Vector> diffusion_diag;       // D for plain Langevin
    std::optional<double> thermostat_a;         // A
    std::optional<MetricSpec> metric;
    std::optional<long long> resample_period;   // momentum refresh; 0 = never
    std::optional<NoiseCompensation> compensation;  // theta-block sized
    std::optional<Integrator> integrator;
    std::optional<double> gradient_noise_v;     // variance scale of the SG noise (naive casts)
};

// A ready-to-run sampler: the recipe spec plus the runner-level choices that
// are not part of the continuous dynamics.
struct SamplerSetup {
    SamplerSpec spec;
    long long resample_period = 0;
    Integrator integrator = Integrator::euler;
    std::function<void(StateVector&)> post_step;  // e.g. positivity reflection
    bool full_data_only = false;
};

namespace detail {

inline void reject(const PresetConfig& c, const std::string& preset,
                   bool allow_mass, bool allow_friction, bool allow_diffusion,
                   bool allow_thermostat, bool allow_metric, bool allow_resample,
                   bool allow_compensation, bool allow_integrator, bool allow_noise_v) {
    auto bad = [&](const char* what) {
        throw config_error("preset " + preset + ": parameter " + what + " is not used");
    };
    if (c.mass_diag && !allow_mass) bad("mass");
    if (c.friction_diag && !allow_friction) bad("friction");
    if (c.diffusion_diag && !allow_diffusion) bad("diffusion");
    if (c.thermostat_a && !allow_thermostat) bad("thermostat");
    if (c.metric && !allow_metric) bad("metric");
    if (c.resample_period && !allow_resample) bad("resample_period");
    if (c.compensation && !allow_compensation) bad("compensation");
    if (c.integrator && !allow_integrator) bad("integrator");
    if (c.gradient_noise_v && !allow_noise_v) bad("gradient_noise_v");
}

inline StepSchedule schedule_or(const PresetConfig& c, double default_eps) {
    if (c.schedule) return *c.schedule;
    return StepSchedule::constant(c.epsilon.value_or(default_eps));
}

inline Vector block_vector(const std::optional<Vector>& v, Eigen::Index d, double fallback,
                           const std::string& what) {
    if (!v) return Vector::Constant(d, fallback);
    if (v->size() == 1) return Vector::Constant(d, (*v)[0]);
    if (v->size() != d) throw config_error(what + ": expected scalar or dimension-" +
                                           std::to_string(d) + " vector");
    return *v;
}

// Rebuilds the target model over an augmented layout, keeping U.
inline EnergyModel augment(const EnergyModel& target, Eigen::Index r_dim, Eigen::Index xi_dim) {
    EnergyModel m(BlockLayout(target.layout().theta_dim(), r_dim, xi_dim), target.potential_fn(),
                  target.potential_grad_fn());
    return m;
}

// Embeds a theta-block compensation policy into the full state dimension.
inline NoiseCompensation embed_compensation(const NoiseCompensation& c, Eigen::Index theta_dim,
                                            Eigen::Index dim, Eigen::Index block_offset) {
    if (!c.active()) return c;
    NoiseCompensation out;
    out.kind = c.kind;
    out.refresh_every = c.refresh_every;
    if (c.kind == NoiseCompensation::Kind::constant_estimate) {
        if (c.is_dense()) {
            if (c.constant_dense.rows() != theta_dim)
                throw config_error("compensation: dense estimate must be theta-block sized");
            Matrix full = Matrix::Zero(dim, dim);
            full.block(block_offset, block_offset, theta_dim, theta_dim) = c.constant_dense;
            out.constant_dense = std::move(full);
        } else {
            Vector diag = block_vector(c.constant_diag, theta_dim, 0.0, "compensation");
            Vector full = Vector::Zero(dim);
            full.segment(block_offset, theta_dim) = diag;
            out.constant_diag = std::move(full);
        }
    } else if (c.kind == NoiseCompensation::Kind::empirical) {
        auto inner = c.empirical;
        out.empirical = [inner, theta_dim, dim, block_offset](const StateVector& z) {
            Vector full = Vector::Zero(dim);
            full.segment(block_offset, theta_dim) = inner(z);
            return full;
        };
    }
    return out;
}

inline MatrixField metric_diffusion_theta_only(const MetricSpec& metric, Eigen::Index d) {
    auto diag = [metric](const StateVector& z, const FieldContext& ctx) {
        return metric.eval(Vector(z.theta()), ctx).g_inv;
    };
    auto div = [metric](const StateVector& z, const FieldContext& ctx) {
        return metric.eval(Vector(z.theta()), ctx).g_inv_deriv;
    };
    MatrixField f = MatrixField::diagonal_fn(d, diag, FieldStructure::diffusion, div);
    f.set_needs_potential(metric.needs_potential());
    return f;
}

}  // namespace detail

// --- corrected presets -----------------------------------------------------

// Hamiltonian dynamics: D = 0, Q = [[0,-I],[I,0]], H = U + r'M^{-1}r/2.
// Full-data only; the stochastic variant without a friction pairing is the
// separate naive control below.
inline SamplerSetup make_hmc(const PresetConfig& config, const EnergyModel& target) {
    detail::reject(config, "hmc", true, false, false, false, false, true, false, true, false);
    const Eigen::Index d = target.layout().theta_dim();
    SamplerSetup setup;
    EnergyModel model = detail::augment(target, d, 0);
    if (config.mass_diag)
        model.set_mass(MassSpec::diagonal(detail::block_vector(config.mass_diag, d, 1.0, "mass")));
    setup.spec.model = std::move(model);
    setup.spec.diffusion = MatrixField::zero(2 * d, FieldStructure::diffusion);
    setup.spec.curl = make_canonical_curl(d);
    setup.spec.schedule = detail::schedule_or(config, 0.1);
    setup.spec.name = "hmc";
    setup.resample_period = config.resample_period.value_or(50);
    setup.integrator = config.integrator.value_or(Integrator::leapfrog);
    setup.full_data_only = true;
    setup.spec.check();
    return setup;
}

// First-order Langevin: z = theta, constant D, Q = 0.
inline SamplerSetup make_sgld(const PresetConfig& config, const EnergyModel& target) {
    detail::reject(config, "sgld", false, false, true, false, false, false, true, false, false);
    const Eigen::Index d = target.layout().theta_dim();
    SamplerSetup setup;
    setup.spec.model = detail::augment(target, 0, 0);
    Vector ddiag = detail::block_vector(config.diffusion_diag, d, 1.0, "diffusion");
    setup.spec.diffusion = MatrixField::constant_diagonal(ddiag, FieldStructure::diffusion);
    setup.spec.curl = MatrixField::zero(d, FieldStructure::curl);
    setup.spec.schedule = detail::schedule_or(config, 0.01);
    if (config.compensation)
        setup.spec.compensation = detail::embed_compensation(*config.compensation, d, d, 0);
    setup.spec.name = "sgld";
    setup.spec.check();
    return setup;
}

// Second-order Langevin with friction: D = [[0,0],[0,C]], Q = [[0,-I],[I,0]].
inline SamplerSetup make_sghmc(const PresetConfig& config, const EnergyModel& target) {
    detail::reject(config, "sghmc", true, true, false, false, false, true, true, false, false);
    const Eigen::Index d = target.layout().theta_dim();
    SamplerSetup setup;
    EnergyModel model = detail::augment(target, d, 0);
    if (config.mass_diag)
        model.set_mass(MassSpec::diagonal(detail::block_vector(config.mass_diag, d, 1.0, "mass")));
    setup.spec.model = std::move(model);
    Vector c = detail::block_vector(config.friction_diag, d, 1.0, "friction");
    Vector ddiag = Vector::Zero(2 * d);
    ddiag.segment(d, d) = c;
    setup.spec.diffusion = MatrixField::constant_diagonal(ddiag, FieldStructure::diffusion);
    setup.spec.curl = make_canonical_curl(d);
    setup.spec.schedule = detail::schedule_or(config, 0.1);
    if (config.compensation) {
        setup.spec.compensation =
            detail::embed_compensation(*config.compensation, d, 2 * d, d);
        // friction must dominate the noise estimate at the largest step size
        if (config.compensation->kind == NoiseCompensation::Kind::constant_estimate &&
            !config.compensation->is_dense()) {
            Vector bhat = detail::block_vector(config.compensation->constant_diag, d, 0.0,
                                               "compensation");
            double eps0 = setup.spec.schedule.epsilon(0);
            if (((c - eps0 * bhat).array() < -1e-12).any())
                throw config_error("sghmc: friction C must dominate eps * Bhat");
        }
    }
    setup.spec.name = "sghmc";
    setup.resample_period = config.resample_period.value_or(50);
    setup.spec.check();
    return setup;
}

// Riemannian Langevin: z = theta, D = G^{-1}(theta), Q = 0, with the
// metric-derivative drift correction supplied analytically.
inline SamplerSetup make_sgrld(const PresetConfig& config, const EnergyModel& target) {
    detail::reject(config, "sgrld", false, false, false, false, true, false, true, false, false);
    const Eigen::Index d = target.layout().theta_dim();
    MetricSpec metric = config.metric.value_or(MetricSpec::fisher_diagonal());
    SamplerSetup setup;
    setup.spec.model = detail::augment(target, 0, 0);
    setup.spec.diffusion = detail::metric_diffusion_theta_only(metric, d);
    setup.spec.curl = MatrixField::zero(d, FieldStructure::curl);
    setup.spec.schedule = detail::schedule_or(config, 0.01);
    if (config.compensation)
        setup.spec.compensation = detail::embed_compensation(*config.compensation, d, d, 0);
    setup.spec.name = "sgrld";
    setup.spec.check();
    return setup;
}

// Thermostat curl over z = (theta, r, xi): [[0,-I,0],[I,0,r/d],[0,-r'/d,0]].
inline MatrixField make_thermostat_curl(Eigen::Index d) {
    const Eigen::Index dim = 2 * d + 1;
    auto eval = [d, dim](const StateVector& z, const FieldContext&) {
        Matrix q = Matrix::Zero(dim, dim);
        const double dd = static_cast<double>(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            q(i, d + i) = -1.0;
            q(d + i, i) = 1.0;
            q(d + i, 2 * d) = z.r()[i] / dd;
            q(2 * d, d + i) = -z.r()[i] / dd;
        }
        return q;
    };
    auto apply = [d](const StateVector& z, const FieldContext&, const Vector& v) {
        const double dd = static_cast<double>(d);
        Vector out(2 * d + 1);
        out.head(d) = -v.segment(d, d);
        out.segment(d, d) = v.head(d) + (z.r() / dd) * v[2 * d];
        out[2 * d] = -z.r().dot(v.segment(d, d)) / dd;
        return out;
    };
    // Only the xi row varies with its own coordinates: sum_j d(-r_j/d)/dr_j = -1.
    auto div = [dim](const StateVector&, const FieldContext&) {
        Vector g = Vector::Zero(dim);
        g[dim - 1] = -1.0;
        return g;
    };
    return MatrixField::dense_fn(dim, eval, FieldStructure::curl, div, apply);
}

// Thermostat-augmented dynamics: z = (theta, r, xi),
// H = U + r'r/2 + (xi - A)^2/(2d), D = diag(0, A I, 0).
inline SamplerSetup make_sgnht(const PresetConfig& config, const EnergyModel& target) {
    detail::reject(config, "sgnht", false, false, false, true, false, false, true, false, false);
    const Eigen::Index d = target.layout().theta_dim();
    const double a = config.thermostat_a.value_or(1.0);
    if (!(a > 0.0)) throw config_error("sgnht: thermostat parameter A must be positive");
    SamplerSetup setup;
    EnergyModel model = detail::augment(target, d, 1);
    model.set_thermostat_center(a);
    setup.spec.model = std::move(model);
    Vector ddiag = Vector::Zero(2 * d + 1);
    ddiag.segment(d, d).setConstant(a);
    setup.spec.diffusion = MatrixField::constant_diagonal(ddiag, FieldStructure::diffusion);
    setup.spec.curl = make_thermostat_curl(d);
    setup.spec.schedule = detail::schedule_or(config, 0.1);
    if (config.compensation)
        setup.spec.compensation =
            detail::embed_compensation(*config.compensation, d, 2 * d + 1, d);
    setup.spec.name = "sgnht";
    setup.spec.check();
    return setup;
}

// Riemann Hamiltonian dynamics with any positive-definite diagonal metric:
// H = U + r'r/2, D = diag(0, G^{-1}), Q = [[0,-G^{-1/2}],[G^{-1/2},0]].
// The curl divergence carries the metric-derivative correction.
inline SamplerSetup make_gsgrhmc(const PresetConfig& config, const EnergyModel& target) {
    detail::reject(config, "gsgrhmc", false, false, false, false, true, true, true, false, false);
    const Eigen::Index d = target.layout().theta_dim();
    MetricSpec metric = config.metric.value_or(MetricSpec::identity());
    SamplerSetup setup;
    setup.spec.model = detail::augment(target, d, 0);

    auto d_diag = [metric, d](const StateVector& z, const FieldContext& ctx) {
        Vector full = Vector::Zero(2 * d);
        full.segment(d, d) = metric.eval(Vector(z.theta()), ctx).g_inv;
        return full;
    };
    // D's r-block depends on theta only, never on its own coordinates.
    auto d_div = [d](const StateVector&, const FieldContext&) { return Vector::Zero(2 * d); };
    setup.spec.diffusion =
        MatrixField::diagonal_fn(2 * d, d_diag, FieldStructure::diffusion, d_div);
    setup.spec.diffusion.set_needs_potential(metric.needs_potential());

    auto coupling = [metric](const StateVector& z, const FieldContext& ctx) {
        return metric.eval(Vector(z.theta()), ctx).g_inv_sqrt;
    };
    auto q_div = [metric, d](const StateVector& z, const FieldContext& ctx) {
        Vector g = Vector::Zero(2 * d);
        g.segment(d, d) = metric.eval(Vector(z.theta()), ctx).g_inv_sqrt_deriv;
        return g;
    };
    setup.spec.curl = make_canonical_curl(d, coupling, q_div);
    setup.spec.curl.set_needs_potential(metric.needs_potential());

    setup.spec.schedule = detail::schedule_or(config, 0.02);
    if (config.compensation)
        setup.spec.compensation =
            detail::embed_compensation(*config.compensation, d, 2 * d, d);
    setup.spec.name = "gsgrhmc";
    setup.resample_period = config.resample_period.value_or(50);
    setup.spec.check();
    return setup;
}

// --- naive controls ---------------------------------------------------------

// An update rule that is *not* an instance of the framework. It is kept
// behind this separate type so it can never be handed to the generic engine
// or presented as a validated spec.
struct RawUpdater {
    std::string name;
    EnergyModel model;
    StepSchedule schedule = StepSchedule::constant(0.01);
    long long resample_period = 0;
    // One update with an externally supplied (noisy) potential gradient.
    std::function<StateVector(const StateVector&, long long, const Vector&, Rng&)> step;
    // Deterministic part of the update per unit step size, exact gradient.
    std::function<Vector(const StateVector&, const Vector&)> drift;
    // Diffusion implied by the noise the updater actually injects (including
    // its stochastic-gradient noise), for the cast-residual check.
    MatrixField implied_diffusion;
};

// Plain HMC with the gradient swapped for a stochastic one: no friction, no
// injected noise. Its stochastic-gradient noise acts like a diffusion of
// eps V / 2 on the momentum with nothing paired against it.
inline RawUpdater make_naive_sghmc(const PresetConfig& config, const EnergyModel& target) {
    detail::reject(config, "naive-sghmc", true, false, false, false, false, true, false, false,
                   true);
    const Eigen::Index d = target.layout().theta_dim();
    RawUpdater raw;
    raw.name = "naive-sghmc";
    raw.model = detail::augment(target, d, 0);
    Vector mass_inv = detail::block_vector(config.mass_diag, d, 1.0, "mass").cwiseInverse();
    raw.schedule = detail::schedule_or(config, 0.1);
    raw.resample_period = config.resample_period.value_or(50);
    raw.step = [mass_inv, sched = raw.schedule, d](const StateVector& z, long long t,
                                                   const Vector& grad_u, Rng&) {
        const double eps = sched.epsilon(t);
        Vector next(2 * d);
        next.head(d) = z.theta() + eps * mass_inv.cwiseProduct(z.r());
        next.segment(d, d) = z.r() - eps * grad_u;
        return StateVector(z.layout(), std::move(next));
    };
    raw.drift = [mass_inv, d](const StateVector& z, const Vector& grad_u) {
        Vector f(2 * d);
        f.head(d) = mass_inv.cwiseProduct(z.r());
        f.segment(d, d) = -grad_u;
        return f;
    };
    const double v = config.gradient_noise_v.value_or(1.0);
    const double eps0 = raw.schedule.epsilon(0);
    Vector implied = Vector::Zero(2 * d);
    implied.segment(d, d).setConstant(eps0 * v / 2.0);
    raw.implied_diffusion = MatrixField::constant_diagonal(implied, FieldStructure::diffusion);
    return raw;
}

// State-dependent preconditioning bolted onto the second-order update without
// the metric-derivative correction term.
inline RawUpdater make_naive_sgrhmc(const PresetConfig& config, const EnergyModel& target) {
    detail::reject(config, "naive-sgrhmc", false, false, false, false, true, true, true, false,
                   false);
    const Eigen::Index d = target.layout().theta_dim();
    MetricSpec metric = config.metric.value_or(MetricSpec::identity());
    RawUpdater raw;
    raw.name = "naive-sgrhmc";
    raw.model = detail::augment(target, d, 0);
    raw.schedule = detail::schedule_or(config, 0.02);
    raw.resample_period = config.resample_period.value_or(50);
    Vector bhat = Vector::Zero(d);
    if (config.compensation && config.compensation->kind ==
                                   NoiseCompensation::Kind::constant_estimate &&
        !config.compensation->is_dense())
        bhat = detail::block_vector(config.compensation->constant_diag, d, 0.0, "compensation");
    raw.step = [metric, sched = raw.schedule, d, bhat](const StateVector& z, long long t,
                                                       const Vector& grad_u, Rng& rng) {
        const double eps = sched.epsilon(t);
        MetricEval m = metric.eval(Vector(z.theta()),
                                   FieldContext{std::nullopt, std::optional<Vector>(grad_u)});
        Vector xi = standard_normal_vector(rng, 2 * d);
        Vector noise_sd =
            sqrt_psd_diagonal(eps * (2.0 * m.g_inv - eps * bhat), "naive-sgrhmc noise");
        Vector next(2 * d);
        next.head(d) = z.theta() + eps * m.g_inv_sqrt.cwiseProduct(z.r());
        next.segment(d, d) = z.r() - eps * m.g_inv_sqrt.cwiseProduct(grad_u) -
                             eps * m.g_inv.cwiseProduct(z.r()) +
                             noise_sd.cwiseProduct(xi.segment(d, d));
        return StateVector(z.layout(), std::move(next));
    };
    raw.drift = [metric, d](const StateVector& z, const Vector& grad_u) {
        MetricEval m = metric.eval(Vector(z.theta()),
                                   FieldContext{std::nullopt, std::optional<Vector>(grad_u)});
        Vector f(2 * d);
        f.head(d) = m.g_inv_sqrt.cwiseProduct(z.r());
        f.segment(d, d) =
            -m.g_inv_sqrt.cwiseProduct(grad_u) - m.g_inv.cwiseProduct(z.r());
        return f;
    };
    auto implied = [metric, d](const StateVector& z, const FieldContext& ctx) {
        Vector full = Vector::Zero(2 * d);
        full.segment(d, d) = metric.eval(Vector(z.theta()), ctx).g_inv;
        return full;
    };
    raw.implied_diffusion =
        MatrixField::diagonal_fn(2 * d, implied, FieldStructure::diffusion);
    return raw;
}

// --- cast-residual check -----------------------------------------------------

// How close an update rule comes to being an instance of the framework with
// its own implied diffusion: fits one constant skew-symmetric Q by least
// squares to the drift over the probe states and reports the RMS residual.
// Corrected presets with constant curl sit at numerical zero; the naive
// controls do not.
inline double recipe_cast_residual(
    const std::function<Vector(const StateVector&, const Vector&)>& drift_fn,
    const MatrixField& implied_diffusion, const EnergyModel& model,
    const std::vector<StateVector>& probes) {
    if (probes.empty()) throw config_error("recipe_cast_residual: need probe states");
    const Eigen::Index d = model.dim();
    const Eigen::Index n_params = d * (d - 1) / 2;

    std::vector<Vector> grads, targets;
    grads.reserve(probes.size());
    targets.reserve(probes.size());
    for (const StateVector& z : probes) {
        Vector grad_h = model.grad(z);
        Vector grad_u = grad_h.head(model.layout().theta_dim());
        Vector f = drift_fn(z, grad_u);
        Vector target = f + implied_diffusion.apply(z, {}, grad_h) -
                        implied_diffusion.divergence(z);
        grads.push_back(std::move(grad_h));
        targets.push_back(std::move(target));  // must equal -Q grad_h
    }

    auto param_index = [d](Eigen::Index i, Eigen::Index j) {
        // i < j; row-major upper triangle
        return i * d - i * (i + 1) / 2 + (j - i - 1);
    };

    Matrix ata = Matrix::Zero(n_params, n_params);
    Vector atb = Vector::Zero(n_params);
    double target_sq = 0.0;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        const Vector& g = grads[k];
        const Vector& b = targets[k];
        target_sq += b.squaredNorm();
        // row block for this probe: (-Q g)_i = -sum_{j>i} q_ij g_j + sum_{j<i} q_ji g_i ...
        // assembled column by column below
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = i + 1; j < d; ++j) {
                const Eigen::Index p = param_index(i, j);
                // q_ij contributes -g_j to component i and +g_i to component j
                atb[p] += -g[j] * b[i] + g[i] * b[j];
                for (Eigen::Index i2 = 0; i2 < d; ++i2) {
                    for (Eigen::Index j2 = i2 + 1; j2 < d; ++j2) {
                        const Eigen::Index p2 = param_index(i2, j2);
                        double dot = 0.0;
                        if (i == i2) dot += g[j] * g[j2];
                        if (j == j2) dot += g[i] * g[i2];
                        if (i == j2) dot -= g[j] * g[i2];
                        if (j == i2) dot -= g[i] * g[j2];
                        ata(p, p2) += dot;
                    }
                }
            }
        }
    }
    Vector q = ata.ldlt().solve(atb);

    double res_sq = 0.0;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        const Vector& g = grads[k];
        Vector fit = Vector::Zero(d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = i + 1; j < d; ++j) {
                const double qij = q[param_index(i, j)];
                fit[i] += -qij * g[j];
                fit[j] += qij * g[i];
            }
        res_sq += (targets[k] - fit).squaredNorm();
    }
    return std::sqrt(res_sq / (static_cast<double>(probes.size()) * static_cast<double>(d)));
}

}  // namespace sgmcmc
