#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgmcmc/energy.hpp"
#include "sgmcmc/matrix_field.hpp"
#include "sgmcmc/random.hpp"

namespace sgmcmc {

// Step-size schedule: constant, or eps_t = (a (1 + t/b))^(-c).
class StepSchedule {
  public:
    static StepSchedule constant(double eps) {
        if (!(eps > 0.0)) throw config_error("StepSchedule: epsilon must be positive");
        StepSchedule s;
        s.eps_ = eps;
        return s;
    }
    static StepSchedule polynomial(double a, double b, double c) {
        if (!(a > 0.0) || !(b > 0.0) || !(c >= 0.0))
            throw config_error("StepSchedule: polynomial schedule needs a,b > 0 and c >= 0");
        StepSchedule s;
        s.poly_ = true;
        s.a_ = a;
        s.b_ = b;
        s.c_ = c;
        return s;
    }

    double epsilon(long long t) const {
        if (!poly_) return eps_;
        return std::pow(a_ * (1.0 + static_cast<double>(t) / b_), -c_);
    }
    bool is_constant() const { return !poly_; }

  private:
    bool poly_ = false;
    double eps_ = 1e-3;
    double a_ = 1.0, b_ = 1.0, c_ = 0.0;
};

// Estimate of the stochastic-gradient noise covariance, subtracted from the
// injected noise: the step noise covariance is eps (2 D - eps B).
struct NoiseCompensation {
    enum class Kind { none, constant_estimate, empirical };

    Kind kind = Kind::none;
    Vector constant_diag;                                  // diagonal estimate over the full state
    Matrix constant_dense;                                 // dense alternative
    std::function<Vector(const StateVector&)> empirical;   // diagonal estimate refreshed by the chain
    int refresh_every = 50;

    static NoiseCompensation none_policy() { return {}; }
    static NoiseCompensation constant_diagonal(Vector diag) {
        NoiseCompensation c;
        c.kind = Kind::constant_estimate;
        c.constant_diag = std::move(diag);
        return c;
    }
    static NoiseCompensation constant_matrix(Matrix m) {
        NoiseCompensation c;
        c.kind = Kind::constant_estimate;
        c.constant_dense = std::move(m);
        return c;
    }
    static NoiseCompensation empirical_diagonal(std::function<Vector(const StateVector&)> fn,
                                                int refresh_every = 50) {
        NoiseCompensation c;
        c.kind = Kind::empirical;
        c.empirical = std::move(fn);
        c.refresh_every = refresh_every;
        return c;
    }

    bool active() const { return kind != Kind::none; }
    bool is_dense() const { return constant_dense.size() > 0; }
};

// Full description of a sampler: target energy plus the diffusion / curl
// pair that shapes its dynamics, a noise-compensation policy and a step
// schedule. Immutable after construction; chains share it freely.
struct SamplerSpec {
    EnergyModel model;
    MatrixField diffusion;
    MatrixField curl;
    NoiseCompensation compensation;
    StepSchedule schedule = StepSchedule::constant(1e-3);
    std::string name = "custom";

    void check() const {
        if (diffusion.structure() != FieldStructure::diffusion)
            throw config_error("SamplerSpec: diffusion field has wrong structure tag");
        if (curl.structure() != FieldStructure::curl)
            throw config_error("SamplerSpec: curl field has wrong structure tag");
        if (diffusion.dim() != model.dim() || curl.dim() != model.dim())
            throw dimension_error("SamplerSpec: field dimensions do not match model");
    }

    Eigen::Index dim() const { return model.dim(); }
};

// --- divergence correction ---------------------------------------------

// Gamma(z): component i sums the coordinate derivatives of row i of D + Q.
// This is the term that keeps exp(-H) stationary once the fields vary with
// state.
inline Vector gamma_correction(const MatrixField& diffusion, const MatrixField& curl,
                               const StateVector& z, const FieldContext& ctx = {}) {
    return diffusion.divergence(z, ctx) + curl.divergence(z, ctx);
}

// Deterministic drift f(z) = -[D(z) + Q(z)] grad H + Gamma(z).
inline Vector drift(const SamplerSpec& spec, const StateVector& z, const Vector& grad_h,
                    const FieldContext& ctx = {}) {
    if (grad_h.size() != spec.dim())
        throw dimension_error("drift: gradient dimension does not match spec");
    Vector applied = spec.diffusion.apply(z, ctx, grad_h) + spec.curl.apply(z, ctx, grad_h);
    return gamma_correction(spec.diffusion, spec.curl, z, ctx) - applied;
}

// --- noise factorization -------------------------------------------------

// Symmetric PSD square root with small negative eigenvalues clipped to zero;
// anything below -1e-10 is treated as a genuine PSD violation.
inline Matrix sqrt_psd(const Matrix& s, const char* what) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
    if (es.info() != Eigen::Success) throw numeric_error("sqrt_psd: eigendecomposition failed");
    Vector lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam[i] < -1e-10) throw step_error(std::string(what) + ": matrix is not PSD");
        lam[i] = lam[i] > 0.0 ? std::sqrt(lam[i]) : 0.0;
    }
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

inline Vector sqrt_psd_diagonal(const Vector& s, const char* what) {
    Vector out(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] < -1e-10) throw step_error(std::string(what) + ": diagonal entry is negative");
        out[i] = s[i] > 0.0 ? std::sqrt(s[i]) : 0.0;
    }
    return out;
}

namespace detail {

inline Vector compensation_diag(const NoiseCompensation& comp, const StateVector& z) {
    if (comp.kind == NoiseCompensation::Kind::empirical) return comp.empirical(z);
    if (comp.constant_diag.size() > 0) return comp.constant_diag;
    return Vector::Zero(z.dim());
}

// Draws the injected step noise N(0, eps (2 D - eps B)). Consumes exactly
// dim standard normals unless the diffusion field is identically zero, in
// which case it consumes none.
inline Vector step_noise(const SamplerSpec& spec, const StateVector& z, const FieldContext& ctx,
                         double eps, bool compensate, Rng& rng) {
    if (spec.diffusion.is_zero()) return Vector::Zero(z.dim());
    const bool dense_comp = compensate && spec.compensation.active() && spec.compensation.is_dense();
    if (spec.diffusion.is_diagonal() && !dense_comp) {
        Vector d = spec.diffusion.eval_diagonal(z, ctx);
        Vector cov = 2.0 * eps * d;
        if (compensate && spec.compensation.active())
            cov -= eps * eps * compensation_diag(spec.compensation, z);
        Vector scale;
        try {
            scale = sqrt_psd_diagonal(cov, "step noise covariance");
        } catch (const step_error&) {
            throw step_error(compensate
                                 ? "step noise covariance 2 eps D - eps^2 B lost positivity; "
                                   "use a smaller step size"
                                 : "diffusion matrix is not PSD at the current state");
        }
        return scale.cwiseProduct(standard_normal_vector(rng, z.dim()));
    }
    Matrix d = spec.diffusion.eval(z, ctx);
    Matrix cov = 2.0 * eps * d;
    if (compensate && spec.compensation.active()) {
        if (spec.compensation.is_dense())
            cov -= eps * eps * spec.compensation.constant_dense;
        else
            cov -= eps * eps * Matrix(compensation_diag(spec.compensation, z).asDiagonal());
    }
    Matrix scale;
    try {
        scale = sqrt_psd(cov, "step noise covariance");
    } catch (const step_error&) {
        throw step_error(compensate ? "step noise covariance 2 eps D - eps^2 B lost positivity; "
                                      "use a smaller step size"
                                    : "diffusion matrix is not PSD at the current state");
    }
    return scale * standard_normal_vector(rng, z.dim());
}

}  // namespace detail

// --- discretized update rules -------------------------------------------

// One Euler-Maruyama step with the exact full-data gradient:
//   z' = z + eps f(z) + N(0, 2 eps D(z)).
inline StateVector step_full_data(const SamplerSpec& spec, const StateVector& z, long long t,
                                  Rng& rng) {
    const double eps = spec.schedule.epsilon(t);
    Vector grad_h = spec.model.grad(z);
    FieldContext ctx;
    if (spec.diffusion.needs_potential() || spec.curl.needs_potential()) {
        ctx.potential = spec.model.potential(Vector(z.theta()));
        ctx.potential_grad = Vector(grad_h.head(spec.model.layout().theta_dim()));
    }
    Vector f = drift(spec, z, grad_h, ctx);
    Vector next = z.flat() + eps * f;
    next += detail::step_noise(spec, z, ctx, eps, /*compensate=*/false, rng);
    return StateVector(z.layout(), std::move(next));
}

// One step with a stochastic gradient estimate: same drift assembly, noise
// shrunk by the compensation policy to N(0, eps (2 D - eps B)).
inline StateVector step_minibatch(const SamplerSpec& spec, const StateVector& z, long long t,
                                  const Vector& noisy_grad_h, Rng& rng,
                                  std::optional<double> noisy_potential = std::nullopt) {
    const double eps = spec.schedule.epsilon(t);
    FieldContext ctx;
    ctx.potential = noisy_potential;
    if (spec.diffusion.needs_potential() || spec.curl.needs_potential())
        ctx.potential_grad = Vector(noisy_grad_h.head(spec.model.layout().theta_dim()));
    Vector f = drift(spec, z, noisy_grad_h, ctx);
    Vector next = z.flat() + eps * f;
    next += detail::step_noise(spec, z, ctx, eps, /*compensate=*/true, rng);
    return StateVector(z.layout(), std::move(next));
}

// --- structural validation ------------------------------------------------

struct ValidationIssue {
    enum class Kind { d_not_psd, q_not_skew, gamma_mismatch };
    Kind kind;
    int probe;
    double magnitude;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    int probes_checked = 0;

    bool passed() const { return issues.empty(); }

    std::string summary() const {
        if (passed()) return "ok (" + std::to_string(probes_checked) + " probe states)";
        std::string s;
        for (const auto& i : issues) {
            const char* k = i.kind == ValidationIssue::Kind::d_not_psd     ? "D not PSD"
                            : i.kind == ValidationIssue::Kind::q_not_skew ? "Q not skew-symmetric"
                                                                          : "Gamma mismatch";
            s += std::string(k) + " at probe " + std::to_string(i.probe) +
                 " (magnitude " + format_double(i.magnitude) + "); ";
        }
        return s;
    }
};

// Checks the structural hypotheses numerically at the probe states: D PSD,
// Q skew-symmetric, and (when an analytic divergence is installed) agreement
// with the finite-difference divergence.
inline ValidationReport validate_spec(const SamplerSpec& spec,
                                      const std::vector<StateVector>& probes) {
    if (probes.empty()) throw config_error("validate_spec: need at least one probe state");
    ValidationReport report;
    report.probes_checked = static_cast<int>(probes.size());
    for (int p = 0; p < static_cast<int>(probes.size()); ++p) {
        const StateVector& z = probes[p];
        Matrix d = spec.diffusion.eval(z);
        double asym = (d - d.transpose()).cwiseAbs().maxCoeff();
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (d + d.transpose()),
                                                 Eigen::EigenvaluesOnly);
        double min_eig = es.eigenvalues().minCoeff();
        if (min_eig < -1e-10 || asym > 1e-10)
            report.issues.push_back({ValidationIssue::Kind::d_not_psd, p,
                                     std::min(min_eig, -asym),
                                     "min eigenvalue " + format_double(min_eig)});

        Matrix q = spec.curl.eval(z);
        double skew = (q + q.transpose()).cwiseAbs().maxCoeff();
        if (skew > 1e-12)
            report.issues.push_back({ValidationIssue::Kind::q_not_skew, p, skew,
                                     "max |Q + Q^T| entry " + format_double(skew)});

        if (spec.diffusion.has_analytic_divergence() || spec.curl.has_analytic_divergence()) {
            Vector analytic = gamma_correction(spec.diffusion, spec.curl, z);
            Vector numeric = spec.diffusion.finite_difference_divergence(z) +
                             spec.curl.finite_difference_divergence(z);
            double scale = std::max(1.0, analytic.cwiseAbs().maxCoeff());
            double mismatch = (analytic - numeric).cwiseAbs().maxCoeff() / scale;
            if (mismatch > 1e-4)
                report.issues.push_back({ValidationIssue::Kind::gamma_mismatch, p, mismatch,
                                         "analytic vs finite-difference divergence"});
        }
    }
    return report;
}

}  // namespace sgmcmc
