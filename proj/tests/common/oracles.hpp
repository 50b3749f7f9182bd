// Independent oracles for the test suites: hand-coded update rules written
// straight from their one-line definitions, brute-force enumeration helpers
// and small statistics utilities. Nothing here may call into the generic
// sampler engine.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "sgmcmc/common.hpp"
#include "sgmcmc/random.hpp"

namespace oracles {

using sgmcmc::Matrix;
using sgmcmc::Rng;
using sgmcmc::Vector;

// ---- hand-coded sampler updates ------------------------------------------
// Each update consumes noise that the caller pre-draws with the engine's
// convention (one standard normal vector of the full state dimension per
// step), so engine and oracle can share a stream.

struct HmcState {
    Vector theta;
    Vector r;
};

inline HmcState hmc_euler(const HmcState& s, const Vector& grad_u, const Vector& mass_inv_diag,
                          double eps) {
    HmcState out;
    out.theta = s.theta + eps * mass_inv_diag.cwiseProduct(s.r);
    out.r = s.r - eps * grad_u;
    return out;
}

// grad_u is evaluated by the caller at the points the leapfrog needs.
inline HmcState hmc_leapfrog(const HmcState& s,
                             const std::function<Vector(const Vector&)>& grad_u,
                             const Vector& mass_inv_diag, double eps) {
    HmcState out;
    Vector r_half = s.r - 0.5 * eps * grad_u(s.theta);
    out.theta = s.theta + eps * mass_inv_diag.cwiseProduct(r_half);
    out.r = r_half - 0.5 * eps * grad_u(out.theta);
    return out;
}

inline HmcState sghmc(const HmcState& s, const Vector& noisy_grad_u, const Vector& c_diag,
                      const Vector& mass_inv_diag, const Vector& bhat_diag, double eps,
                      const Vector& xi_full) {
    const Eigen::Index d = s.theta.size();
    HmcState out;
    out.theta = s.theta + eps * mass_inv_diag.cwiseProduct(s.r);
    Vector noise_sd = (eps * (2.0 * c_diag - eps * bhat_diag)).cwiseSqrt();
    out.r = s.r - eps * noisy_grad_u - eps * c_diag.cwiseProduct(mass_inv_diag.cwiseProduct(s.r)) +
            noise_sd.cwiseProduct(xi_full.segment(d, d));
    return out;
}

inline HmcState naive_sghmc(const HmcState& s, const Vector& noisy_grad_u,
                            const Vector& mass_inv_diag, double eps) {
    HmcState out;
    out.theta = s.theta + eps * mass_inv_diag.cwiseProduct(s.r);
    out.r = s.r - eps * noisy_grad_u;
    return out;
}

inline Vector sgld(const Vector& theta, const Vector& noisy_grad_u, const Vector& d_diag,
                   double eps, const Vector& xi) {
    return theta - eps * d_diag.cwiseProduct(noisy_grad_u) +
           (2.0 * eps * d_diag).cwiseSqrt().cwiseProduct(xi);
}

// Riemannian Langevin with diagonal metric inverse g_inv(theta) and its
// coordinate-wise derivative correction gamma(theta).
inline Vector sgrld(const Vector& theta, const Vector& noisy_grad_u, const Vector& g_inv_diag,
                    const Vector& gamma, double eps, const Vector& xi) {
    return theta - eps * g_inv_diag.cwiseProduct(noisy_grad_u) + eps * gamma +
           (2.0 * eps * g_inv_diag).cwiseSqrt().cwiseProduct(xi);
}

struct SgnhtState {
    Vector theta;
    Vector r;
    double xi_var;
};

// Three-line thermostat system, scalar-theta form (d = 1).
inline SgnhtState sgnht(const SgnhtState& s, const Vector& noisy_grad_u, double a, double bhat,
                        double eps, const Vector& xi_full) {
    const Eigen::Index d = s.theta.size();
    SgnhtState out;
    out.theta = s.theta + eps * s.r;
    Vector noise_sd = Vector::Constant(d, std::sqrt(eps * (2.0 * a - eps * bhat)));
    out.r = s.r - eps * noisy_grad_u - eps * s.xi_var * s.r +
            noise_sd.cwiseProduct(xi_full.segment(d, d));
    double dd = static_cast<double>(d);
    out.xi_var = s.xi_var + eps * (s.r.dot(s.r) / dd - 1.0);
    return out;
}

// Generalized Riemann Hamiltonian update with diagonal metric:
//   theta' = theta + eps g r
//   r'     = r - eps g grad~U + eps corr - eps g_inv r + N(0, eps (2 g_inv - eps Bhat))
// where g = G^{-1/2} and corr_i = d g_i / d theta_i.
inline HmcState gsgrhmc(const HmcState& s, const Vector& noisy_grad_u, const Vector& g_sqrt_inv,
                        const Vector& g_inv, const Vector& correction, const Vector& bhat_diag,
                        double eps, const Vector& xi_full) {
    const Eigen::Index d = s.theta.size();
    HmcState out;
    out.theta = s.theta + eps * g_sqrt_inv.cwiseProduct(s.r);
    Vector noise_sd = (eps * (2.0 * g_inv - eps * bhat_diag)).cwiseSqrt();
    out.r = s.r - eps * g_sqrt_inv.cwiseProduct(noisy_grad_u) + eps * correction -
            eps * g_inv.cwiseProduct(s.r) + noise_sd.cwiseProduct(xi_full.segment(d, d));
    return out;
}

// Same but without the metric-derivative correction: the broken variant.
inline HmcState naive_sgrhmc(const HmcState& s, const Vector& noisy_grad_u,
                             const Vector& g_sqrt_inv, const Vector& g_inv,
                             const Vector& bhat_diag, double eps, const Vector& xi_full) {
    const Eigen::Index d = s.theta.size();
    HmcState out;
    out.theta = s.theta + eps * g_sqrt_inv.cwiseProduct(s.r);
    Vector noise_sd = (eps * (2.0 * g_inv - eps * bhat_diag)).cwiseSqrt();
    out.r = s.r - eps * g_sqrt_inv.cwiseProduct(noisy_grad_u) - eps * g_inv.cwiseProduct(s.r) +
            noise_sd.cwiseProduct(xi_full.segment(d, d));
    return out;
}

// ---- enumeration ----------------------------------------------------------

// Calls fn with every size-m index subset of {0,...,n-1}, lexicographically.
inline void for_each_combination(std::size_t n, std::size_t m,
                                 const std::function<void(const std::vector<std::size_t>&)>& fn) {
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    while (true) {
        fn(idx);
        std::size_t i = m;
        while (i > 0) {
            --i;
            if (idx[i] != i + n - m) break;
            if (i == 0) return;
        }
        ++idx[i];
        for (std::size_t j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
    }
}

// ---- statistics helpers ---------------------------------------------------

inline double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double variance(const std::vector<double>& xs) {
    double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

inline std::vector<double> ar1_series(double rho, std::size_t n, Rng& rng) {
    std::vector<double> xs(n);
    double x = 0.0;
    double innovation_sd = std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < n; ++i) {
        x = rho * x + innovation_sd * sgmcmc::standard_normal(rng);
        xs[i] = x;
    }
    return xs;
}

}  // namespace oracles
