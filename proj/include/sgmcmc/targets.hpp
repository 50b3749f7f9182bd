#pragma once

#include <string>

#include "sgmcmc/energy.hpp"

namespace sgmcmc {

// Benchmark target distributions, defined through their potentials:
//   one-peak       U(t) = t^2 / 2                                (1-D)
//   two-peaks      U(t) = t^4 - 2 t^2                            (1-D, modes at +-1)
//   correlated-2d  U(t1,t2) = t1^4/10 + (4(t2+1.2) - t1^2)^2/2   (2-D banana)
//   gaussian-nd    U(t) = (t-mu)' Sigma^{-1} (t-mu) / 2

struct GaussianParams {
    Vector mean;
    Matrix covariance;
};

inline EnergyModel make_one_peak(Eigen::Index r_dim = 0, Eigen::Index xi_dim = 0) {
    BlockLayout layout(1, r_dim, xi_dim);
    return EnergyModel(
        layout, [](const Vector& t) { return 0.5 * t[0] * t[0]; },
        [](const Vector& t) { return Vector::Constant(1, t[0]); });
}

inline EnergyModel make_two_peaks(Eigen::Index r_dim = 0, Eigen::Index xi_dim = 0) {
    BlockLayout layout(1, r_dim, xi_dim);
    return EnergyModel(
        layout,
        [](const Vector& t) {
            double x = t[0];
            return x * x * x * x - 2.0 * x * x;
        },
        [](const Vector& t) {
            double x = t[0];
            return Vector::Constant(1, 4.0 * x * x * x - 4.0 * x);
        });
}

inline EnergyModel make_correlated_2d(Eigen::Index r_dim = 0) {
    BlockLayout layout(2, r_dim, 0);
    return EnergyModel(
        layout,
        [](const Vector& t) {
            double a = t[0], b = t[1];
            double ridge = 4.0 * (b + 1.2) - a * a;
            return a * a * a * a / 10.0 + 0.5 * ridge * ridge;
        },
        [](const Vector& t) {
            double a = t[0], b = t[1];
            double ridge = 4.0 * (b + 1.2) - a * a;
            Vector g(2);
            g[0] = 0.4 * a * a * a + ridge * (-2.0 * a);
            g[1] = ridge * 4.0;
            return g;
        });
}

inline EnergyModel make_gaussian_nd(const GaussianParams& params, Eigen::Index r_dim = 0,
                                    Eigen::Index xi_dim = 0) {
    const Eigen::Index d = params.mean.size();
    if (params.covariance.rows() != d || params.covariance.cols() != d)
        throw config_error("gaussian-nd: covariance shape does not match mean");
    Eigen::LLT<Matrix> llt(params.covariance);
    if (llt.info() != Eigen::Success)
        throw config_error("gaussian-nd: covariance is not positive definite");
    Matrix precision = llt.solve(Matrix::Identity(d, d));
    Vector mean = params.mean;
    BlockLayout layout(d, r_dim, xi_dim);
    return EnergyModel(
        layout,
        [mean, precision](const Vector& t) {
            Vector c = t - mean;
            return 0.5 * c.dot(precision * c);
        },
        [mean, precision](const Vector& t) { return Vector(precision * (t - mean)); });
}

// Exact potential minima of the named targets. Potentials are defined only
// up to an additive constant; anything that is not shift-invariant (the
// potential-level metric) anchors them here so that the wells sit at zero.
inline double potential_minimum(const std::string& name) {
    if (name == "one-peak") return 0.0;
    if (name == "two-peaks") return -1.0;
    if (name == "correlated-2d") return 0.0;
    throw config_error("unknown synthetic target: " + name);
}

inline EnergyModel make_synthetic_target(const std::string& name, Eigen::Index r_dim = 0,
                                         Eigen::Index xi_dim = 0,
                                         const GaussianParams* params = nullptr) {
    if (name == "one-peak") return make_one_peak(r_dim, xi_dim);
    if (name == "two-peaks") return make_two_peaks(r_dim, xi_dim);
    if (name == "correlated-2d") return make_correlated_2d(r_dim);
    if (name == "gaussian-nd") {
        if (!params) throw config_error("gaussian-nd target requires mean/covariance parameters");
        return make_gaussian_nd(*params, r_dim, xi_dim);
    }
    throw config_error("unknown synthetic target: " + name);
}

}  // namespace sgmcmc
