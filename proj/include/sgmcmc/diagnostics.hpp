#pragma once

#include <complex>
#include <limits>
#include <vector>

#include "sgmcmc/chain.hpp"
#include "sgmcmc/energy.hpp"

namespace sgmcmc {

namespace detail {

// Iterative radix-2 FFT, in place. Enough for autocovariance via the
// Wiener-Khinchin route; no external dependency wanted for this.
inline void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

// Autocorrelation rho_0..rho_{max_lag} of a centered series.
inline std::vector<double> autocorrelation(const std::vector<double>& xs, std::size_t max_lag) {
    const std::size_t n = xs.size();
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(n);

    std::size_t fft_n = 1;
    while (fft_n < 2 * n) fft_n <<= 1;
    std::vector<std::complex<double>> a(fft_n, {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) a[i] = xs[i] - mean;
    fft(a, false);
    for (auto& x : a) x = x * std::conj(x);
    fft(a, true);

    double c0 = a[0].real();
    if (!(c0 > 0.0)) return {};  // zero variance
    // biased (n-denominator) estimator, the standard choice for integrated time
    std::vector<double> rho(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag && k < n; ++k) rho[k] = a[k].real() / c0;
    return rho;
}

}  // namespace detail

// Integrated autocorrelation time tau = 1 + 2 sum rho_k, truncated where the
// paired-sum sequence Gamma_m = rho_{2m} + rho_{2m+1} first turns negative.
// A flat series has no scale to mix on: returns +infinity.
inline double autocorrelation_time(const std::vector<double>& series, std::size_t max_lag) {
    if (series.size() < 10 * max_lag)
        throw config_error("autocorrelation_time: series must be at least 10x the max lag");
    for (double x : series)
        if (!std::isfinite(x)) throw numeric_error("autocorrelation_time: non-finite sample");

    double mean = 0.0;
    for (double x : series) mean += x;
    mean /= static_cast<double>(series.size());
    double var = 0.0;
    for (double x : series) var += (x - mean) * (x - mean);
    var /= static_cast<double>(series.size());
    if (var <= 1e-14 * std::max(1.0, mean * mean))
        return std::numeric_limits<double>::infinity();  // flat series never decorrelates

    std::vector<double> rho = detail::autocorrelation(series, max_lag);
    if (rho.empty()) return std::numeric_limits<double>::infinity();

    double tau = -1.0;  // -rho_0 + 2 sum of positive pairs, rho_0 = 1
    for (std::size_t m = 0; 2 * m + 1 < rho.size(); ++m) {
        double pair = rho[2 * m] + rho[2 * m + 1];
        if (pair <= 0.0) break;
        tau += 2.0 * pair;
    }
    return std::max(tau, 1e-12);
}

inline double autocorrelation_time(const Trace& trace, std::size_t max_lag,
                                   Eigen::Index component = 0) {
    std::vector<double> xs;
    xs.reserve(trace.size());
    for (const Vector& t : trace.theta) xs.push_back(t[component]);
    return autocorrelation_time(xs, max_lag);
}

// --- histogram KL -----------------------------------------------------------

struct KlResult {
    double value = 0.0;
    bool sparse_histogram_warning = false;
};

// KL between two discrete distributions over the same bins. Zero empirical
// bins contribute zero; the reference must be positive wherever the
// empirical mass is.
inline double kl_between_histograms(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw dimension_error("kl_between_histograms: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0) throw numeric_error("kl_between_histograms: reference bin is empty");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

// Per-bin masses of the normalized density exp(-U) over [lo, hi], computed
// by fine trapezoid quadrature inside each bin.
namespace detail {
// exp(-U) with out-of-support points (non-finite U) contributing zero mass
inline double unnormalized_density(const EnergyModel& target, double x) {
    double u = target.potential(Vector::Constant(1, x));
    if (!std::isfinite(u)) return 0.0;
    return std::exp(-u);
}
}  // namespace detail

inline std::vector<double> target_bin_masses(const EnergyModel& target, double lo, double hi,
                                             int bins, int sub = 32) {
    std::vector<double> mass(static_cast<std::size_t>(bins), 0.0);
    const double width = (hi - lo) / bins;
    double total = 0.0;
    for (int b = 0; b < bins; ++b) {
        double a = lo + b * width;
        double acc = 0.0;
        for (int s = 0; s <= sub; ++s) {
            double x = a + width * static_cast<double>(s) / sub;
            double w = (s == 0 || s == sub) ? 0.5 : 1.0;
            acc += w * detail::unnormalized_density(target, x);
        }
        mass[static_cast<std::size_t>(b)] = acc * width / sub;
        total += mass[static_cast<std::size_t>(b)];
    }
    for (double& m : mass) m /= total;
    return mass;
}

// KL(empirical-histogram || normalized exp(-U)) for a scalar chain.
// The support box must hold essentially all target mass; the empirical
// histogram gets 1/(n*bins) pseudo-mass per bin.
inline KlResult kl_divergence(const Trace& trace, const EnergyModel& target, int bins, double lo,
                              double hi) {
    if (trace.theta_dim != 1)
        throw config_error("kl_divergence: histogram comparison is for scalar chains");
    if (trace.size() < 1000) throw config_error("kl_divergence: need at least 1000 samples");
    if (bins < 2) throw config_error("kl_divergence: need at least 2 bins");

    // the box must cover the target: compare box mass against a 3x wider box
    {
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        const EnergyModel& t = target;
        auto mass = [&](double a, double b) {
            const int n = 3000;
            double acc = 0.0;
            for (int s = 0; s <= n; ++s) {
                double x = a + (b - a) * static_cast<double>(s) / n;
                double w = (s == 0 || s == n) ? 0.5 : 1.0;
                acc += w * detail::unnormalized_density(t, x);
            }
            return acc * (b - a) / n;
        };
        double inner = mass(lo, hi);
        double outer = mass(mid - 3.0 * half, mid + 3.0 * half);
        if (inner / outer < 0.999)
            throw config_error("kl_divergence: support box misses more than 0.1% of target mass");
    }

    const std::size_t n = trace.size();
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    const double width = (hi - lo) / bins;
    for (const Vector& t : trace.theta) {
        double x = t[0];
        int b = static_cast<int>(std::floor((x - lo) / width));
        if (b < 0) b = 0;
        if (b >= bins) b = bins - 1;
        counts[static_cast<std::size_t>(b)] += 1.0;
    }

    std::vector<double> target_mass = target_bin_masses(target, lo, hi, bins);

    // sparse-histogram warning: most of the bins the target cares about are empty
    int mass_cells = 0, empty_mass_cells = 0;
    for (int b = 0; b < bins; ++b) {
        if (target_mass[static_cast<std::size_t>(b)] >= 0.1 / bins) {
            ++mass_cells;
            if (counts[static_cast<std::size_t>(b)] == 0.0) ++empty_mass_cells;
        }
    }

    const double pseudo = 1.0 / (static_cast<double>(n) * bins);
    std::vector<double> emp(static_cast<std::size_t>(bins));
    double z = 0.0;
    for (int b = 0; b < bins; ++b) {
        emp[static_cast<std::size_t>(b)] = counts[static_cast<std::size_t>(b)] / n + pseudo;
        z += emp[static_cast<std::size_t>(b)];
    }
    for (double& e : emp) e /= z;

    KlResult result;
    result.value = kl_between_histograms(emp, target_mass);
    result.sparse_histogram_warning = mass_cells > 0 && empty_mass_cells * 2 > mass_cells;
    return result;
}

// --- moment helpers -----------------------------------------------------------

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double variance_of(const std::vector<double>& xs) {
    double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

// Standard error of the chain mean by batch means; robust to autocorrelation.
inline double batch_means_se(const std::vector<double>& xs, int n_batches = 50) {
    const std::size_t n = xs.size();
    if (n < static_cast<std::size_t>(2 * n_batches))
        throw config_error("batch_means_se: series too short");
    const std::size_t batch = n / static_cast<std::size_t>(n_batches);
    std::vector<double> means;
    means.reserve(static_cast<std::size_t>(n_batches));
    for (int b = 0; b < n_batches; ++b) {
        double s = 0.0;
        for (std::size_t i = static_cast<std::size_t>(b) * batch;
             i < static_cast<std::size_t>(b + 1) * batch; ++i)
            s += xs[i];
        means.push_back(s / static_cast<double>(batch));
    }
    return std::sqrt(variance_of(means) / static_cast<double>(n_batches));
}

inline std::vector<double> component_series(const Trace& trace, Eigen::Index component) {
    std::vector<double> xs;
    xs.reserve(trace.size());
    for (const Vector& t : trace.theta) xs.push_back(t[component]);
    return xs;
}

}  // namespace sgmcmc
