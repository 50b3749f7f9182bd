#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sgmcmc/common.hpp"
#include "sgmcmc/random.hpp"

namespace sgmcmc {

// Observed dataset: an ordered collection of fixed-dimension observations.
// Order is stable so that seeded runs are reproducible.
struct Dataset {
    std::vector<Vector> items;

    std::size_t size() const { return items.size(); }
    Eigen::Index obs_dim() const { return items.empty() ? 0 : items.front().size(); }
};

// Loads one observation per row; values separated by whitespace or commas.
inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("dataset file not found: " + path);
    Dataset data;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        for (char& ch : line)
            if (ch == ',') ch = ' ';
        std::istringstream row(line);
        std::vector<double> vals;
        double v;
        while (row >> v) vals.push_back(v);
        if (!row.eof())
            throw parse_error("dataset parse error at line " + std::to_string(line_no));
        if (vals.empty()) continue;
        Vector obs(static_cast<Eigen::Index>(vals.size()));
        for (std::size_t i = 0; i < vals.size(); ++i) obs[static_cast<Eigen::Index>(i)] = vals[i];
        if (!data.items.empty() && obs.size() != data.obs_dim())
            throw parse_error("dataset dimension changes at line " + std::to_string(line_no));
        data.items.push_back(std::move(obs));
    }
    return data;
}

struct Minibatch {
    std::vector<std::size_t> indices;
    double scale = 1.0;  // |S| / |indices|
};

// Uniform subset of size m without replacement. Indices are returned sorted
// so accumulation order does not depend on the draw order.
inline Minibatch sample_minibatch(const Dataset& data, std::size_t m, Rng& rng) {
    const std::size_t n = data.size();
    if (m < 1 || m > n) throw config_error("sample_minibatch: size out of range");
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    Minibatch batch;
    batch.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(batch.indices.begin(), batch.indices.end());
    batch.scale = static_cast<double>(n) / static_cast<double>(m);
    return batch;
}

// Observation model for the potential U(theta) = -sum log p(x|theta) - log p(theta).
// The value callables are optional; they are only needed when a sampler's
// metric wants the (minibatch) potential itself.
struct LikelihoodModel {
    std::function<Vector(const Vector& x, const Vector& theta)> grad_log_likelihood;
    std::function<double(const Vector& x, const Vector& theta)> log_likelihood;
    std::function<Vector(const Vector& theta)> grad_log_prior;  // null => flat prior
    std::function<double(const Vector& theta)> log_prior;
};

// grad ~U(theta) = -(|S|/|S~|) sum_{x in S~} grad log p(x|theta) - grad log p(theta)
inline Vector stochastic_potential_grad(const LikelihoodModel& model, const Vector& theta,
                                        const Dataset& data, const Minibatch& batch) {
    if (batch.indices.empty()) throw config_error("stochastic_potential_grad: empty minibatch");
    Vector sum = Vector::Zero(theta.size());
    for (std::size_t idx : batch.indices) {
        Vector g = model.grad_log_likelihood(data.items.at(idx), theta);
        if (!all_finite(g))
            throw numeric_error("non-finite log-likelihood gradient at item " +
                                std::to_string(idx));
        sum += g;
    }
    Vector grad = -batch.scale * sum;
    if (model.grad_log_prior) grad -= model.grad_log_prior(theta);
    return grad;
}

// ~U(theta) itself, for potential-level metrics.
inline double stochastic_potential_value(const LikelihoodModel& model, const Vector& theta,
                                         const Dataset& data, const Minibatch& batch) {
    if (!model.log_likelihood)
        throw config_error("stochastic_potential_value: model has no log-likelihood callable");
    double sum = 0.0;
    for (std::size_t idx : batch.indices) sum += model.log_likelihood(data.items.at(idx), theta);
    double u = -batch.scale * sum;
    if (model.log_prior) u -= model.log_prior(theta);
    return u;
}

// Empirical covariance V(theta) of the stochastic gradient at a fixed theta.
struct NoiseEstimate {
    Matrix dense;      // empty when diagonal-only
    Vector diagonal;   // always populated
    int samples = 0;

    bool is_diagonal_only() const { return dense.size() == 0; }
};

inline NoiseEstimate estimate_gradient_noise(const LikelihoodModel& model, const Vector& theta,
                                             const Dataset& data, std::size_t m, int trials,
                                             Rng& rng, bool diagonal_only = false) {
    if (trials < 2) throw config_error("estimate_gradient_noise: need at least 2 trials");
    const Eigen::Index d = theta.size();
    if (d > 100) diagonal_only = true;  // dense d x d is noisy and expensive at high dimension

    std::vector<Vector> draws;
    draws.reserve(static_cast<std::size_t>(trials));
    Vector mean = Vector::Zero(d);
    for (int i = 0; i < trials; ++i) {
        Minibatch batch = sample_minibatch(data, m, rng);
        draws.push_back(stochastic_potential_grad(model, theta, data, batch));
        mean += draws.back();
    }
    mean /= static_cast<double>(trials);

    NoiseEstimate est;
    est.samples = trials;
    est.diagonal = Vector::Zero(d);
    if (!diagonal_only) est.dense = Matrix::Zero(d, d);
    for (const Vector& g : draws) {
        Vector c = g - mean;
        est.diagonal += c.cwiseProduct(c);
        if (!diagonal_only) est.dense += c * c.transpose();
    }
    est.diagonal /= static_cast<double>(trials - 1);
    if (!diagonal_only) est.dense /= static_cast<double>(trials - 1);
    return est;
}

}  // namespace sgmcmc
