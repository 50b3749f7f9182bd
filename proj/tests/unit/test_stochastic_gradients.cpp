#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "oracles.hpp"
#include "sgmcmc/minibatch.hpp"

using namespace sgmcmc;

namespace {

Dataset make_scalar_dataset(std::initializer_list<double> values) {
    Dataset data;
    for (double v : values) data.items.push_back(Vector::Constant(1, v));
    return data;
}

// x ~ N(theta, 1), flat prior: grad log p(x|theta) = x - theta
LikelihoodModel gaussian_location_model() {
    LikelihoodModel m;
    m.grad_log_likelihood = [](const Vector& x, const Vector& theta) {
        return Vector(x - theta);
    };
    m.log_likelihood = [](const Vector& x, const Vector& theta) {
        return -0.5 * (x - theta).squaredNorm();
    };
    return m;
}

Vector full_data_grad(const LikelihoodModel& model, const Vector& theta, const Dataset& data) {
    Minibatch all;
    all.indices.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) all.indices[i] = i;
    all.scale = 1.0;
    return stochastic_potential_grad(model, theta, data, all);
}

}  // namespace

TEST_CASE("full-size minibatch is the dataset itself with unit scale") {
    Dataset data = make_scalar_dataset({1.0, 2.0, 3.0, 4.0});
    Rng rng = make_rng(9);
    Minibatch batch = sample_minibatch(data, 4, rng);
    CHECK(batch.scale == 1.0);
    CHECK(batch.indices == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("minibatch sampling is uniform") {
    Dataset data = make_scalar_dataset({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    const int draws = 100000;
    Rng rng = make_rng(1234);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < draws; ++i) {
        Minibatch b = sample_minibatch(data, 1, rng);
        counts[b.indices[0]]++;
    }
    const double p = 0.1;
    const double se = std::sqrt(draws * p * (1.0 - p));
    for (int c : counts) CHECK(std::abs(c - draws * p) <= 3.0 * se);
}

TEST_CASE("seeded minibatch draws are reproducible") {
    Dataset data = make_scalar_dataset({0, 1, 2, 3, 4, 5, 6, 7});
    Rng a = make_rng(77), b = make_rng(77);
    for (int i = 0; i < 20; ++i) {
        CHECK(sample_minibatch(data, 3, a).indices == sample_minibatch(data, 3, b).indices);
    }
}

TEST_CASE("minibatch size is range-checked") {
    Dataset data = make_scalar_dataset({1.0, 2.0});
    Rng rng = make_rng(1);
    CHECK_THROWS_AS(sample_minibatch(data, 0, rng), config_error);
    CHECK_THROWS_AS(sample_minibatch(data, 3, rng), config_error);
}

TEST_CASE("stochastic gradient on the two-point Gaussian example") {
    // S = {1, 3}, S~ = {1}, theta = 0: grad ~U = -2 (x - theta) = -2
    Dataset data = make_scalar_dataset({1.0, 3.0});
    LikelihoodModel model = gaussian_location_model();
    Minibatch batch;
    batch.indices = {0};
    batch.scale = 2.0;
    Vector g = stochastic_potential_grad(model, Vector::Zero(1), data, batch);
    CHECK(g[0] == doctest::Approx(-2.0));
}

TEST_CASE("minibatch equal to the dataset reproduces the full gradient") {
    Dataset data = make_scalar_dataset({0.5, -1.0, 2.5});
    LikelihoodModel model = gaussian_location_model();
    Rng rng = make_rng(5);
    Minibatch batch = sample_minibatch(data, 3, rng);
    Vector theta = Vector::Constant(1, 0.3);
    CHECK(stochastic_potential_grad(model, theta, data, batch)[0] ==
          full_data_grad(model, theta, data)[0]);
}

TEST_CASE("gradient estimate is unbiased over exhaustive minibatches") {
    Dataset data = make_scalar_dataset({0.2, -0.7, 1.4, 2.2, -1.9});
    LikelihoodModel model = gaussian_location_model();
    Vector theta = Vector::Constant(1, 0.8);
    Vector target = full_data_grad(model, theta, data);

    for (std::size_t m = 1; m <= data.size(); ++m) {
        Vector sum = Vector::Zero(1);
        int count = 0;
        oracles::for_each_combination(data.size(), m, [&](const std::vector<std::size_t>& idx) {
            Minibatch batch;
            batch.indices = idx;
            batch.scale = static_cast<double>(data.size()) / static_cast<double>(m);
            sum += stochastic_potential_grad(model, theta, data, batch);
            ++count;
        });
        Vector avg = sum / count;
        CHECK(std::abs(avg[0] - target[0]) <= 1e-12);
    }
}

TEST_CASE("non-finite likelihood gradients name the item") {
    Dataset data = make_scalar_dataset({1.0, 2.0});
    LikelihoodModel model;
    model.grad_log_likelihood = [](const Vector& x, const Vector&) {
        return Vector::Constant(1, x[0] > 1.5 ? std::nan("") : 0.0);
    };
    Minibatch batch;
    batch.indices = {0, 1};
    batch.scale = 1.0;
    CHECK_THROWS_WITH_AS(stochastic_potential_grad(model, Vector::Zero(1), data, batch),
                         doctest::Contains("item 1"), numeric_error);
}

TEST_CASE("noise estimate on the two-outcome dataset") {
    // S = {-1, +1}, m = 1, theta = 0: per-draw gradients are +-2, so V = 4.
    Dataset data = make_scalar_dataset({-1.0, 1.0});
    LikelihoodModel model = gaussian_location_model();
    Rng rng = make_rng(31337);
    const int trials = 10000;
    NoiseEstimate est =
        estimate_gradient_noise(model, Vector::Zero(1), data, 1, trials, rng, false);
    CHECK(est.samples == trials);
    // Var(Vhat) = 32/n^2 for this two-point gradient distribution
    double sigma = std::sqrt(32.0) / trials;
    CHECK(std::abs(est.diagonal[0] - 4.0) <= 3.0 * sigma + 4.0 / trials);
    CHECK(std::abs(est.dense(0, 0) - est.diagonal[0]) < 1e-14);
}

TEST_CASE("full-size minibatch has zero gradient noise") {
    Dataset data = make_scalar_dataset({0.3, 1.2, -0.5});
    LikelihoodModel model = gaussian_location_model();
    Rng rng = make_rng(8);
    NoiseEstimate est = estimate_gradient_noise(model, Vector::Zero(1), data, 3, 50, rng);
    CHECK(est.diagonal.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("noise estimate matches brute-force enumeration and scales with m") {
    Dataset data = make_scalar_dataset({0.4, -1.1, 2.0, 0.9, -0.3, 1.6});
    LikelihoodModel model = gaussian_location_model();
    Vector theta = Vector::Constant(1, 0.1);
    Vector full = full_data_grad(model, theta, data);

    auto exact_variance = [&](std::size_t m) {
        double sum_sq = 0.0;
        int count = 0;
        oracles::for_each_combination(data.size(), m, [&](const std::vector<std::size_t>& idx) {
            Minibatch batch;
            batch.indices = idx;
            batch.scale = static_cast<double>(data.size()) / static_cast<double>(m);
            double g = stochastic_potential_grad(model, theta, data, batch)[0];
            sum_sq += (g - full[0]) * (g - full[0]);
            ++count;
        });
        return sum_sq / count;
    };

    const int trials = 20000;
    Rng rng = make_rng(606);
    for (std::size_t m : {std::size_t{1}, std::size_t{2}}) {
        NoiseEstimate est = estimate_gradient_noise(model, theta, data, m, trials, rng);
        double exact = exact_variance(m);
        CHECK(est.diagonal[0] == doctest::Approx(exact).epsilon(0.10));
    }
    CHECK(exact_variance(1) > exact_variance(2));  // noise shrinks with batch size
}

TEST_CASE("noise estimates are symmetric PSD") {
    Dataset data;
    Rng gen = make_rng(12);
    for (int i = 0; i < 12; ++i) data.items.push_back(standard_normal_vector(gen, 3));
    LikelihoodModel model;
    model.grad_log_likelihood = [](const Vector& x, const Vector& theta) {
        return Vector(x - theta);
    };
    Rng rng = make_rng(13);
    NoiseEstimate est =
        estimate_gradient_noise(model, Vector::Zero(3), data, 4, 200, rng, false);
    CHECK((est.dense - est.dense.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(est.dense, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);

    CHECK_THROWS_AS(estimate_gradient_noise(model, Vector::Zero(3), data, 4, 1, rng),
                    config_error);
}

TEST_CASE("scale times batch size recovers the dataset size") {
    Dataset data = make_scalar_dataset({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
    Rng rng = make_rng(2);
    for (std::size_t m = 1; m <= data.size(); ++m) {
        Minibatch b = sample_minibatch(data, m, rng);
        CHECK(b.scale == static_cast<double>(data.size()) / static_cast<double>(m));
        CHECK(b.scale * static_cast<double>(m) ==
              doctest::Approx(static_cast<double>(data.size())).epsilon(1e-15));
        CHECK(b.indices.size() == m);
        for (std::size_t i = 1; i < b.indices.size(); ++i)
            CHECK(b.indices[i - 1] < b.indices[i]);  // distinct and sorted
    }
}

TEST_CASE("dataset loader reads whitespace and comma rows") {
    const char* path = "test_dataset_tmp.txt";
    {
        std::ofstream out(path);
        out << "1.0 2.0\n";
        out << "3.5,4.5\n";
        out << "\n";
        out << "-1e-2 7\n";
    }
    Dataset data = load_dataset(path);
    CHECK(data.size() == 3);
    CHECK(data.obs_dim() == 2);
    CHECK(data.items[1][1] == doctest::Approx(4.5));
    CHECK(data.items[2][0] == doctest::Approx(-0.01));
    std::remove(path);
}

TEST_CASE("dataset loader reports malformed rows") {
    const char* path = "test_dataset_bad_tmp.txt";
    {
        std::ofstream out(path);
        out << "1.0 2.0\n";
        out << "3.0 oops\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("line 2"), parse_error);
    std::remove(path);

    {
        std::ofstream out(path);
        out << "1.0 2.0\n";
        out << "3.0\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("line 2"), parse_error);
    std::remove(path);

    CHECK_THROWS_AS(load_dataset("no_such_file_anywhere.txt"), config_error);
}
