#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sgmcmc/chain.hpp"
#include "sgmcmc/diagnostics.hpp"
#include "sgmcmc/fokker_planck.hpp"
#include "sgmcmc/targets.hpp"

using namespace sgmcmc;

namespace {

// Exact-from-target sampler: numeric inverse CDF on a fine grid.
std::vector<double> inverse_cdf_samples(const EnergyModel& target, double lo, double hi,
                                        std::size_t n, Rng& rng) {
    const int m = 20000;
    std::vector<double> x(m + 1), cdf(m + 1, 0.0);
    for (int i = 0; i <= m; ++i) x[i] = lo + (hi - lo) * i / m;
    for (int i = 1; i <= m; ++i) {
        double a = std::exp(-target.potential(Vector::Constant(1, x[i - 1])));
        double b = std::exp(-target.potential(Vector::Constant(1, x[i])));
        cdf[i] = cdf[i - 1] + 0.5 * (a + b) * (x[i] - x[i - 1]);
    }
    for (double& c : cdf) c /= cdf[m];
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> samples(n);
    for (std::size_t k = 0; k < n; ++k) {
        double u = unif(rng);
        auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        std::size_t j = std::max<std::ptrdiff_t>(1, it - cdf.begin());
        double t = (u - cdf[j - 1]) / std::max(1e-300, cdf[j] - cdf[j - 1]);
        samples[k] = x[j - 1] + t * (x[j] - x[j - 1]);
    }
    return samples;
}

Trace trace_from(const std::vector<double>& xs) {
    Trace t;
    t.theta_dim = 1;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        t.steps.push_back(static_cast<long long>(k));
        t.epsilons.push_back(0.0);
        t.theta.push_back(Vector::Constant(1, xs[k]));
    }
    return t;
}

SamplerSetup sghmc_2d_system(double c) {
    PresetConfig config;
    config.epsilon = 0.05;
    Vector friction(1);
    friction << c;
    config.friction_diag = friction;
    config.resample_period = 0;
    return make_sghmc(config, make_one_peak());
}

}  // namespace

// ---- grids -------------------------------------------------------------------

TEST_CASE("grid densities normalize to unit mass") {
    Grid g = Grid::line(-6.0, 6.0, 2001);
    GridDensity p;
    p.values = sample_scalar(g, std::function<double(double)>(
                                    [](double x) { return std::exp(-0.5 * x * x); }));
    p.normalize();
    CHECK(std::abs(integrate(p.values) - 1.0) <= 1e-8);
    CHECK(p.normalized);

    CHECK_THROWS_AS(Grid::line(0.0, 1.0, 4), config_error);
}

// ---- direct operator -----------------------------------------------------------

TEST_CASE("direct rate of a frozen system is zero") {
    Grid g = Grid::line(-3.0, 3.0, 101);
    VectorFieldGrid f(g);
    MatrixFieldGrid d(g);
    GridScalar p = sample_scalar(g, std::function<double(double)>(
                                        [](double x) { return std::exp(-0.5 * x * x); }));
    GridScalar out = fp_rhs_direct(f, d, p);
    CHECK(sup_norm(out, 1) == 0.0);
}

TEST_CASE("the 1-D linear-drift unit-diffusion pair holds its gaussian steady") {
    Grid g = Grid::line(-4.0, 4.0, 801);  // h = 0.01
    VectorFieldGrid f(g);
    MatrixFieldGrid d(g);
    f.comp[0] = sample_scalar(g, std::function<double(double)>([](double x) { return -x; }));
    d.entry(0, 0) = sample_scalar(g, std::function<double(double)>([](double) { return 1.0; }));
    GridScalar p = sample_scalar(g, std::function<double(double)>([](double x) {
                                     return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
                                 }));
    GridScalar out = fp_rhs_direct(f, d, p);
    CHECK(sup_norm(out, 1) <= 1e-3);
}

TEST_CASE("pure constant advection matches the analytic derivative") {
    Grid g = Grid::line(-4.0, 4.0, 801);
    const double c = 0.7;
    VectorFieldGrid f(g);
    MatrixFieldGrid d(g);
    f.comp[0] = sample_scalar(g, std::function<double(double)>([c](double) { return c; }));
    GridScalar p = sample_scalar(g, std::function<double(double)>([](double x) {
                                     return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
                                 }));
    GridScalar out = fp_rhs_direct(f, d, p);
    // -c dp/dx = c x p
    double worst = 0.0;
    for (Eigen::Index i = 1; i + 1 < g.axes[0].n; ++i) {
        double x = g.axes[0].coord(i);
        double expected = c * x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        worst = std::max(worst, std::abs(out.at(i) - expected));
    }
    CHECK(worst <= 1e-4);  // O(h^2)
}

// ---- compact operator ----------------------------------------------------------

TEST_CASE("compact rate vanishes on the boltzmann density") {
    SamplerSetup sgld = make_sgld(PresetConfig{}, make_one_peak());
    Grid g = Grid::line(-4.0, 4.0, 801);
    CHECK(stationarity_residual(sgld.spec, g) <= 1e-3);
}

TEST_CASE("compact equals direct once the drift is assembled from the fields") {
    SamplerSetup sghmc = sghmc_2d_system(0.5);
    Grid g = Grid::square(-3.0, 3.0, 601);  // h = 0.01

    GridDensity p = boltzmann_density(sghmc.spec, g);
    GridScalar h = energy_on_grid(sghmc.spec, g);
    MatrixFieldGrid d = field_on_grid(sghmc.spec.diffusion, sghmc.spec.model.layout(), g);
    MatrixFieldGrid q = field_on_grid(sghmc.spec.curl, sghmc.spec.model.layout(), g);
    VectorFieldGrid f = drift_on_grid(sghmc.spec, g);

    GridScalar direct = fp_rhs_direct(f, d, p.values);
    GridScalar compact = fp_rhs_compact(d, q, h, p.values);
    GridScalar gap(g);
    for (std::size_t k = 0; k < gap.v.size(); ++k) gap.v[k] = direct.v[k] - compact.v[k];
    CHECK(sup_norm(gap, 2) <= 1e-3);
}

TEST_CASE("pure rotation conserves probability on an offset gaussian") {
    Grid g = Grid::square(-5.0, 5.0, 501);  // h = 0.02 keeps this quick
    MatrixFieldGrid d(g);
    MatrixFieldGrid q(g);
    q.entry(0, 1) = sample_scalar(g, std::function<double(double, double)>(
                                         [](double, double) { return -1.0; }));
    q.entry(1, 0) = sample_scalar(g, std::function<double(double, double)>(
                                         [](double, double) { return 1.0; }));
    GridScalar h = sample_scalar(g, std::function<double(double, double)>([](double x, double y) {
                                     return 0.5 * (x * x + y * y);
                                 }));
    GridDensity p;
    p.values = sample_scalar(g, std::function<double(double, double)>([](double x, double y) {
                                 return std::exp(-0.5 * ((x - 0.5) * (x - 0.5) + y * y));
                             }));
    p.normalize();
    GridScalar out = fp_rhs_compact(d, q, h, p.values);
    CHECK(sup_norm(out, 2) > 1e-3);             // genuinely nonzero rotation flux
    CHECK(std::abs(integrate(out)) <= 1e-6);    // but no net probability created
}

// ---- stationarity residuals -----------------------------------------------------

TEST_CASE("liouville case: deterministic hamiltonian flow is stationary") {
    PresetConfig config;
    config.integrator = Integrator::euler;
    SamplerSetup hmc = make_hmc(config, make_one_peak());
    Grid g = Grid::square(-4.0, 4.0, 401);
    CHECK(stationarity_residual(hmc.spec, g) <= 1e-3);
    CHECK(stationarity_residual_direct(hmc.spec, g) <= 1e-3);
}

TEST_CASE("broken skew pair leaves a visible direct-form residual") {
    SamplerSetup hmc = [] {
        PresetConfig config;
        config.integrator = Integrator::euler;
        return make_hmc(config, make_one_peak());
    }();
    SamplerSpec broken = hmc.spec;
    Matrix q(2, 2);
    q << 0.0, -1.0, 0.5, 0.0;
    broken.curl = MatrixField::constant(q, FieldStructure::curl);

    Grid g = Grid::square(-4.0, 4.0, 401);
    CHECK(stationarity_residual_direct(broken, g) >= 0.1);
}

TEST_CASE("dimension cap on grid checks is enforced") {
    PresetConfig config;
    config.thermostat_a = 1.0;
    SamplerSetup sgnht = make_sgnht(config, make_one_peak());
    Grid g = Grid::square(-3.0, 3.0, 101);
    CHECK_THROWS_AS(stationarity_residual(sgnht.spec, g), config_error);
}

// ---- constructive curl recovery ------------------------------------------------

namespace {

struct ReconstructionCase {
    VectorFieldGrid f;
    MatrixFieldGrid d;
    GridDensity p;
};

ReconstructionCase hamiltonian_gaussian_case(const Grid& g) {
    ReconstructionCase c{VectorFieldGrid(g), MatrixFieldGrid(g), GridDensity{}};
    c.f.comp[0] = sample_scalar(g, std::function<double(double, double)>(
                                       [](double, double r) { return r; }));
    c.f.comp[1] = sample_scalar(g, std::function<double(double, double)>(
                                       [](double t, double) { return -t; }));
    c.p.values = sample_scalar(g, std::function<double(double, double)>([](double t, double r) {
                                   return std::exp(-0.5 * (t * t + r * r));
                               }));
    c.p.normalize();
    return c;
}

}  // namespace

TEST_CASE("hamiltonian flow over a gaussian recovers a unit curl") {
    Grid g = Grid::square(-4.5, 4.5, 901);  // h = 0.01
    ReconstructionCase c = hamiltonian_gaussian_case(g);
    QReconstruction rec = reconstruct_q_2d(c.f, c.d, c.p);

    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i)
        for (Eigen::Index j = 0; j < g.axes[1].n; ++j) {
            double t = g.axes[0].coord(i), r = g.axes[1].coord(j);
            if (std::abs(t) <= 2.25 && std::abs(r) <= 2.25)
                worst = std::max(worst, std::abs(rec.q21.at(i, j) - 1.0));
        }
    CHECK(worst <= 1e-2);
}

TEST_CASE("gradient flow with unit diffusion needs no curl") {
    Grid g = Grid::square(-4.5, 4.5, 451);  // h = 0.02
    ReconstructionCase c = hamiltonian_gaussian_case(g);
    // f = -grad H, D = I
    c.f.comp[0] = sample_scalar(g, std::function<double(double, double)>(
                                       [](double t, double) { return -t; }));
    c.f.comp[1] = sample_scalar(g, std::function<double(double, double)>(
                                       [](double, double r) { return -r; }));
    c.d.entry(0, 0) = sample_scalar(g, std::function<double(double, double)>(
                                           [](double, double) { return 1.0; }));
    c.d.entry(1, 1) = sample_scalar(g, std::function<double(double, double)>(
                                           [](double, double) { return 1.0; }));
    QReconstruction rec = reconstruct_q_2d(c.f, c.d, c.p);

    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i)
        for (Eigen::Index j = 0; j < g.axes[1].n; ++j) {
            double t = g.axes[0].coord(i), r = g.axes[1].coord(j);
            if (std::abs(t) <= 2.25 && std::abs(r) <= 2.25)
                worst = std::max(worst, std::abs(rec.q21.at(i, j)));
        }
    CHECK(worst <= 1e-2);
}

TEST_CASE("friction dynamics still recover the unit curl despite nonzero diffusion") {
    const double c_fric = 0.5;
    Grid g = Grid::square(-4.5, 4.5, 901);
    ReconstructionCase c = hamiltonian_gaussian_case(g);
    c.f.comp[1] = sample_scalar(g, std::function<double(double, double)>(
                                       [c_fric](double t, double r) { return -t - c_fric * r; }));
    c.d.entry(1, 1) = sample_scalar(g, std::function<double(double, double)>(
                                           [c_fric](double, double) { return c_fric; }));
    QReconstruction rec = reconstruct_q_2d(c.f, c.d, c.p);

    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i)
        for (Eigen::Index j = 0; j < g.axes[1].n; ++j) {
            double t = g.axes[0].coord(i), r = g.axes[1].coord(j);
            if (std::abs(t) <= 2.25 && std::abs(r) <= 2.25)
                worst = std::max(worst, std::abs(rec.q21.at(i, j) - 1.0));
        }
    CHECK(worst <= 1e-2);
}

TEST_CASE("a flow that violates stationarity is rejected with the divergence norm") {
    Grid g = Grid::square(-4.5, 4.5, 301);
    ReconstructionCase c = hamiltonian_gaussian_case(g);
    // gradient ascent: not stationary for this density
    c.f.comp[0] = sample_scalar(g, std::function<double(double, double)>(
                                       [](double t, double) { return t; }));
    c.f.comp[1] = sample_scalar(g, std::function<double(double, double)>(
                                       [](double, double r) { return r; }));
    CHECK_THROWS_AS(reconstruct_q_2d(c.f, c.d, c.p), numeric_error);
}

TEST_CASE("reassembling the drift from the recovered curl reproduces it") {
    Grid g = Grid::square(-4.5, 4.5, 901);
    ReconstructionCase c = hamiltonian_gaussian_case(g);
    QReconstruction rec = reconstruct_q_2d(c.f, c.d, c.p);

    // f_i = -sum_j Q_ij dH/dz_j + Gamma_i with Q_12 = -Q_21 and D = 0
    GridScalar q21 = rec.q21;
    GridScalar dq21_d1 = sgmcmc::detail::ddx(q21, 0);
    GridScalar dq21_d2 = sgmcmc::detail::ddx(q21, 1);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i)
        for (Eigen::Index j = 0; j < g.axes[1].n; ++j) {
            double t = g.axes[0].coord(i), r = g.axes[1].coord(j);
            if (std::abs(t) > 2.25 || std::abs(r) > 2.25) continue;
            double f1 = -(-q21.at(i, j)) * r + (-dq21_d2.at(i, j));
            double f2 = -q21.at(i, j) * t + dq21_d1.at(i, j);
            worst = std::max({worst, std::abs(f1 - c.f.comp[0].at(i, j)),
                              std::abs(f2 - c.f.comp[1].at(i, j))});
        }
    CHECK(worst <= 1e-2);
}

// ---- histogram KL ---------------------------------------------------------------

TEST_CASE("kl of exact target samples is tiny") {
    EnergyModel target = make_one_peak();
    Rng rng = make_rng(2718);
    std::vector<double> xs = inverse_cdf_samples(target, -4.0, 4.0, 1000000, rng);
    KlResult kl = kl_divergence(trace_from(xs), target, 100, -4.0, 4.0);
    CHECK(kl.value >= 0.0);
    CHECK(kl.value <= 0.01);
    CHECK_FALSE(kl.sparse_histogram_warning);
}

TEST_CASE("a frozen chain is far from the target and flagged sparse") {
    EnergyModel target = make_one_peak();
    std::vector<double> xs(2000, 0.0);
    KlResult kl = kl_divergence(trace_from(xs), target, 100, -4.0, 4.0);
    CHECK(kl.value >= 2.0);
    CHECK(kl.sparse_histogram_warning);
}

TEST_CASE("identical histograms have exactly zero divergence") {
    std::vector<double> h{0.25, 0.5, 0.25};
    CHECK(kl_between_histograms(h, h) == 0.0);
}

TEST_CASE("kl preconditions are enforced") {
    EnergyModel target = make_one_peak();
    std::vector<double> xs(2000, 0.5);
    CHECK_THROWS_AS(kl_divergence(trace_from(xs), target, 100, -0.5, 0.5), config_error);
    std::vector<double> tiny(10, 0.0);
    CHECK_THROWS_AS(kl_divergence(trace_from(tiny), target, 100, -4.0, 4.0), config_error);
}

TEST_CASE("langevin chain on the double well reaches a small kl") {
    EnergyModel target = make_two_peaks();
    PresetConfig config;
    config.epsilon = 2e-3;
    SamplerSetup sgld = make_sgld(config, target);
    GradientEstimator est = make_injected_noise_estimator(target, 1.0);
    ChainOptions opts;
    opts.n_steps = 300000;
    opts.seed = 7;
    Trace trace = run_chain(sgld, est, StateVector(target.layout(), Vector::Zero(1)), opts);
    KlResult kl = kl_divergence(trace, target, 100, -2.5, 2.5);
    CHECK(kl.value <= 0.05);
}

TEST_CASE("riemannian chain samples a gamma with boundary reflection") {
    // Gamma(2,1): U = t - log t, G^{-1} = diag(theta)
    BlockLayout layout(1);
    EnergyModel target(
        layout, [](const Vector& t) { return t[0] - std::log(t[0]); },
        [](const Vector& t) { return Vector::Constant(1, 1.0 - 1.0 / t[0]); });
    PresetConfig config;
    config.epsilon = 1e-3;
    config.metric = MetricSpec::fisher_diagonal();
    SamplerSetup sgrld = make_sgrld(config, target);
    sgrld.post_step = make_reflect_positive_hook();
    GradientEstimator est = make_injected_noise_estimator(target, 1.0);
    ChainOptions opts;
    opts.n_steps = 400000;
    opts.seed = 3;
    Trace trace = run_chain(sgrld, est, StateVector(layout, Vector::Constant(1, 1.0)), opts);
    REQUIRE_FALSE(trace.diverged);
    KlResult kl = kl_divergence(trace, target, 100, 1e-3, 12.0);
    CHECK(kl.value <= 0.05);
}

// ---- autocorrelation time --------------------------------------------------------

TEST_CASE("white noise has unit integrated time") {
    Rng rng = make_rng(99);
    std::vector<double> xs(10000);
    for (double& x : xs) x = standard_normal(rng);
    double tau = autocorrelation_time(xs, 100);
    CHECK(tau == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("an ar(1) chain has its closed-form integrated time") {
    Rng rng = make_rng(123);
    std::vector<double> xs = oracles::ar1_series(0.9, 100000, rng);
    double tau = autocorrelation_time(xs, 2000);
    CHECK(tau == doctest::Approx(19.0).epsilon(0.25));
}

TEST_CASE("a constant series is flagged divergent") {
    std::vector<double> xs(5000, 3.3);
    CHECK(std::isinf(autocorrelation_time(xs, 100)));
}

TEST_CASE("autocorrelation preconditions") {
    std::vector<double> xs(50, 0.0);
    CHECK_THROWS_AS(autocorrelation_time(xs, 100), config_error);
    std::vector<double> bad(5000, 1.0);
    bad[17] = std::nan("");
    CHECK_THROWS_AS(autocorrelation_time(bad, 100), numeric_error);
}

// ---- grid csv export --------------------------------------------------------------

TEST_CASE("grid export writes coordinate-value rows") {
    Grid g = Grid::line(0.0, 1.0, 5);
    GridScalar s = sample_scalar(g, std::function<double(double)>([](double x) { return 2 * x; }));
    write_grid_csv(s, "grid_tmp.csv");
    std::ifstream in("grid_tmp.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "z1,value");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 5);
    std::remove("grid_tmp.csv");
}
