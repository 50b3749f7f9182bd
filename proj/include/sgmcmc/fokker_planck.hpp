#pragma once

#include <cmath>

#include "sgmcmc/grid.hpp"

namespace sgmcmc {

namespace detail {

// Second-order first derivative along an axis: central in the interior,
// one-sided at the edges so downstream consumers keep full grid support.
inline GridScalar ddx(const GridScalar& s, int axis) {
    const Grid& g = s.grid;
    GridScalar out(g);
    const double h = g.axes[axis].h();
    const Eigen::Index n0 = g.axes[0].n;
    const Eigen::Index n1 = g.dims == 2 ? g.axes[1].n : 1;

    auto get = [&](Eigen::Index i, Eigen::Index j) { return s.at(i, j); };
    for (Eigen::Index i = 0; i < n0; ++i) {
        for (Eigen::Index j = 0; j < n1; ++j) {
            double d;
            if (axis == 0) {
                if (i == 0)
                    d = (-3.0 * get(0, j) + 4.0 * get(1, j) - get(2, j)) / (2.0 * h);
                else if (i == n0 - 1)
                    d = (3.0 * get(n0 - 1, j) - 4.0 * get(n0 - 2, j) + get(n0 - 3, j)) /
                        (2.0 * h);
                else
                    d = (get(i + 1, j) - get(i - 1, j)) / (2.0 * h);
            } else {
                if (j == 0)
                    d = (-3.0 * get(i, 0) + 4.0 * get(i, 1) - get(i, 2)) / (2.0 * h);
                else if (j == n1 - 1)
                    d = (3.0 * get(i, n1 - 1) - 4.0 * get(i, n1 - 2) + get(i, n1 - 3)) /
                        (2.0 * h);
                else
                    d = (get(i, j + 1) - get(i, j - 1)) / (2.0 * h);
            }
            out.at(i, j) = d;
        }
    }
    return out;
}

inline bool interior(const Grid& g, Eigen::Index i, Eigen::Index j, Eigen::Index margin) {
    if (i < margin || i >= g.axes[0].n - margin) return false;
    if (g.dims == 2 && (j < margin || j >= g.axes[1].n - margin)) return false;
    return true;
}

}  // namespace detail

inline double sup_norm(const GridScalar& s, Eigen::Index margin) {
    const Grid& g = s.grid;
    double m = 0.0;
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i)
        for (Eigen::Index j = 0; j < (g.dims == 2 ? g.axes[1].n : 1); ++j)
            if (detail::interior(g, i, j, margin)) m = std::max(m, std::abs(s.at(i, j)));
    return m;
}

// Sup-norm over a fixed physical sub-box, so norms taken at different grid
// resolutions compare the same region (needed for refinement-order checks).
inline double sup_norm_region(const GridScalar& s, double margin) {
    const Grid& g = s.grid;
    double m = 0.0;
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i) {
        double x = g.axes[0].coord(i);
        if (x < g.axes[0].min + margin || x > g.axes[0].max - margin) continue;
        for (Eigen::Index j = 0; j < (g.dims == 2 ? g.axes[1].n : 1); ++j) {
            if (g.dims == 2) {
                double y = g.axes[1].coord(j);
                if (y < g.axes[1].min + margin || y > g.axes[1].max - margin) continue;
            }
            m = std::max(m, std::abs(s.at(i, j)));
        }
    }
    return m;
}

// Density evolution rate in its textbook form:
//   -sum_i d_i(f_i p) + sum_ij d_i d_j (D_ij p)
// evaluated with central differences on the interior (one-cell margin; the
// margin cells are left at zero).
inline GridScalar fp_rhs_direct(const VectorFieldGrid& f, const MatrixFieldGrid& d,
                                const GridScalar& p) {
    const Grid& g = p.grid;
    Grid::check(g);
    if (!f.grid.same_shape(g) || !d.grid.same_shape(g))
        throw dimension_error("fp_rhs_direct: field grids do not match the density grid");

    const int dims = g.dims;
    std::vector<GridScalar> fp(static_cast<std::size_t>(dims), GridScalar(g));
    std::vector<GridScalar> dp(static_cast<std::size_t>(dims * dims), GridScalar(g));
    for (int a = 0; a < dims; ++a)
        for (std::size_t k = 0; k < p.v.size(); ++k) fp[a].v[k] = f.comp[a].v[k] * p.v[k];
    for (int a = 0; a < dims; ++a)
        for (int b = 0; b < dims; ++b)
            for (std::size_t k = 0; k < p.v.size(); ++k)
                dp[static_cast<std::size_t>(a * dims + b)].v[k] =
                    d.entry(a, b).v[k] * p.v[k];

    GridScalar out(g);
    const double h0 = g.axes[0].h();
    const double h1 = dims == 2 ? g.axes[1].h() : 1.0;
    const Eigen::Index n0 = g.axes[0].n;
    const Eigen::Index n1 = dims == 2 ? g.axes[1].n : 1;

    for (Eigen::Index i = 1; i + 1 < n0; ++i) {
        for (Eigen::Index j = (dims == 2 ? 1 : 0); j < (dims == 2 ? n1 - 1 : 1); ++j) {
            double acc = 0.0;
            // advection terms
            acc -= (fp[0].at(i + 1, j) - fp[0].at(i - 1, j)) / (2.0 * h0);
            if (dims == 2) acc -= (fp[1].at(i, j + 1) - fp[1].at(i, j - 1)) / (2.0 * h1);
            // diffusion terms
            const GridScalar& d00 = dp[0];
            acc += (d00.at(i + 1, j) - 2.0 * d00.at(i, j) + d00.at(i - 1, j)) / (h0 * h0);
            if (dims == 2) {
                const GridScalar& d01 = dp[1];
                const GridScalar& d10 = dp[2];
                const GridScalar& d11 = dp[3];
                acc += (d11.at(i, j + 1) - 2.0 * d11.at(i, j) + d11.at(i, j - 1)) / (h1 * h1);
                double cross01 = (d01.at(i + 1, j + 1) - d01.at(i + 1, j - 1) -
                                  d01.at(i - 1, j + 1) + d01.at(i - 1, j - 1)) /
                                 (4.0 * h0 * h1);
                double cross10 = (d10.at(i + 1, j + 1) - d10.at(i + 1, j - 1) -
                                  d10.at(i - 1, j + 1) + d10.at(i - 1, j - 1)) /
                                 (4.0 * h0 * h1);
                acc += cross01 + cross10;
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

// The same rate factored through the fields:
//   div( [D + Q] (p grad H + grad p) )
// The inner bracket vanishes identically at p = exp(-H), which is what makes
// this form the natural stationarity check.
inline GridScalar fp_rhs_compact(const MatrixFieldGrid& d, const MatrixFieldGrid& q,
                                 const GridScalar& h_grid, const GridScalar& p) {
    const Grid& g = p.grid;
    Grid::check(g);
    if (!d.grid.same_shape(g) || !q.grid.same_shape(g) || !h_grid.grid.same_shape(g))
        throw dimension_error("fp_rhs_compact: field grids do not match the density grid");

    const int dims = g.dims;
    std::vector<GridScalar> w;
    for (int a = 0; a < dims; ++a) {
        GridScalar dh = detail::ddx(h_grid, a);
        GridScalar dp = detail::ddx(p, a);
        GridScalar wa(g);
        for (std::size_t k = 0; k < p.v.size(); ++k)
            wa.v[k] = p.v[k] * dh.v[k] + dp.v[k];
        w.push_back(std::move(wa));
    }

    std::vector<GridScalar> v(static_cast<std::size_t>(dims), GridScalar(g));
    for (int a = 0; a < dims; ++a)
        for (int b = 0; b < dims; ++b) {
            const GridScalar& m = d.entry(a, b);
            const GridScalar& qm = q.entry(a, b);
            for (std::size_t k = 0; k < p.v.size(); ++k)
                v[a].v[k] += (m.v[k] + qm.v[k]) * w[b].v[k];
        }

    GridScalar out(g);
    const double h0 = g.axes[0].h();
    const double h1 = dims == 2 ? g.axes[1].h() : 1.0;
    const Eigen::Index n0 = g.axes[0].n;
    const Eigen::Index n1 = dims == 2 ? g.axes[1].n : 1;
    for (Eigen::Index i = 1; i + 1 < n0; ++i) {
        for (Eigen::Index j = (dims == 2 ? 1 : 0); j < (dims == 2 ? n1 - 1 : 1); ++j) {
            double acc = (v[0].at(i + 1, j) - v[0].at(i - 1, j)) / (2.0 * h0);
            if (dims == 2) acc += (v[1].at(i, j + 1) - v[1].at(i, j - 1)) / (2.0 * h1);
            out.at(i, j) = acc;
        }
    }
    return out;
}

// Sup-norm of the compact-form rate applied to the normalized Boltzmann
// density of the sampler: numerically zero (up to O(h^2)) exactly when the
// spec's fields leave exp(-H) stationary.
inline double stationarity_residual(const SamplerSpec& spec, const Grid& g) {
    if (spec.model.dim() > 2)
        throw config_error("stationarity_residual: grid checks support at most 2 dimensions");
    GridDensity p = boltzmann_density(spec, g);
    GridScalar h = energy_on_grid(spec, g);
    MatrixFieldGrid d = field_on_grid(spec.diffusion, spec.model.layout(), g);
    MatrixFieldGrid q = field_on_grid(spec.curl, spec.model.layout(), g);
    GridScalar rhs = fp_rhs_compact(d, q, h, p.values);
    return sup_norm(rhs, 2);
}

// Direct-form residual with the drift assembled from the sampler's fields and
// the mode-normalized density exp(-(H - min H)). Unlike the compact form,
// whose inner bracket vanishes at exp(-H) for arbitrary fields, this one
// feels a broken pair: a non-skew curl or a wrong divergence correction
// leaves a finite residual.
inline double stationarity_residual_direct(const SamplerSpec& spec, const Grid& g) {
    if (spec.model.dim() > 2)
        throw config_error("stationarity_residual_direct: grid checks support at most 2 dimensions");
    GridScalar h = energy_on_grid(spec, g);
    double hmin = h.v.front();
    for (double x : h.v) hmin = std::min(hmin, x);
    GridScalar p(g);
    for (std::size_t k = 0; k < p.v.size(); ++k) p.v[k] = std::exp(-(h.v[k] - hmin));
    VectorFieldGrid f = drift_on_grid(spec, g);
    MatrixFieldGrid d = field_on_grid(spec.diffusion, spec.model.layout(), g);
    return sup_norm(fp_rhs_direct(f, d, p), 2);
}

struct QReconstruction {
    GridScalar q21;
    double divergence_sup = 0.0;  // of the flux field the construction inverts
};

// Constructive curl recovery for 2-D systems. With
//   F_i = f_i p - sum_j d_j(D_ij p)
// stationarity makes F divergence-free, and the i = 1 row of the defining
// relation d_j(Q_ij p) = F_i integrates to
//   Q_12(z1, z2) p(z1, z2) = int_{z2^0}^{z2} F_1(z1, s) ds,   Q_21 = -Q_12,
// with the reference z2^0 at the lower grid edge where p is negligible.
inline QReconstruction reconstruct_q_2d(const VectorFieldGrid& f, const MatrixFieldGrid& d,
                                        const GridDensity& ps, double divergence_tol = 1e-3) {
    const Grid& g = ps.grid();
    if (g.dims != 2) throw dimension_error("reconstruct_q_2d: needs a 2-D grid");
    if (!f.grid.same_shape(g) || !d.grid.same_shape(g))
        throw dimension_error("reconstruct_q_2d: field grids do not match the density grid");
    const GridScalar& p = ps.values;
    for (double x : p.v)
        if (!(x > 0.0))
            throw domain_error("reconstruct_q_2d: density must be strictly positive on the grid");

    // F_i = f_i p - d_1(D_i1 p) - d_2(D_i2 p)
    std::vector<GridScalar> flux;
    for (int a = 0; a < 2; ++a) {
        GridScalar da1(g), da2(g);
        for (std::size_t k = 0; k < p.v.size(); ++k) {
            da1.v[k] = d.entry(a, 0).v[k] * p.v[k];
            da2.v[k] = d.entry(a, 1).v[k] * p.v[k];
        }
        GridScalar dd1 = detail::ddx(da1, 0);
        GridScalar dd2 = detail::ddx(da2, 1);
        GridScalar fa(g);
        for (std::size_t k = 0; k < p.v.size(); ++k)
            fa.v[k] = f.comp[a].v[k] * p.v[k] - dd1.v[k] - dd2.v[k];
        flux.push_back(std::move(fa));
    }

    GridScalar div1 = detail::ddx(flux[0], 0);
    GridScalar div2 = detail::ddx(flux[1], 1);
    GridScalar div(g);
    for (std::size_t k = 0; k < div.v.size(); ++k) div.v[k] = div1.v[k] + div2.v[k];
    double div_sup = sup_norm(div, 2);
    if (div_sup > divergence_tol)
        throw numeric_error(
            "reconstruct_q_2d: stationarity hypothesis violated, sup |div(f p - div(D p))| = " +
            format_double(div_sup));

    // cumulative trapezoid of F_1 along axis 1 from the lower edge
    QReconstruction out;
    out.divergence_sup = div_sup;
    out.q21 = GridScalar(g);
    const double h1 = g.axes[1].h();
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i) {
        double acc = 0.0;
        out.q21.at(i, 0) = 0.0;
        for (Eigen::Index j = 1; j < g.axes[1].n; ++j) {
            acc += 0.5 * h1 * (flux[0].at(i, j - 1) + flux[0].at(i, j));
            out.q21.at(i, j) = -acc / p.at(i, j);
        }
    }
    return out;
}

}  // namespace sgmcmc
