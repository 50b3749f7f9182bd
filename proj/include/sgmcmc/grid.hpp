#pragma once

#include <array>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "sgmcmc/common.hpp"
#include "sgmcmc/recipe.hpp"

namespace sgmcmc {

// Uniform axis: n points from min to max inclusive.
struct GridAxis {
    double min = 0.0;
    double max = 1.0;
    Eigen::Index n = 2;

    double h() const { return (max - min) / static_cast<double>(n - 1); }
    double coord(Eigen::Index i) const { return min + static_cast<double>(i) * h(); }
};

// 1-D or 2-D uniform grid. Values are stored row-major: index = i * n2 + j
// with i along axis 0 and j along axis 1.
struct Grid {
    int dims = 1;
    std::array<GridAxis, 2> axes;

    static Grid line(double lo, double hi, Eigen::Index n) {
        Grid g;
        g.dims = 1;
        g.axes[0] = {lo, hi, n};
        check(g);
        return g;
    }
    static Grid box(double lo1, double hi1, Eigen::Index n1, double lo2, double hi2,
                    Eigen::Index n2) {
        Grid g;
        g.dims = 2;
        g.axes[0] = {lo1, hi1, n1};
        g.axes[1] = {lo2, hi2, n2};
        check(g);
        return g;
    }
    static Grid square(double lo, double hi, Eigen::Index n) { return box(lo, hi, n, lo, hi, n); }

    static void check(const Grid& g) {
        for (int a = 0; a < g.dims; ++a)
            if (g.axes[a].n < 5)
                throw config_error("grid too coarse: need at least 5 points per axis");
    }

    Eigen::Index size() const {
        return dims == 1 ? axes[0].n : axes[0].n * axes[1].n;
    }
    Eigen::Index index(Eigen::Index i, Eigen::Index j = 0) const {
        return dims == 1 ? i : i * axes[1].n + j;
    }
    bool same_shape(const Grid& o) const {
        if (dims != o.dims) return false;
        for (int a = 0; a < dims; ++a)
            if (axes[a].n != o.axes[a].n || axes[a].min != o.axes[a].min ||
                axes[a].max != o.axes[a].max)
                return false;
        return true;
    }
};

struct GridScalar {
    Grid grid;
    std::vector<double> v;

    GridScalar() = default;
    explicit GridScalar(const Grid& g) : grid(g), v(static_cast<std::size_t>(g.size()), 0.0) {}

    double& at(Eigen::Index i, Eigen::Index j = 0) {
        return v[static_cast<std::size_t>(grid.index(i, j))];
    }
    double at(Eigen::Index i, Eigen::Index j = 0) const {
        return v[static_cast<std::size_t>(grid.index(i, j))];
    }
};

// Trapezoid-rule integral over the grid.
inline double integrate(const GridScalar& s) {
    const Grid& g = s.grid;
    if (g.dims == 1) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i + 1 < g.axes[0].n; ++i)
            sum += 0.5 * (s.at(i) + s.at(i + 1));
        return sum * g.axes[0].h();
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i) {
        double wi = (i == 0 || i == g.axes[0].n - 1) ? 0.5 : 1.0;
        for (Eigen::Index j = 0; j < g.axes[1].n; ++j) {
            double wj = (j == 0 || j == g.axes[1].n - 1) ? 0.5 : 1.0;
            sum += wi * wj * s.at(i, j);
        }
    }
    return sum * g.axes[0].h() * g.axes[1].h();
}

// Non-negative density on a grid with an explicit normalization flag.
struct GridDensity {
    GridScalar values;
    bool normalized = false;

    const Grid& grid() const { return values.grid; }

    void normalize() {
        double z = integrate(values);
        if (!(z > 0.0)) throw numeric_error("GridDensity: cannot normalize, zero mass");
        for (double& x : values.v) x /= z;
        normalized = true;
    }
};

inline GridScalar sample_scalar(const Grid& g, const std::function<double(double)>& fn) {
    if (g.dims != 1) throw dimension_error("sample_scalar: 1-D function on non-1-D grid");
    GridScalar s(g);
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i) s.at(i) = fn(g.axes[0].coord(i));
    return s;
}

inline GridScalar sample_scalar(const Grid& g,
                                const std::function<double(double, double)>& fn) {
    if (g.dims != 2) throw dimension_error("sample_scalar: 2-D function on non-2-D grid");
    GridScalar s(g);
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i)
        for (Eigen::Index j = 0; j < g.axes[1].n; ++j)
            s.at(i, j) = fn(g.axes[0].coord(i), g.axes[1].coord(j));
    return s;
}

// Vector and matrix fields stored as per-point data.
struct VectorFieldGrid {
    Grid grid;
    std::vector<GridScalar> comp;  // dims entries

    VectorFieldGrid() = default;
    explicit VectorFieldGrid(const Grid& g) : grid(g), comp(g.dims, GridScalar(g)) {}
};

struct MatrixFieldGrid {
    Grid grid;
    std::vector<GridScalar> comp;  // dims*dims entries, row-major

    MatrixFieldGrid() = default;
    explicit MatrixFieldGrid(const Grid& g)
        : grid(g), comp(static_cast<std::size_t>(g.dims * g.dims), GridScalar(g)) {}

    GridScalar& entry(int i, int j) { return comp[static_cast<std::size_t>(i * grid.dims + j)]; }
    const GridScalar& entry(int i, int j) const {
        return comp[static_cast<std::size_t>(i * grid.dims + j)];
    }
};

namespace detail {

inline StateVector grid_state(const BlockLayout& layout, double x, double y, int dims) {
    Vector flat(layout.dim());
    flat[0] = x;
    if (dims == 2) flat[1] = y;
    return StateVector(layout, flat);
}

}  // namespace detail

// Samples the energy of a sampler's model over grid coordinates. The grid
// spans the full augmented state, so its dimension must match the model's.
inline GridScalar energy_on_grid(const SamplerSpec& spec, const Grid& g) {
    if (g.dims != spec.model.dim())
        throw dimension_error("energy_on_grid: grid dimension must equal the state dimension");
    GridScalar h(g);
    const BlockLayout& layout = spec.model.layout();
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i) {
        double x = g.axes[0].coord(i);
        if (g.dims == 1) {
            h.at(i) = spec.model.energy(detail::grid_state(layout, x, 0.0, 1));
        } else {
            for (Eigen::Index j = 0; j < g.axes[1].n; ++j)
                h.at(i, j) =
                    spec.model.energy(detail::grid_state(layout, x, g.axes[1].coord(j), 2));
        }
    }
    return h;
}

inline GridDensity boltzmann_density(const SamplerSpec& spec, const Grid& g) {
    GridScalar h = energy_on_grid(spec, g);
    GridDensity p;
    p.values = GridScalar(g);
    for (std::size_t k = 0; k < h.v.size(); ++k) p.values.v[k] = std::exp(-h.v[k]);
    p.normalize();
    return p;
}

// Samples the drift f = -[D+Q] grad H + Gamma and both matrix fields over the
// grid, using the full-data context.
inline VectorFieldGrid drift_on_grid(const SamplerSpec& spec, const Grid& g) {
    if (g.dims != spec.model.dim())
        throw dimension_error("drift_on_grid: grid dimension must equal the state dimension");
    VectorFieldGrid f(g);
    const BlockLayout& layout = spec.model.layout();
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i) {
        double x = g.axes[0].coord(i);
        for (Eigen::Index j = 0; j < (g.dims == 2 ? g.axes[1].n : 1); ++j) {
            double y = g.dims == 2 ? g.axes[1].coord(j) : 0.0;
            StateVector z = detail::grid_state(layout, x, y, g.dims);
            Vector fv = drift(spec, z, spec.model.grad(z));
            for (int a = 0; a < g.dims; ++a) f.comp[a].at(i, j) = fv[a];
        }
    }
    return f;
}

inline MatrixFieldGrid field_on_grid(const MatrixField& field, const BlockLayout& layout,
                                     const Grid& g) {
    if (g.dims != field.dim())
        throw dimension_error("field_on_grid: grid dimension must equal the field dimension");
    MatrixFieldGrid out(g);
    for (Eigen::Index i = 0; i < g.axes[0].n; ++i) {
        double x = g.axes[0].coord(i);
        for (Eigen::Index j = 0; j < (g.dims == 2 ? g.axes[1].n : 1); ++j) {
            double y = g.dims == 2 ? g.axes[1].coord(j) : 0.0;
            Matrix m = field.eval(detail::grid_state(layout, x, y, g.dims));
            for (int a = 0; a < g.dims; ++a)
                for (int b = 0; b < g.dims; ++b) out.entry(a, b).at(i, j) = m(a, b);
        }
    }
    return out;
}

// CSV export: `z1,value` or `z1,z2,value`.
inline void write_grid_csv(const GridScalar& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open grid file for writing: " + path);
    if (s.grid.dims == 1) {
        out << "z1,value\n";
        for (Eigen::Index i = 0; i < s.grid.axes[0].n; ++i)
            out << format_double(s.grid.axes[0].coord(i)) << "," << format_double(s.at(i))
                << "\n";
        return;
    }
    out << "z1,z2,value\n";
    for (Eigen::Index i = 0; i < s.grid.axes[0].n; ++i)
        for (Eigen::Index j = 0; j < s.grid.axes[1].n; ++j)
            out << format_double(s.grid.axes[0].coord(i)) << ","
                << format_double(s.grid.axes[1].coord(j)) << "," << format_double(s.at(i, j))
                << "\n";
}

}  // namespace sgmcmc
