#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "sgmcmc/common.hpp"
#include "sgmcmc/state.hpp"

namespace sgmcmc {

// Per-step evaluation context. Fields built from a potential-level metric
// need the (possibly minibatch) potential value and gradient at the current
// theta; when absent they fall back to their own full-data potential.
struct FieldContext {
    std::optional<double> potential;
    std::optional<Vector> potential_grad;
};

enum class FieldStructure { diffusion, curl };
enum class FieldKind { constant, diagonal_fn, dense_fn };

// A state-dependent square matrix over the augmented state: either the
// diffusion matrix (symmetric PSD) or the curl matrix (skew-symmetric).
// Dense evaluation is always available; presets install fast block-wise
// apply/divergence closures so samplers never touch a d x d matrix unless
// they have to.
class MatrixField {
  public:
    using EvalFn = std::function<Matrix(const StateVector&, const FieldContext&)>;
    using DiagFn = std::function<Vector(const StateVector&, const FieldContext&)>;
    using ApplyFn = std::function<Vector(const StateVector&, const FieldContext&, const Vector&)>;
    using DivFn = std::function<Vector(const StateVector&, const FieldContext&)>;

    MatrixField() = default;

    static MatrixField zero(Eigen::Index dim, FieldStructure structure) {
        MatrixField f;
        f.kind_ = FieldKind::constant;
        f.structure_ = structure;
        f.dim_ = dim;
        f.constant_ = Matrix::Zero(dim, dim);
        f.is_zero_ = true;
        f.constant_diagonal_ = Vector::Zero(dim);
        return f;
    }

    static MatrixField constant(Matrix m, FieldStructure structure) {
        MatrixField f;
        if (m.rows() != m.cols()) throw dimension_error("MatrixField: constant matrix not square");
        f.kind_ = FieldKind::constant;
        f.structure_ = structure;
        f.dim_ = m.rows();
        f.is_zero_ = m.isZero(0.0);
        if (m.isDiagonal(0.0)) f.constant_diagonal_ = m.diagonal();
        f.constant_ = std::move(m);
        return f;
    }

    static MatrixField constant_diagonal(Vector diag, FieldStructure structure) {
        MatrixField f;
        f.kind_ = FieldKind::constant;
        f.structure_ = structure;
        f.dim_ = diag.size();
        f.is_zero_ = diag.isZero(0.0);
        f.constant_ = Matrix(diag.asDiagonal());
        f.constant_diagonal_ = std::move(diag);
        return f;
    }

    static MatrixField diagonal_fn(Eigen::Index dim, DiagFn diag, FieldStructure structure,
                                   DivFn divergence = nullptr) {
        MatrixField f;
        f.kind_ = FieldKind::diagonal_fn;
        f.structure_ = structure;
        f.dim_ = dim;
        f.diag_fn_ = std::move(diag);
        f.div_fn_ = std::move(divergence);
        return f;
    }

    static MatrixField dense_fn(Eigen::Index dim, EvalFn eval, FieldStructure structure,
                                DivFn divergence = nullptr, ApplyFn apply = nullptr) {
        MatrixField f;
        f.kind_ = FieldKind::dense_fn;
        f.structure_ = structure;
        f.dim_ = dim;
        f.eval_fn_ = std::move(eval);
        f.div_fn_ = std::move(divergence);
        f.apply_fn_ = std::move(apply);
        return f;
    }

    FieldKind kind() const { return kind_; }
    FieldStructure structure() const { return structure_; }
    Eigen::Index dim() const { return dim_; }
    bool is_zero() const { return is_zero_; }
    bool is_diagonal() const {
        return kind_ == FieldKind::diagonal_fn ||
               (kind_ == FieldKind::constant && constant_diagonal_.size() > 0);
    }
    bool has_analytic_divergence() const {
        return kind_ == FieldKind::constant || static_cast<bool>(div_fn_);
    }
    void set_needs_potential(bool b) { needs_potential_ = b; }
    bool needs_potential() const { return needs_potential_; }

    Matrix eval(const StateVector& z, const FieldContext& ctx = {}) const {
        switch (kind_) {
            case FieldKind::constant: return constant_;
            case FieldKind::diagonal_fn: return Matrix(diag_fn_(z, ctx).asDiagonal());
            case FieldKind::dense_fn: return eval_fn_(z, ctx);
        }
        throw error("MatrixField: bad kind");
    }

    Vector eval_diagonal(const StateVector& z, const FieldContext& ctx = {}) const {
        if (kind_ == FieldKind::diagonal_fn) return diag_fn_(z, ctx);
        if (kind_ == FieldKind::constant && constant_diagonal_.size() > 0)
            return constant_diagonal_;
        throw error("MatrixField: not a diagonal field");
    }

    Vector apply(const StateVector& z, const FieldContext& ctx, const Vector& v) const {
        if (v.size() != dim_) throw dimension_error("MatrixField: vector dimension mismatch");
        if (is_zero_) return Vector::Zero(dim_);
        if (apply_fn_) return apply_fn_(z, ctx, v);
        if (kind_ == FieldKind::diagonal_fn) return diag_fn_(z, ctx).cwiseProduct(v);
        if (kind_ == FieldKind::constant) {
            if (constant_diagonal_.size() > 0) return constant_diagonal_.cwiseProduct(v);
            return constant_ * v;
        }
        return eval_fn_(z, ctx) * v;
    }

    // Divergence vector of the field: component i is the row-i sum of
    // coordinate derivatives d M_ij / d z_j. Analytic when installed,
    // otherwise entry-wise central differences. Constants are exactly zero.
    Vector divergence(const StateVector& z, const FieldContext& ctx = {}) const {
        if (kind_ == FieldKind::constant) return Vector::Zero(dim_);
        if (div_fn_) return div_fn_(z, ctx);
        return finite_difference_divergence(z);
    }

    Vector finite_difference_divergence(const StateVector& z) const {
        // The context cannot be reused at perturbed states, so the fallback
        // always re-evaluates the field contextlessly (full-data potential).
        Vector g = Vector::Zero(dim_);
        Vector flat = z.flat();
        for (Eigen::Index j = 0; j < dim_; ++j) {
            double h = 1e-4 * std::max(1.0, std::abs(flat[j]));
            double orig = flat[j];
            flat[j] = orig + h;
            Matrix up = eval(StateVector(z.layout(), flat));
            flat[j] = orig - h;
            Matrix dn = eval(StateVector(z.layout(), flat));
            flat[j] = orig;
            g += (up.col(j) - dn.col(j)) / (2.0 * h);
        }
        return g;
    }

  private:
    FieldKind kind_ = FieldKind::constant;
    FieldStructure structure_ = FieldStructure::diffusion;
    Eigen::Index dim_ = 0;
    bool is_zero_ = false;
    bool needs_potential_ = false;
    Matrix constant_;
    Vector constant_diagonal_;
    EvalFn eval_fn_;
    DiagFn diag_fn_;
    ApplyFn apply_fn_;
    DivFn div_fn_;
};

// Canonical symplectic curl over z = (theta, r): [[0, -I], [I, 0]] scaled by
// an optional theta-dependent diagonal coupling g, giving
// [[0, -diag(g)], [diag(g), 0]]. Covers the momentum-based presets.
inline MatrixField make_canonical_curl(Eigen::Index theta_dim,
                                       std::function<Vector(const StateVector&, const FieldContext&)>
                                           coupling = nullptr,
                                       MatrixField::DivFn divergence = nullptr) {
    const Eigen::Index dim = 2 * theta_dim;
    auto eval = [theta_dim, coupling](const StateVector& z, const FieldContext& ctx) {
        Matrix q = Matrix::Zero(2 * theta_dim, 2 * theta_dim);
        Vector g = coupling ? coupling(z, ctx) : Vector::Ones(theta_dim);
        for (Eigen::Index i = 0; i < theta_dim; ++i) {
            q(i, theta_dim + i) = -g[i];
            q(theta_dim + i, i) = g[i];
        }
        return q;
    };
    auto apply = [theta_dim, coupling](const StateVector& z, const FieldContext& ctx,
                                       const Vector& v) {
        Vector g = coupling ? coupling(z, ctx) : Vector::Ones(theta_dim);
        Vector out(2 * theta_dim);
        out.head(theta_dim) = -g.cwiseProduct(v.segment(theta_dim, theta_dim));
        out.segment(theta_dim, theta_dim) = g.cwiseProduct(v.head(theta_dim));
        return out;
    };
    MatrixField::DivFn div = divergence;
    if (!div && !coupling) {
        div = [dim](const StateVector&, const FieldContext&) { return Vector::Zero(dim); };
    }
    auto f = MatrixField::dense_fn(dim, eval, FieldStructure::curl, div, apply);
    return f;
}

}  // namespace sgmcmc
