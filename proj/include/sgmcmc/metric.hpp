#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "sgmcmc/common.hpp"
#include "sgmcmc/matrix_field.hpp"

namespace sgmcmc {

// Everything a Riemannian preset needs from a diagonal metric at one theta:
// the diagonal of G^{-1}, of G^{-1/2}, and the coordinate derivatives of both
// (the drift corrections for first- and second-order samplers).
struct MetricEval {
    Vector g_inv;
    Vector g_inv_sqrt;
    Vector g_inv_deriv;       // d (G^{-1})_ii / d theta_i
    Vector g_inv_sqrt_deriv;  // d (G^{-1/2})_ii / d theta_i
};

// Diagonal positive-definite metric G(theta). Kinds:
//   identity         G^{-1} = I
//   fisher_diagonal  G^{-1} = diag(theta), theta > 0
//   potential_level  G^{-1} = d * sqrt(|u(theta) + c|) * I with u the
//                    (possibly minibatch) potential; amplifies diffusion in
//                    low-probability regions
//   user_fn          caller-supplied evaluation
class MetricSpec {
  public:
    enum class Kind { identity, fisher_diagonal, potential_level, user_fn };

    using UserFn = std::function<MetricEval(const Vector& theta)>;
    using PotentialValueFn = std::function<double(const Vector& theta)>;
    using PotentialGradFn = std::function<Vector(const Vector& theta)>;

    MetricSpec() = default;

    static MetricSpec identity() { return MetricSpec(); }

    static MetricSpec fisher_diagonal() {
        MetricSpec m;
        m.kind_ = Kind::fisher_diagonal;
        return m;
    }

    static MetricSpec potential_level(double d, double c, PotentialValueFn full_potential,
                                      PotentialGradFn full_potential_grad) {
        if (!(d > 0.0)) throw config_error("potential-level metric: scale must be positive");
        MetricSpec m;
        m.kind_ = Kind::potential_level;
        m.level_d_ = d;
        m.level_c_ = c;
        m.full_potential_ = std::move(full_potential);
        m.full_potential_grad_ = std::move(full_potential_grad);
        return m;
    }

    static MetricSpec user(UserFn fn) {
        MetricSpec m;
        m.kind_ = Kind::user_fn;
        m.user_fn_ = std::move(fn);
        return m;
    }

    Kind kind() const { return kind_; }
    bool is_identity() const { return kind_ == Kind::identity; }
    bool needs_potential() const { return kind_ == Kind::potential_level; }

    MetricEval eval(const Vector& theta, const FieldContext& ctx = {}) const {
        const Eigen::Index d = theta.size();
        MetricEval out;
        switch (kind_) {
            case Kind::identity:
                out.g_inv = Vector::Ones(d);
                out.g_inv_sqrt = Vector::Ones(d);
                out.g_inv_deriv = Vector::Zero(d);
                out.g_inv_sqrt_deriv = Vector::Zero(d);
                return out;
            case Kind::fisher_diagonal: {
                for (Eigen::Index i = 0; i < d; ++i)
                    if (!(theta[i] > 0.0))
                        throw step_error("metric singular at component " + std::to_string(i) +
                                         ": theta must stay positive");
                out.g_inv = theta;
                out.g_inv_sqrt = theta.cwiseSqrt();
                out.g_inv_deriv = Vector::Ones(d);
                out.g_inv_sqrt_deriv = (0.5 * out.g_inv_sqrt.cwiseInverse()).eval();
                return out;
            }
            case Kind::potential_level: {
                double u = ctx.potential ? *ctx.potential : full_potential_(theta);
                Vector grad_u =
                    ctx.potential_grad ? *ctx.potential_grad : full_potential_grad_(theta);
                double shifted = u + level_c_;
                double root = std::sqrt(std::abs(shifted));
                double ginv = level_d_ * root;
                if (!(ginv > 0.0))
                    throw step_error("metric singular at component 0: potential level vanished");
                double gsqrt = std::sqrt(ginv);
                // d(G^{-1})/du = d * sign(u+c) / (2 sqrt|u+c|)
                double dginv_du = level_d_ * (shifted >= 0.0 ? 1.0 : -1.0) / (2.0 * root);
                // d(G^{-1/2})/du = dginv_du / (2 sqrt(ginv))
                double dgsqrt_du = dginv_du / (2.0 * gsqrt);
                out.g_inv = Vector::Constant(d, ginv);
                out.g_inv_sqrt = Vector::Constant(d, gsqrt);
                out.g_inv_deriv = dginv_du * grad_u;
                out.g_inv_sqrt_deriv = dgsqrt_du * grad_u;
                return out;
            }
            case Kind::user_fn:
                return user_fn_(theta);
        }
        throw error("MetricSpec: bad kind");
    }

  private:
    Kind kind_ = Kind::identity;
    double level_d_ = 1.0;
    double level_c_ = 0.0;
    PotentialValueFn full_potential_;
    PotentialGradFn full_potential_grad_;
    UserFn user_fn_;
};

}  // namespace sgmcmc
