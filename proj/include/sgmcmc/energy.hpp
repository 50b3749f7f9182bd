#pragma once

#include <functional>
#include <string>
#include <utility>

#include "sgmcmc/common.hpp"
#include "sgmcmc/state.hpp"

namespace sgmcmc {

// Diagonal mass for the kinetic coupling g(theta, r) = r' M^{-1} r / 2.
// Identity unless configured otherwise.
struct MassSpec {
    Vector inv_diag;  // empty => identity

    static MassSpec identity() { return {}; }
    static MassSpec diagonal(Vector mass_diag) {
        MassSpec m;
        m.inv_diag = mass_diag.cwiseInverse();
        return m;
    }

    bool is_identity() const { return inv_diag.size() == 0; }

    Vector apply_inverse(const Eigen::Ref<const Vector>& r) const {
        if (is_identity()) return r;
        if (inv_diag.size() != r.size()) throw dimension_error("MassSpec: dimension mismatch");
        return inv_diag.cwiseProduct(r);
    }
    double kinetic(const Eigen::Ref<const Vector>& r) const {
        return 0.5 * r.dot(apply_inverse(r));
    }
};

using PotentialFn = std::function<double(const Vector&)>;
using PotentialGradFn = std::function<Vector(const Vector&)>;

// Total energy over the augmented state:
//   H(z) = U(theta) + r' M^{-1} r / 2          (when an r block exists)
//          + (xi - A)^2 / (2 d_r)              (when a xi block exists)
// The potential U is the only user-supplied part; an analytic gradient is
// optional and falls back to central differences (intended for tests).
class EnergyModel {
  public:
    EnergyModel() = default;
    EnergyModel(BlockLayout layout, PotentialFn potential, PotentialGradFn potential_grad = nullptr)
        : layout_(layout),
          potential_(std::move(potential)),
          potential_grad_(std::move(potential_grad)) {}

    const BlockLayout& layout() const { return layout_; }
    Eigen::Index dim() const { return layout_.dim(); }

    const PotentialFn& potential_fn() const { return potential_; }
    const PotentialGradFn& potential_grad_fn() const { return potential_grad_; }

    void set_mass(MassSpec mass) { mass_ = std::move(mass); }
    const MassSpec& mass() const { return mass_; }

    void set_thermostat_center(double a) { thermostat_a_ = a; }
    double thermostat_center() const { return thermostat_a_; }

    double potential(const Vector& theta) const { return potential_(theta); }

    Vector potential_grad(const Vector& theta) const {
        if (potential_grad_) return potential_grad_(theta);
        return finite_difference_potential_grad(theta);
    }

    bool has_analytic_grad() const { return static_cast<bool>(potential_grad_); }

    double energy(const StateVector& z) const {
        check_layout(z);
        double h = potential_(Vector(z.theta()));
        if (layout_.has_r()) h += mass_.kinetic(z.r());
        if (layout_.has_xi()) {
            double dr = static_cast<double>(layout_.r_dim());
            double d = z.xi() - thermostat_a_;
            h += d * d / (2.0 * dr);
        }
        return h;
    }

    // Block-wise gradient of H, returned flattened over the full layout.
    Vector grad(const StateVector& z) const {
        check_layout(z);
        Vector g(layout_.dim());
        Vector gt = potential_grad(Vector(z.theta()));
        if (!all_finite(gt))
            throw numeric_error("EnergyModel: non-finite gradient in block theta");
        g.segment(layout_.offset(Block::theta), layout_.theta_dim()) = gt;
        if (layout_.has_r()) {
            Vector gr = mass_.apply_inverse(z.r());
            if (!all_finite(gr)) throw numeric_error("EnergyModel: non-finite gradient in block r");
            g.segment(layout_.offset(Block::r), layout_.r_dim()) = gr;
        }
        if (layout_.has_xi()) {
            double dr = static_cast<double>(layout_.r_dim());
            double gx = (z.xi() - thermostat_a_) / dr;
            if (!std::isfinite(gx))
                throw numeric_error("EnergyModel: non-finite gradient in block xi");
            g[layout_.offset(Block::xi)] = gx;
        }
        return g;
    }

    // Gradient of H with the theta component replaced by an externally
    // supplied (typically stochastic) estimate of grad U.
    Vector grad_with_potential_grad(const StateVector& z, const Vector& theta_grad) const {
        check_layout(z);
        if (theta_grad.size() != layout_.theta_dim())
            throw dimension_error("EnergyModel: theta gradient has wrong dimension");
        Vector g(layout_.dim());
        g.segment(0, layout_.theta_dim()) = theta_grad;
        if (layout_.has_r())
            g.segment(layout_.offset(Block::r), layout_.r_dim()) = mass_.apply_inverse(z.r());
        if (layout_.has_xi())
            g[layout_.offset(Block::xi)] =
                (z.xi() - thermostat_a_) / static_cast<double>(layout_.r_dim());
        return g;
    }

    Vector finite_difference_potential_grad(const Vector& theta) const {
        Vector g(theta.size());
        Vector t = theta;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            double h = 1e-5 * std::max(1.0, std::abs(theta[i]));
            double orig = t[i];
            t[i] = orig + h;
            double up = potential_(t);
            t[i] = orig - h;
            double dn = potential_(t);
            t[i] = orig;
            g[i] = (up - dn) / (2.0 * h);
        }
        return g;
    }

    // Full finite-difference gradient of H (all blocks), used as the oracle
    // when checking analytic gradients.
    Vector finite_difference_grad(const StateVector& z) const {
        check_layout(z);
        Vector g(layout_.dim());
        Vector flat = z.flat();
        for (Eigen::Index i = 0; i < flat.size(); ++i) {
            double h = 1e-5 * std::max(1.0, std::abs(flat[i]));
            double orig = flat[i];
            flat[i] = orig + h;
            double up = energy(StateVector(layout_, flat));
            flat[i] = orig - h;
            double dn = energy(StateVector(layout_, flat));
            flat[i] = orig;
            g[i] = (up - dn) / (2.0 * h);
        }
        return g;
    }

  private:
    void check_layout(const StateVector& z) const {
        if (z.layout() != layout_)
            throw dimension_error("EnergyModel: state layout does not match model layout");
    }

    BlockLayout layout_{1};
    PotentialFn potential_;
    PotentialGradFn potential_grad_;
    MassSpec mass_;
    double thermostat_a_ = 0.0;
};

}  // namespace sgmcmc
