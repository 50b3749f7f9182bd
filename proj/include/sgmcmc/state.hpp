#pragma once

#include <array>
#include <string>
#include <vector>

#include "sgmcmc/common.hpp"

namespace sgmcmc {

// Augmented sampler state z. The parameter block `theta` is always present;
// `r` holds momentum-like auxiliaries and `xi` a scalar thermostat. Blocks
// are stored flattened in this fixed order.
enum class Block { theta, r, xi };

inline const char* block_name(Block b) {
    switch (b) {
        case Block::theta: return "theta";
        case Block::r: return "r";
        case Block::xi: return "xi";
    }
    return "?";
}

class BlockLayout {
  public:
    BlockLayout() = default;
    BlockLayout(Eigen::Index theta_dim, Eigen::Index r_dim = 0, Eigen::Index xi_dim = 0)
        : theta_(theta_dim), r_(r_dim), xi_(xi_dim) {
        if (theta_ < 1) throw dimension_error("BlockLayout: theta block must be non-empty");
        if (r_ < 0 || xi_ < 0 || xi_ > 1)
            throw dimension_error("BlockLayout: bad auxiliary block sizes");
    }

    Eigen::Index theta_dim() const { return theta_; }
    Eigen::Index r_dim() const { return r_; }
    Eigen::Index xi_dim() const { return xi_; }
    Eigen::Index dim() const { return theta_ + r_ + xi_; }

    bool has_r() const { return r_ > 0; }
    bool has_xi() const { return xi_ > 0; }

    Eigen::Index offset(Block b) const {
        switch (b) {
            case Block::theta: return 0;
            case Block::r: return theta_;
            case Block::xi: return theta_ + r_;
        }
        return 0;
    }
    Eigen::Index size(Block b) const {
        switch (b) {
            case Block::theta: return theta_;
            case Block::r: return r_;
            case Block::xi: return xi_;
        }
        return 0;
    }

    bool operator==(const BlockLayout& o) const {
        return theta_ == o.theta_ && r_ == o.r_ && xi_ == o.xi_;
    }
    bool operator!=(const BlockLayout& o) const { return !(*this == o); }

  private:
    Eigen::Index theta_ = 1;
    Eigen::Index r_ = 0;
    Eigen::Index xi_ = 0;
};

class StateVector {
  public:
    StateVector() : layout_(1), values_(Vector::Zero(1)) {}
    explicit StateVector(BlockLayout layout)
        : layout_(layout), values_(Vector::Zero(layout.dim())) {}
    StateVector(BlockLayout layout, Vector values) : layout_(layout), values_(std::move(values)) {
        if (values_.size() != layout_.dim())
            throw dimension_error("StateVector: flat vector length does not match layout");
    }

    const BlockLayout& layout() const { return layout_; }
    Eigen::Index dim() const { return layout_.dim(); }

    const Vector& flat() const { return values_; }
    Vector& flat() { return values_; }

    auto block(Block b) { return values_.segment(layout_.offset(b), layout_.size(b)); }
    auto block(Block b) const { return values_.segment(layout_.offset(b), layout_.size(b)); }

    auto theta() { return block(Block::theta); }
    auto theta() const { return block(Block::theta); }
    auto r() { return block(Block::r); }
    auto r() const { return block(Block::r); }

    double xi() const {
        if (!layout_.has_xi()) throw dimension_error("StateVector: no xi block");
        return values_[layout_.offset(Block::xi)];
    }
    double& xi() {
        if (!layout_.has_xi()) throw dimension_error("StateVector: no xi block");
        return values_[layout_.offset(Block::xi)];
    }

    bool finite() const { return values_.allFinite(); }

  private:
    BlockLayout layout_;
    Vector values_;
};

inline StateVector unflatten(const BlockLayout& layout, const Vector& flat) {
    return StateVector(layout, flat);
}

inline const Vector& flatten(const StateVector& z) {
    return z.flat();
}

}  // namespace sgmcmc
