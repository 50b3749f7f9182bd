#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sgmcmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error hierarchy. Every throwing path in the library uses one of these so
// callers (and the CLI exit-code mapping) can tell misconfiguration apart
// from numeric failure.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : error {
    using error::error;
};
struct dimension_error : error {
    using error::error;
};
struct numeric_error : error {
    using error::error;
};
struct step_error : error {
    using error::error;
};
struct domain_error : error {
    using error::error;
};
struct parse_error : error {
    using error::error;
};

inline bool all_finite(const Vector& v) {
    return v.allFinite();
}

// 17 significant digits: enough to round-trip a double exactly, so CSV
// replay is bit-faithful.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw config_error(msg);
}

}  // namespace sgmcmc
