#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace riscell {

// All stochastic code draws from an explicitly passed stream so that
// parallel workers can own disjoint generators.
using RandomStream = std::mt19937_64;

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when an action violates the sleep-mode chain or the
// association constraints of the environment.
struct ConstraintError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

}  // namespace riscell
