#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace rokdeepc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Dimension error for mismatched matrix/vector shapes.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// File parsing error (CSV, config); message carries the offending location.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Configuration validation error; message names the field path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Solver-level failure (divergence, infeasibility, factorization).
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InfeasibleError : SolverError {
    using SolverError::SolverError;
};

/// Problem dimensions shared across modules: input/output channel counts,
/// estimation window length and prediction horizon.
struct Dims {
    int m = 1;        // input channels
    int p = 1;        // output channels
    int t_ini = 1;    // initial window length
    int horizon = 5;  // prediction horizon N

    int past_len() const { return (m + p) * t_ini; }
    int u_len() const { return m * horizon; }
    int y_len() const { return p * horizon; }
    int regressor_len() const { return past_len() + u_len(); }

    void validate() const {
        if (m < 1 || p < 1 || t_ini < 1 || horizon < 1)
            throw DimensionError("Dims: m, p, t_ini, horizon must all be >= 1");
    }

    bool operator==(const Dims&) const = default;
};

}  // namespace rokdeepc
