#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace delayctl {

using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Numerical knobs shared across the library. All values strictly positive,
/// max_iter >= 1.
struct ToleranceSet {
    double fp_rel = 1e-10;   ///< relative fixed-point stopping tolerance
    double pd_tol = 1e-9;    ///< definiteness slack, relative to largest |eigenvalue|
    double inv_tol = 1e-12;  ///< invertibility threshold on the singular-value ratio
    double div_norm = 1e12;  ///< iterate norm beyond which a solve counts as diverged
    int max_iter = 10'000;   ///< iteration cap

    [[nodiscard]] bool valid() const {
        return fp_rel > 0 && pd_tol > 0 && inv_tol > 0 && div_norm > 0 && max_iter >= 1;
    }
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};
struct SingularMatrix : Error {
    using Error::Error;
};
struct NumericalFailure : Error {
    using Error::Error;
};
struct DuplicateDelay : Error {
    using Error::Error;
};
struct HistoryLengthMismatch : DimensionMismatch {
    using DimensionMismatch::DimensionMismatch;
};
struct MissingNoise : Error {
    using Error::Error;
};
struct ConsistencyFailure : Error {
    using Error::Error;
};
struct AssumptionViolated : Error {
    using Error::Error;
};
struct InvalidVariance : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct SchemaError : Error {
    using Error::Error;
};

}  // namespace delayctl
