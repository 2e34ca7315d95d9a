#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mnse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Bad user input: malformed files, invalid configuration, violated preconditions.
/// Mapped to exit code 1 by the CLI.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Failure inside a numerical routine (singular kernel, eigensolver failure).
/// Mapped to exit code 2 by the CLI.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using SampleId = long long;

} // namespace mnse
