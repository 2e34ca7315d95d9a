#pragma once

#include <vector>

#include "mnse/types.hpp"

namespace mnse {

/// Psi_ij = exp(-||x_i - x_j||^2 / sigma^2). Symmetric with unit diagonal.
Matrix rbf_kernel_matrix(const Matrix& X, double sigma);

/// Relative jitter ladder tried in order when factorizing a kernel matrix;
/// each entry is scaled by mean(diag Psi).
inline constexpr double kJitterLadder[] = {0.0, 1e-12, 1e-10, 1e-8, 1e-6};

struct FitResult {
    Matrix C;        // solves (Psi + lambda I) C = Y
    double lambda;   // jitter actually applied
};

/// Solves (Psi + lambda I) C = Y by Cholesky, walking the jitter ladder until
/// the factorization succeeds. Throws NumericError at the top of the ladder.
FitResult fit_coefficients(const Matrix& Psi, const Matrix& Y);

/// Closed-form Lipschitz constant of a Gaussian RBF interpolant:
/// L = sqrt(2) e^{-1/2} sqrt(N) ||C||_F / sigma.
double lipschitz_constant(int num_points, double sigma, const Matrix& C);

/// A fitted Gaussian RBF interpolator for one modality: maps feature vectors
/// to the d-dimensional embedding space.
struct InterpolatorModel {
    Matrix X;        // training features, N_v x n_v
    Matrix Y;        // embedding block, N_v x d
    Matrix C;        // coefficients, N_v x d
    double sigma = 1.0;
    double lambda = 0.0;

    int dim() const { return static_cast<int>(C.cols()); }

    Vector evaluate(const Vector& x) const;
    /// Row-wise evaluation of a batch of query points.
    Matrix evaluate_rows(const Matrix& Xq) const;
    double lipschitz() const { return lipschitz_constant(static_cast<int>(X.rows()), sigma, C); }
};

/// Fits an interpolator to (X, Y) at the given kernel scale.
InterpolatorModel fit_interpolator(const Matrix& X, const Matrix& Y, double sigma);

/// (Psi + lambda I)^{-2}, computed by two solves against the Cholesky factor
/// rather than squaring an explicit inverse. Returns the applied lambda.
std::pair<Matrix, double> kernel_inverse_squared(const Matrix& Psi);

} // namespace mnse
