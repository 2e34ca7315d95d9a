#include "mnse/kernel.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace mnse {

Matrix rbf_kernel_matrix(const Matrix& X, double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("kernel scale sigma must be > 0");
    const int n = static_cast<int>(X.rows());
    Matrix Psi(n, n);
    const double inv_s2 = 1.0 / (sigma * sigma);
    for (int i = 0; i < n; ++i) {
        Psi(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            const double w = std::exp(-(X.row(i) - X.row(j)).squaredNorm() * inv_s2);
            Psi(i, j) = w;
            Psi(j, i) = w;
        }
    }
    return Psi;
}

namespace {

// Walks the jitter ladder until LLT succeeds; returns (factorization, lambda).
std::pair<Eigen::LLT<Matrix>, double> factorize_with_jitter(const Matrix& Psi) {
    if (Psi.rows() != Psi.cols()) throw ValidationError("kernel matrix must be square");
    const double scale = Psi.diagonal().mean();
    for (double mult : kJitterLadder) {
        const double lambda = mult * scale;
        Matrix reg = Psi;
        reg.diagonal().array() += lambda;
        Eigen::LLT<Matrix> llt(reg);
        if (llt.info() == Eigen::Success) return {std::move(llt), lambda};
    }
    throw NumericError("singular kernel matrix: factorization failed at the top of the jitter ladder");
}

} // namespace

FitResult fit_coefficients(const Matrix& Psi, const Matrix& Y) {
    if (Psi.rows() != Y.rows()) throw ValidationError("kernel/embedding row mismatch");
    auto [llt, lambda] = factorize_with_jitter(Psi);
    return {llt.solve(Y), lambda};
}

double lipschitz_constant(int num_points, double sigma, const Matrix& C) {
    if (!(sigma > 0.0)) throw ValidationError("kernel scale sigma must be > 0");
    return std::sqrt(2.0) * std::exp(-0.5) * std::sqrt(double(num_points)) / sigma * C.norm();
}

Vector InterpolatorModel::evaluate(const Vector& x) const {
    if (x.size() != X.cols()) {
        throw ValidationError("query dimension " + std::to_string(x.size()) +
                              " does not match modality dimension " + std::to_string(X.cols()));
    }
    const double inv_s2 = 1.0 / (sigma * sigma);
    Vector phi(X.rows());
    for (int i = 0; i < X.rows(); ++i) {
        phi[i] = std::exp(-(X.row(i).transpose() - x).squaredNorm() * inv_s2);
    }
    return C.transpose() * phi;
}

Matrix InterpolatorModel::evaluate_rows(const Matrix& Xq) const {
    Matrix out(Xq.rows(), C.cols());
    for (int i = 0; i < Xq.rows(); ++i) {
        out.row(i) = evaluate(Xq.row(i).transpose()).transpose();
    }
    return out;
}

InterpolatorModel fit_interpolator(const Matrix& X, const Matrix& Y, double sigma) {
    InterpolatorModel model;
    model.X = X;
    model.Y = Y;
    model.sigma = sigma;
    auto fit = fit_coefficients(rbf_kernel_matrix(X, sigma), Y);
    model.C = std::move(fit.C);
    model.lambda = fit.lambda;
    return model;
}

std::pair<Matrix, double> kernel_inverse_squared(const Matrix& Psi) {
    auto [llt, lambda] = factorize_with_jitter(Psi);
    const Matrix inv = llt.solve(Matrix::Identity(Psi.rows(), Psi.cols()));
    Matrix inv_sq = llt.solve(inv);
    inv_sq = ((inv_sq + inv_sq.transpose()) * 0.5).eval();
    return {std::move(inv_sq), lambda};
}

} // namespace mnse
