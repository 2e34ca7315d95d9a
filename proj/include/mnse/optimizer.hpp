#pragma once

#include <string>
#include <vector>

#include "mnse/dataset.hpp"
#include "mnse/graphs.hpp"
#include "mnse/kernel.hpp"
#include "mnse/types.hpp"

namespace mnse {

struct SigmaGridSpec {
    int count = 25;
    double min_mult = 0.1;  // multipliers of the per-modality reference scale
    double max_mult = 10.0;

    /// Log-spaced candidate scales around `reference`.
    std::vector<double> values(double reference) const;
};

struct HyperParams {
    double mu1 = 100.0;   // between-class separation weight
    double mu2 = 1e-3;    // interpolator coefficient (regularity) weight
    double mu3 = 1.0;     // kernel scale weight
    double mu4 = 100.0;   // cross-modal within-class weight
    double mu5 = 100.0;   // cross-modal between-class weight
    int dim = 0;          // embedding dimension; 0 = num_classes - 1
    SigmaGridSpec sigma_grid;
    int max_iters = 50;
    double tol = 1e-6;    // relative objective decrease threshold
    std::vector<double> theta_override; // per-modality graph scale; empty/0 = auto

    /// Weights used for the multi-view classification experiments.
    static HyperParams classification_defaults();
    /// Weights used for the cross-modal retrieval experiments.
    static HyperParams retrieval_defaults();

    int resolve_dim(int num_classes) const;
    void validate() const;
};

struct TraceEntry {
    int iteration = 0;               // 1-based
    double objective_after_y = 0.0;
    double objective_after_sigma = 0.0;
    std::vector<double> sigma;       // per modality, after the sigma step
    double ortho_error = 0.0;        // ||Y^T Y - I||_F after the Y step
};

using ObjectiveTrace = std::vector<TraceEntry>;

/// A trained multi-modal embedding: the stacked training embedding, one RBF
/// interpolator per modality, and the optimization trace.
struct EmbeddingModel {
    MultiModalDataset train;
    Matrix Y_stacked;                          // N x d
    std::vector<InterpolatorModel> interpolators; // per modality
    std::vector<double> theta;                 // graph scales used
    HyperParams hp;
    ObjectiveTrace trace;
    bool indefinite_A = false;  // diagnostic: mu1/mu5 made A indefinite

    int dim() const { return static_cast<int>(Y_stacked.cols()); }
    int num_modalities() const { return train.num_modalities; }
    /// Row offset of each modality's block in the stacked ordering.
    std::vector<int> offsets() const;
    /// Embedding block of modality v (rows of Y_stacked).
    Matrix embedding_block(int v) const;
};

/// A = L_w - mu1 L_b + mu2 Psi^{-2} + mu4 L_cw - mu5 L_cb, symmetrized.
Matrix build_A(const LaplacianSet& lap, const Matrix& psi_inv_sq, const HyperParams& hp);

/// Orthonormal eigenvectors of symmetric A for the d algebraically smallest
/// eigenvalues, with deterministic order and sign (see solve_embedding_full).
Matrix solve_embedding(const Matrix& A, int d);

struct EigenSolution {
    Matrix Y;          // N x d
    Vector eigenvalues; // the d selected eigenvalues, ascending
    double min_eigenvalue; // smallest eigenvalue of A overall
};
EigenSolution solve_embedding_full(const Matrix& A, int d);

/// The reduced objective tr(Y^T A Y) + mu3 sum_v sigma_v^{-2}.
double objective(const Matrix& Y, const LaplacianSet& lap, const Matrix& psi_inv_sq,
                 const std::vector<double>& sigma, const HyperParams& hp);

/// Exhaustive search over {grid union incumbent} minimizing
/// g(sigma) = mu2 ||(Psi(sigma)+lambda I)^{-1} Y||_F^2 + mu3 sigma^{-2}.
/// Ties break to the largest sigma.
double optimize_sigma(const Matrix& X, const Matrix& Yv, double mu2, double mu3,
                      const std::vector<double>& grid, double incumbent);

/// Alternating minimization: eigen-solve for Y, per-modality grid search for
/// sigma, until the relative objective decrease falls below hp.tol or
/// hp.max_iters is reached.
EmbeddingModel train(const MultiModalDataset& ds, const HyperParams& hp);

} // namespace mnse
