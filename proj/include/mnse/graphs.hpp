#pragma once

#include <map>
#include <utility>
#include <vector>

#include "mnse/dataset.hpp"
#include "mnse/types.hpp"

namespace mnse {

/// A dense nonnegative affinity matrix together with the modalities and
/// sample IDs its rows/columns refer to.
struct AffinityMatrix {
    Matrix W;
    int row_modality = 0;
    int col_modality = 0;
    std::vector<SampleId> row_ids;
    std::vector<SampleId> col_ids;
};

/// The four stacked N x N Laplacians of the embedding objective, over the
/// modality-major row ordering (all modality-1 rows, then modality-2, ...).
struct LaplacianSet {
    Matrix L_within;        // block-diagonal of per-modality within-class Laplacians
    Matrix L_between;       // block-diagonal of per-modality between-class Laplacians
    Matrix L_cross_within;  // Laplacian of the cross-modal within-class affinity
    Matrix L_cross_between; // Laplacian of the cross-modal between-class indicator
};

/// Gaussian same-class affinity: W_ij = exp(-||x_i - x_j||^2 / theta^2) when
/// labels match (so the diagonal is 1), 0 otherwise.
AffinityMatrix within_class_affinity(const Matrix& X, const std::vector<int>& labels,
                                     double theta, int modality = 0,
                                     const std::vector<SampleId>& ids = {});

/// Binary indicator: 1 where labels differ.
AffinityMatrix between_class_indicator(const std::vector<int>& labels, int modality = 0,
                                       const std::vector<SampleId>& ids = {});

/// Cross-modal same-class affinity block between modalities v and u. The
/// comparison distance between samples i (in v) and j (in u) is taken in a
/// common modality: in v if both are observed there, else in u, else in the
/// lowest-indexed modality holding both; the weight is 0 when none exists.
AffinityMatrix cross_modal_within(const MultiModalDataset& ds, int v, int u, double theta);

/// Cross-modal between-class indicator block: 1 where classes differ.
AffinityMatrix cross_modal_between(const std::vector<int>& labels_v,
                                   const std::vector<int>& labels_u,
                                   int v = 0, int u = 1);

/// L = D - W with D the diagonal of row sums. W must be square and symmetric.
Matrix laplacian(const Matrix& W);

/// Block-diagonal stacking in the given order; off-blocks are zero.
Matrix assemble_block_diagonal(const std::vector<Matrix>& blocks);

/// Assembles the stacked cross-modal affinity W~ (zero diagonal blocks,
/// block (v,u) taken from `blocks`, missing blocks derived by transpose),
/// symmetrizes it as (W~ + W~^T)/2, and returns (W~, L~ = D~ - W~).
std::pair<Matrix, Matrix>
assemble_cross(const std::map<std::pair<int, int>, AffinityMatrix>& blocks,
               const std::vector<int>& modality_sizes);

/// Median of the nonzero same-class pairwise distances in X; the default
/// graph scale theta and the sigma reference scale. Falls back to the median
/// over all nonzero pairs, then to 1.0, when the preferred set is empty.
double reference_scale(const Matrix& X, const std::vector<int>& labels);

/// Builds all four stacked Laplacians for a dataset. `thetas` holds the
/// per-modality Gaussian scales; cross-modal blocks use the mean of the two
/// modalities' thetas.
LaplacianSet build_laplacians(const MultiModalDataset& ds, const std::vector<double>& thetas);

} // namespace mnse
