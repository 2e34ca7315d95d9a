#include "mnse/graphs.hpp"

#include <algorithm>
#include <cmath>

namespace mnse {

namespace {

double gaussian_weight(double dist_sq, double theta) {
    return std::exp(-dist_sq / (theta * theta));
}

} // namespace

AffinityMatrix within_class_affinity(const Matrix& X, const std::vector<int>& labels,
                                     double theta, int modality,
                                     const std::vector<SampleId>& ids) {
    if (!(theta > 0.0)) throw ValidationError("affinity scale theta must be > 0");
    const int n = static_cast<int>(X.rows());
    if (static_cast<int>(labels.size()) != n) throw ValidationError("labels/rows mismatch");
    AffinityMatrix out;
    out.W = Matrix::Zero(n, n);
    out.row_modality = out.col_modality = modality;
    out.row_ids = out.col_ids = ids;
    for (int i = 0; i < n; ++i) {
        out.W(i, i) = 1.0; // self-pair: zero distance, same class
        for (int j = i + 1; j < n; ++j) {
            if (labels[i] != labels[j]) continue;
            const double w = gaussian_weight((X.row(i) - X.row(j)).squaredNorm(), theta);
            out.W(i, j) = w;
            out.W(j, i) = w;
        }
    }
    return out;
}

AffinityMatrix between_class_indicator(const std::vector<int>& labels, int modality,
                                       const std::vector<SampleId>& ids) {
    const int n = static_cast<int>(labels.size());
    AffinityMatrix out;
    out.W = Matrix::Zero(n, n);
    out.row_modality = out.col_modality = modality;
    out.row_ids = out.col_ids = ids;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (labels[i] != labels[j]) out.W(i, j) = 1.0;
        }
    }
    return out;
}

AffinityMatrix cross_modal_within(const MultiModalDataset& ds, int v, int u, double theta) {
    if (v == u) throw ValidationError("cross-modal block needs two distinct modalities");
    if (!(theta > 0.0)) throw ValidationError("affinity scale theta must be > 0");
    if (ds.rows(v) == 0 || ds.rows(u) == 0) throw ValidationError("empty modality");

    const auto labels_v = ds.labels_for(v);
    const auto labels_u = ds.labels_for(u);
    AffinityMatrix out;
    out.W = Matrix::Zero(ds.rows(v), ds.rows(u));
    out.row_modality = v;
    out.col_modality = u;
    out.row_ids = ds.modality_sample_ids[v];
    out.col_ids = ds.modality_sample_ids[u];

    // Comparison distance in a common modality: prefer v, then u, then the
    // lowest-indexed modality observing both samples.
    auto comparison_dist_sq = [&](SampleId a, SampleId b) -> std::optional<double> {
        for (int r : {v, u}) {
            auto ra = ds.row_of(r, a);
            auto rb = ds.row_of(r, b);
            if (ra && rb) {
                return (ds.modality_features[r].row(*ra) - ds.modality_features[r].row(*rb))
                    .squaredNorm();
            }
        }
        for (int r = 0; r < ds.num_modalities; ++r) {
            if (r == v || r == u) continue;
            auto ra = ds.row_of(r, a);
            auto rb = ds.row_of(r, b);
            if (ra && rb) {
                return (ds.modality_features[r].row(*ra) - ds.modality_features[r].row(*rb))
                    .squaredNorm();
            }
        }
        return std::nullopt;
    };

    for (int i = 0; i < ds.rows(v); ++i) {
        for (int j = 0; j < ds.rows(u); ++j) {
            if (labels_v[i] != labels_u[j]) continue;
            auto d2 = comparison_dist_sq(out.row_ids[i], out.col_ids[j]);
            if (d2) out.W(i, j) = gaussian_weight(*d2, theta);
        }
    }
    return out;
}

AffinityMatrix cross_modal_between(const std::vector<int>& labels_v,
                                   const std::vector<int>& labels_u, int v, int u) {
    if (v == u) throw ValidationError("cross-modal block needs two distinct modalities");
    AffinityMatrix out;
    out.W = Matrix::Zero(labels_v.size(), labels_u.size());
    out.row_modality = v;
    out.col_modality = u;
    for (int i = 0; i < static_cast<int>(labels_v.size()); ++i) {
        for (int j = 0; j < static_cast<int>(labels_u.size()); ++j) {
            if (labels_v[i] != labels_u[j]) out.W(i, j) = 1.0;
        }
    }
    return out;
}

Matrix laplacian(const Matrix& W) {
    if (W.rows() != W.cols()) throw ValidationError("Laplacian needs a square matrix");
    if (!W.isApprox(W.transpose(), 0.0)) throw ValidationError("Laplacian needs a symmetric matrix");
    Matrix L = -W;
    for (int i = 0; i < W.rows(); ++i) L(i, i) += W.row(i).sum();
    return L;
}

Matrix assemble_block_diagonal(const std::vector<Matrix>& blocks) {
    int n = 0;
    for (const auto& b : blocks) {
        if (b.rows() != b.cols()) throw ValidationError("block-diagonal blocks must be square");
        n += static_cast<int>(b.rows());
    }
    Matrix out = Matrix::Zero(n, n);
    int off = 0;
    for (const auto& b : blocks) {
        out.block(off, off, b.rows(), b.cols()) = b;
        off += static_cast<int>(b.rows());
    }
    return out;
}

std::pair<Matrix, Matrix>
assemble_cross(const std::map<std::pair<int, int>, AffinityMatrix>& blocks,
               const std::vector<int>& modality_sizes) {
    const int V = static_cast<int>(modality_sizes.size());
    int n = 0;
    std::vector<int> offsets(V);
    for (int v = 0; v < V; ++v) {
        offsets[v] = n;
        n += modality_sizes[v];
    }
    Matrix W = Matrix::Zero(n, n);
    for (int v = 0; v < V; ++v) {
        for (int u = 0; u < V; ++u) {
            if (v == u) continue;
            const Matrix* block = nullptr;
            Matrix transposed;
            if (auto it = blocks.find({v, u}); it != blocks.end()) {
                block = &it->second.W;
            } else if (auto jt = blocks.find({u, v}); jt != blocks.end()) {
                transposed = jt->second.W.transpose();
                block = &transposed;
            } else {
                throw ValidationError("missing cross-modal block (" + std::to_string(v) + "," +
                                      std::to_string(u) + ")");
            }
            if (block->rows() != modality_sizes[v] || block->cols() != modality_sizes[u]) {
                throw ValidationError("cross-modal block shape inconsistent with modality sizes");
            }
            W.block(offsets[v], offsets[u], modality_sizes[v], modality_sizes[u]) = *block;
        }
    }
    W = ((W + W.transpose()) * 0.5).eval();
    return {W, laplacian(W)};
}

double reference_scale(const Matrix& X, const std::vector<int>& labels) {
    std::vector<double> same_class;
    std::vector<double> all;
    const int n = static_cast<int>(X.rows());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = (X.row(i) - X.row(j)).norm();
            if (d <= 0.0) continue;
            all.push_back(d);
            if (i < static_cast<int>(labels.size()) && j < static_cast<int>(labels.size()) &&
                labels[i] == labels[j]) {
                same_class.push_back(d);
            }
        }
    }
    auto median = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        const std::size_t k = v.size() / 2;
        return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
    };
    if (!same_class.empty()) return median(same_class);
    if (!all.empty()) return median(all);
    return 1.0;
}

LaplacianSet build_laplacians(const MultiModalDataset& ds, const std::vector<double>& thetas) {
    const int V = ds.num_modalities;
    if (static_cast<int>(thetas.size()) != V) throw ValidationError("theta per modality required");

    std::vector<Matrix> lw_blocks, lb_blocks;
    std::vector<int> sizes(V);
    for (int v = 0; v < V; ++v) {
        sizes[v] = ds.rows(v);
        const auto labels = ds.labels_for(v);
        lw_blocks.push_back(laplacian(
            within_class_affinity(ds.modality_features[v], labels, thetas[v], v,
                                  ds.modality_sample_ids[v]).W));
        lb_blocks.push_back(laplacian(between_class_indicator(labels, v,
                                                              ds.modality_sample_ids[v]).W));
    }

    // Both ordered blocks are built: the common-modality rule is not
    // symmetric in (v,u), and the post-assembly symmetrization averages the
    // two orderings.
    std::map<std::pair<int, int>, AffinityMatrix> cw_blocks, cb_blocks;
    for (int v = 0; v < V; ++v) {
        for (int u = 0; u < V; ++u) {
            if (v == u) continue;
            const double theta_vu = 0.5 * (thetas[v] + thetas[u]);
            cw_blocks[{v, u}] = cross_modal_within(ds, v, u, theta_vu);
            cb_blocks[{v, u}] = cross_modal_between(ds.labels_for(v), ds.labels_for(u), v, u);
        }
    }

    LaplacianSet lap;
    lap.L_within = assemble_block_diagonal(lw_blocks);
    lap.L_between = assemble_block_diagonal(lb_blocks);
    if (V > 1) {
        lap.L_cross_within = assemble_cross(cw_blocks, sizes).second;
        lap.L_cross_between = assemble_cross(cb_blocks, sizes).second;
    } else {
        lap.L_cross_within = Matrix::Zero(sizes[0], sizes[0]);
        lap.L_cross_between = Matrix::Zero(sizes[0], sizes[0]);
    }
    return lap;
}

} // namespace mnse
