#include "mnse/optimizer.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace mnse {

std::vector<double> SigmaGridSpec::values(double reference) const {
    std::vector<double> out;
    out.reserve(count);
    if (count == 1) {
        out.push_back(reference * min_mult);
        return out;
    }
    const double log_min = std::log(reference * min_mult);
    const double log_max = std::log(reference * max_mult);
    for (int i = 0; i < count; ++i) {
        out.push_back(std::exp(log_min + (log_max - log_min) * i / (count - 1)));
    }
    return out;
}

HyperParams HyperParams::classification_defaults() {
    HyperParams hp;
    hp.mu1 = 100.0;
    hp.mu2 = 1e-3;
    hp.mu3 = 1.0;
    hp.mu4 = 100.0;
    hp.mu5 = 100.0;
    return hp;
}

HyperParams HyperParams::retrieval_defaults() {
    HyperParams hp;
    hp.mu1 = 0.1;
    hp.mu2 = 1.0;
    hp.mu3 = 1.0;
    hp.mu4 = 10.0;
    hp.mu5 = 0.1;
    return hp;
}

int HyperParams::resolve_dim(int num_classes) const {
    return dim > 0 ? dim : std::max(1, num_classes - 1);
}

void HyperParams::validate() const {
    if (mu1 < 0 || mu2 < 0 || mu3 < 0 || mu4 < 0 || mu5 < 0) {
        throw ValidationError("objective weights mu1..mu5 must be >= 0");
    }
    if (dim < 0) throw ValidationError("embedding dimension must be >= 1 (or 0 for auto)");
    if (sigma_grid.count < 1) throw ValidationError("sigma grid count must be >= 1");
    if (!(sigma_grid.min_mult > 0) || sigma_grid.max_mult < sigma_grid.min_mult) {
        throw ValidationError("sigma grid multipliers must satisfy 0 < min <= max");
    }
    if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (!(tol > 0)) throw ValidationError("tolerance must be > 0");
}

std::vector<int> EmbeddingModel::offsets() const {
    std::vector<int> off(train.num_modalities, 0);
    for (int v = 1; v < train.num_modalities; ++v) off[v] = off[v - 1] + train.rows(v - 1);
    return off;
}

Matrix EmbeddingModel::embedding_block(int v) const {
    return Y_stacked.middleRows(offsets()[v], train.rows(v));
}

Matrix build_A(const LaplacianSet& lap, const Matrix& psi_inv_sq, const HyperParams& hp) {
    const auto n = lap.L_within.rows();
    if (lap.L_between.rows() != n || lap.L_cross_within.rows() != n ||
        lap.L_cross_between.rows() != n || psi_inv_sq.rows() != n || psi_inv_sq.cols() != n) {
        throw ValidationError("objective matrices must share the stacked N x N shape");
    }
    Matrix A = lap.L_within - hp.mu1 * lap.L_between + hp.mu2 * psi_inv_sq +
               hp.mu4 * lap.L_cross_within - hp.mu5 * lap.L_cross_between;
    return ((A + A.transpose()) * 0.5).eval();
}

namespace {

// Deterministic eigenvector convention: the entry of largest magnitude
// (first such index on ties) is made positive.
void fix_column_sign(Eigen::Ref<Matrix> cols) {
    for (int k = 0; k < cols.cols(); ++k) {
        int arg = 0;
        double best = -1.0;
        for (int i = 0; i < cols.rows(); ++i) {
            const double a = std::abs(cols(i, k));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (cols(arg, k) < 0.0) cols.col(k) = -cols.col(k);
    }
}

bool lexicographic_less(const Matrix& M, int a, int b) {
    for (int i = 0; i < M.rows(); ++i) {
        if (M(i, a) != M(i, b)) return M(i, a) < M(i, b);
    }
    return false;
}

} // namespace

EigenSolution solve_embedding_full(const Matrix& A, int d) {
    if (A.rows() != A.cols()) throw ValidationError("A must be square");
    if (d < 1 || d > A.rows()) throw ValidationError("embedding dimension must satisfy 1 <= d <= N");
    if (!A.isApprox(A.transpose(), 1e-12)) throw ValidationError("A must be symmetric");

    Eigen::SelfAdjointEigenSolver<Matrix> solver(A);
    if (solver.info() != Eigen::Success) throw NumericError("symmetric eigensolver failed");

    Matrix vectors = solver.eigenvectors(); // ascending eigenvalues
    Vector values = solver.eigenvalues();
    fix_column_sign(vectors);

    // Stable order: ascending eigenvalue, exact ties by lexicographic
    // comparison of the sign-fixed eigenvectors.
    std::vector<int> order(A.rows());
    for (int i = 0; i < A.rows(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (values[a] != values[b]) return values[a] < values[b];
        return lexicographic_less(vectors, a, b);
    });

    EigenSolution sol;
    sol.Y = Matrix(A.rows(), d);
    sol.eigenvalues = Vector(d);
    for (int k = 0; k < d; ++k) {
        sol.Y.col(k) = vectors.col(order[k]);
        sol.eigenvalues[k] = values[order[k]];
    }
    sol.min_eigenvalue = values.minCoeff();
    return sol;
}

Matrix solve_embedding(const Matrix& A, int d) { return solve_embedding_full(A, d).Y; }

namespace {

double trace_quad(const Matrix& Y, const Matrix& M) {
    return (M * Y).cwiseProduct(Y).sum();
}

} // namespace

double objective(const Matrix& Y, const LaplacianSet& lap, const Matrix& psi_inv_sq,
                 const std::vector<double>& sigma, const HyperParams& hp) {
    double scale_term = 0.0;
    for (double s : sigma) {
        if (!(s > 0.0)) throw ValidationError("sigma must be > 0");
        scale_term += 1.0 / (s * s);
    }
    const Matrix A = build_A(lap, psi_inv_sq, hp);
    return trace_quad(Y, A) + hp.mu3 * scale_term;
}

namespace {

// The per-modality scale objective g(sigma) = mu2 ||(Psi+lambda I)^{-1}Y||_F^2
// + mu3 sigma^{-2}. All recorded objective values go through this one routine
// so that incumbent comparisons are exact.
double sigma_objective(const Matrix& X, const Matrix& Yv, double mu2, double mu3, double s) {
    double g = mu3 / (s * s);
    if (mu2 != 0.0) {
        g += mu2 * fit_coefficients(rbf_kernel_matrix(X, s), Yv).C.squaredNorm();
    }
    return g;
}

struct SigmaChoice {
    double sigma;
    double g;
};

// incumbent_g must be the value sigma_objective produced for the incumbent;
// reusing the scalar keeps the argmin exact.
SigmaChoice optimize_sigma_impl(const Matrix& X, const Matrix& Yv, double mu2, double mu3,
                                const std::vector<double>& grid, double incumbent,
                                double incumbent_g) {
    if (grid.empty()) throw ValidationError("sigma grid must be non-empty");
    double best_sigma = incumbent;
    double best_g = incumbent_g;
    bool any_ok = std::isfinite(incumbent_g);
    for (double s : grid) {
        if (!(s > 0.0)) continue;
        double g;
        try {
            g = sigma_objective(X, Yv, mu2, mu3, s);
        } catch (const NumericError&) {
            continue; // candidate unusable at the top of the jitter ladder
        }
        if (!any_ok || g < best_g || (g == best_g && s > best_sigma)) {
            any_ok = true;
            best_g = g;
            best_sigma = s;
        }
    }
    if (!any_ok) throw NumericError("every sigma candidate failed to factorize");
    return {best_sigma, best_g};
}

} // namespace

double optimize_sigma(const Matrix& X, const Matrix& Yv, double mu2, double mu3,
                      const std::vector<double>& grid, double incumbent) {
    double incumbent_g = std::numeric_limits<double>::infinity();
    if (incumbent > 0.0) {
        try {
            incumbent_g = sigma_objective(X, Yv, mu2, mu3, incumbent);
        } catch (const NumericError&) {
        }
    }
    return optimize_sigma_impl(X, Yv, mu2, mu3, grid, incumbent, incumbent_g).sigma;
}

EmbeddingModel train(const MultiModalDataset& ds, const HyperParams& hp) {
    hp.validate();
    const int V = ds.num_modalities;
    const int N = ds.total_rows();
    const int d = hp.resolve_dim(ds.num_classes);
    if (d > N) throw ValidationError("embedding dimension exceeds the number of observations");

    std::vector<bool> class_seen(ds.num_classes, false);
    for (int v = 0; v < V; ++v) {
        for (int c : ds.labels_for(v)) class_seen[c] = true;
    }
    for (int m = 0; m < ds.num_classes; ++m) {
        if (!class_seen[m]) {
            throw ValidationError("class " + std::to_string(m) + " has no training observation");
        }
    }

    EmbeddingModel model;
    model.train = ds;
    model.hp = hp;

    // Graph scales and the per-modality sigma reference share one robust
    // heuristic: the median nonzero same-class pairwise distance.
    std::vector<double> theta(V), sigma(V);
    std::vector<std::vector<double>> grids(V);
    for (int v = 0; v < V; ++v) {
        const bool overridden = v < static_cast<int>(hp.theta_override.size()) &&
                                hp.theta_override[v] > 0.0;
        const double ref = reference_scale(ds.modality_features[v], ds.labels_for(v));
        theta[v] = overridden ? hp.theta_override[v] : ref;
        sigma[v] = ref;
        grids[v] = hp.sigma_grid.values(ref);
    }
    model.theta = theta;

    const LaplacianSet lap = build_laplacians(ds, theta);

    std::vector<int> offsets(V, 0), sizes(V);
    for (int v = 0; v < V; ++v) {
        sizes[v] = ds.rows(v);
        if (v > 0) offsets[v] = offsets[v - 1] + sizes[v - 1];
    }

    auto stacked_psi_inv_sq = [&](const std::vector<double>& s) {
        Matrix out = Matrix::Zero(N, N);
        if (hp.mu2 == 0.0) return out; // weight zero: the term never enters A
        for (int v = 0; v < V; ++v) {
            auto [block, lambda] = kernel_inverse_squared(
                rbf_kernel_matrix(ds.modality_features[v], s[v]));
            out.block(offsets[v], offsets[v], sizes[v], sizes[v]) = block;
            (void)lambda;
        }
        return out;
    };

    // The sigma-free graph part of A. Recorded objective values are
    // base(Y) + sum_v g_v, with g_v from sigma_objective: one computation
    // route for everything that gets compared, so the trace is monotone in
    // exact floating point, not merely up to round-off.
    Matrix graph_part = lap.L_within - hp.mu1 * lap.L_between +
                        hp.mu4 * lap.L_cross_within - hp.mu5 * lap.L_cross_between;
    graph_part = ((graph_part + graph_part.transpose()) * 0.5).eval();

    auto recorded_objective = [&](double base, const std::vector<double>& g) {
        double sum = base;
        for (double gv : g) sum += gv;
        return sum;
    };

    Matrix psi_inv_sq = stacked_psi_inv_sq(sigma);
    Matrix Y;
    double cur_base = 0.0;
    std::vector<double> cur_g(V, 0.0);
    double cur_obj = std::numeric_limits<double>::infinity();
    bool warned_indefinite = false;
    double prev_obj = std::numeric_limits<double>::infinity();

    for (int iter = 1; iter <= hp.max_iters; ++iter) {
        const Matrix A = build_A(lap, psi_inv_sq, hp);
        EigenSolution sol = solve_embedding_full(A, d);
        if (sol.min_eigenvalue < -1e-10 * std::max(1.0, A.cwiseAbs().maxCoeff())) {
            model.indefinite_A = true;
            if (!warned_indefinite) {
                std::cerr << "note: A is indefinite (between-class weights dominate); "
                             "the objective can be negative but the iteration stays monotone\n";
                warned_indefinite = true;
            }
        }

        const double cand_base = (graph_part * sol.Y).cwiseProduct(sol.Y).sum();
        std::vector<double> cand_g(V);
        for (int v = 0; v < V; ++v) {
            cand_g[v] = sigma_objective(ds.modality_features[v],
                                        sol.Y.middleRows(offsets[v], sizes[v]), hp.mu2, hp.mu3,
                                        sigma[v]);
        }
        const double cand_obj = recorded_objective(cand_base, cand_g);
        // Monotone safeguard: the eigensolve is the exact minimizer, so the
        // incumbent can win only by round-off; keeping it preserves a
        // non-increasing trace at any conditioning.
        if (iter == 1 || cand_obj <= cur_obj) {
            Y = sol.Y;
            cur_base = cand_base;
            cur_g = cand_g;
            cur_obj = cand_obj;
        }

        TraceEntry entry;
        entry.iteration = iter;
        entry.objective_after_y = cur_obj;
        entry.ortho_error = (Y.transpose() * Y - Matrix::Identity(d, d)).norm();

        bool sigma_changed = false;
        if (hp.mu2 != 0.0 || hp.mu3 != 0.0) {
            for (int v = 0; v < V; ++v) {
                const Matrix Yv = Y.middleRows(offsets[v], sizes[v]);
                const SigmaChoice choice = optimize_sigma_impl(
                    ds.modality_features[v], Yv, hp.mu2, hp.mu3, grids[v], sigma[v], cur_g[v]);
                if (choice.sigma != sigma[v]) sigma_changed = true;
                sigma[v] = choice.sigma;
                cur_g[v] = choice.g;
            }
        }
        if (sigma_changed && hp.mu2 != 0.0) {
            psi_inv_sq = stacked_psi_inv_sq(sigma);
        }
        cur_obj = recorded_objective(cur_base, cur_g);
        entry.objective_after_sigma = cur_obj;
        entry.sigma = sigma;
        model.trace.push_back(entry);

        if (iter >= 2) {
            const double rel = (prev_obj - cur_obj) / std::max(1.0, std::abs(prev_obj));
            if (rel < hp.tol) break;
        } else if (!sigma_changed &&
                   entry.objective_after_y - cur_obj <=
                       hp.tol * std::max(1.0, std::abs(entry.objective_after_y))) {
            // sigma stayed put and added nothing, so A is already a fixed point
            break;
        }
        prev_obj = cur_obj;
    }

    model.Y_stacked = Y;
    for (int v = 0; v < V; ++v) {
        model.interpolators.push_back(fit_interpolator(
            ds.modality_features[v], Y.middleRows(offsets[v], sizes[v]), sigma[v]));
    }
    return model;
}

} // namespace mnse
