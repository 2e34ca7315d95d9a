#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mnse/dataset.hpp"
#include "mnse/eval.hpp"
#include "mnse/optimizer.hpp"
#include "mnse/types.hpp"

namespace mnse {

/// The geometric quantities the generalization analysis is stated in terms of.
struct GeometryParams {
    double eta = 0.0;      // cross-modal alignment: max same-sample embedding distance
    double R_delta = 0.0;  // within-class compactness at input radius 2*delta
    double gamma = 0.0;    // between-class embedding margin
    double delta = 0.0;    // input-space ball radius
    double eps = 0.0;      // deviation parameter
    int Q = 1;             // neighbor count
    int d = 1;             // embedding dimension
    int V = 1;             // number of modalities
    double L = 0.0;        // max over modalities of the interpolator Lipschitz constants
    std::vector<double> L_per_modality;
    std::vector<double> eta_ball;  // per class: ball-measure lower-bound estimate
    std::vector<int> N_per_class;  // per class: samples observed in all modalities
};

struct BoundReport {
    GeometryParams params;      // at the best grid point
    bool condition_holds = false;
    double slack = 0.0;         // gamma - (6 L delta + 2 sqrt(d) eps + 2 R_delta + 2 eta)
    double theorem1_floor = 0.0;
    double lemma_floor = 0.0;
    int K = 0;                  // retrieval depth the floors below refer to
    double precision_floor = 0.0;
    double recall_floor = 0.0;
    bool vacuous = true;        // no grid point gave a positive theorem-1 floor
    std::string ball_estimator = "plug-in"; // "plug-in" (leave-one-out) or "pool"
    int grid_points_checked = 0;
    int grid_points_condition_holds = 0;

    // Monte Carlo section (filled by monte_carlo_validate)
    std::int64_t trials = 0;
    double empirical_classification = -1.0;
    double empirical_precision = -1.0;
    double empirical_recall = -1.0;
    double classification_slack_3sigma = 0.0;
    bool empirical_respects_floor = true;
};

/// eta: max over samples observed in >= 2 modalities, over modality pairs,
/// of the embedding distance between the two observations.
double estimate_alignment(const EmbeddingModel& model);

/// R_delta: max embedding distance over same-modality same-class pairs whose
/// input distance is <= 2*delta; 0 when no pair qualifies.
double estimate_compactness(const EmbeddingModel& model, double delta);

/// gamma: min embedding distance over cross-class pairs, all modality pairs.
double estimate_separation(const EmbeddingModel& model);

/// Plug-in estimate of the class-m ball-measure lower bound: min over
/// modalities and class-m centers of the leave-one-out fraction of class-m
/// samples strictly within distance delta.
double estimate_ball_measure(const MultiModalDataset& ds, int class_m, double delta);

/// slack = gamma - (6 L delta + 2 sqrt(d) eps + 2 R_delta + 2 eta);
/// the condition holds iff slack >= 0.
std::pair<bool, double> check_condition(double L, double delta, double eps, int d,
                                        double R_delta, double eta, double gamma);

/// 1 - [exp(-2 (Nm*eta - Q)^2 / Nm) + 2 d exp(-Q eps^2 / (2 L^2 delta^2))
///      + (1 - eta)^Q]^V, truncated below at 0. The L*delta = 0 case takes
/// the continuous extension (middle term -> 0).
double classification_bound(std::int64_t Nm, double eta_ball, int Q, int d,
                            double eps, double L, double delta, int V);

/// The V = 1 failure bracket of classification_bound, as 1 - sum, truncated.
double lemma_probability(std::int64_t Nm, double eta_ball, int Q, int d,
                         double eps, double L, double delta);

/// Theorem-2 floors: K <= Q gives (P = 1, R = K/Nm); K > Q gives
/// (P >= Q/K, R >= Q/Nm).
std::pair<double, double> retrieval_guarantee(int K, int Q, std::int64_t Nm);

struct AuditGrids {
    std::vector<double> delta;
    std::vector<double> eps;
    std::vector<int> Q;

    /// delta: 8 log points over [1e-2, 1] x median input distance;
    /// eps: {0.01, 0.1, 0.5, 1} x median embedding distance; Q: {1, 2, 5, 10}.
    static AuditGrids defaults(const EmbeddingModel& model);
};

using BallMeasureFn = std::function<double(int class_m, double delta)>;

/// Sweeps the (delta, eps, Q) grids, evaluates the condition and the
/// theorem-1 floor (min over classes) where its preconditions hold, and
/// returns the report at the grid point with the largest floor. When no
/// point yields a positive floor the report is flagged vacuous and carries
/// the point with the largest condition slack.
BoundReport audit(const EmbeddingModel& model, const AuditGrids& grids,
                  const BallMeasureFn& ball_measure = {});

struct ValidateOptions {
    std::int64_t trials = 1000;
    int K = 0;                    // retrieval depth; 0 = the audit's best Q
    std::uint64_t seed = 1;       // seed for the fresh test draws
    bool pool_ball_measure = true; // estimate ball measure from a large fresh pool
    std::int64_t pool_size = 100000;
};

/// Trains on the synthetic config, audits the bounds, then measures empirical
/// classification and retrieval rates on fresh draws and checks them against
/// the floors (within 3-sigma statistical slack).
BoundReport monte_carlo_validate(const SynthConfig& cfg, const HyperParams& hp,
                                 const ValidateOptions& opts);

} // namespace mnse
