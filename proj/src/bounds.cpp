#include "mnse/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mnse {

namespace {

// Rows of the stacked embedding for modality v, keyed by sample ID.
struct EmbeddingView {
    const EmbeddingModel& model;
    std::vector<int> offsets;

    explicit EmbeddingView(const EmbeddingModel& m) : model(m), offsets(m.offsets()) {}

    Vector row(int v, int i) const {
        return model.Y_stacked.row(offsets[v] + i).transpose();
    }
};

double median_of(std::vector<double> v, double fallback) {
    if (v.empty()) return fallback;
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

} // namespace

double estimate_alignment(const EmbeddingModel& model) {
    EmbeddingView view(model);
    const auto& ds = model.train;
    double eta = -1.0;
    for (const auto& [id, cls] : ds.labels) {
        for (int v = 0; v < ds.num_modalities; ++v) {
            auto rv = ds.row_of(v, id);
            if (!rv) continue;
            for (int u = v + 1; u < ds.num_modalities; ++u) {
                auto ru = ds.row_of(u, id);
                if (!ru) continue;
                eta = std::max(eta, (view.row(v, *rv) - view.row(u, *ru)).norm());
            }
        }
    }
    if (eta < 0.0) throw ValidationError("no sample observed in two or more modalities");
    return eta;
}

double estimate_compactness(const EmbeddingModel& model, double delta) {
    if (!(delta > 0.0)) throw ValidationError("delta must be > 0");
    EmbeddingView view(model);
    const auto& ds = model.train;
    double r = 0.0;
    for (int u = 0; u < ds.num_modalities; ++u) {
        const auto labels = ds.labels_for(u);
        const auto& X = ds.modality_features[u];
        for (int i = 0; i < ds.rows(u); ++i) {
            for (int j = i + 1; j < ds.rows(u); ++j) {
                if (labels[i] != labels[j]) continue;
                if ((X.row(i) - X.row(j)).norm() > 2.0 * delta) continue;
                r = std::max(r, (view.row(u, i) - view.row(u, j)).norm());
            }
        }
    }
    return r;
}

double estimate_separation(const EmbeddingModel& model) {
    EmbeddingView view(model);
    const auto& ds = model.train;
    if (ds.num_classes < 2) throw ValidationError("separation needs at least two classes");
    double gamma = std::numeric_limits<double>::infinity();
    for (int v = 0; v < ds.num_modalities; ++v) {
        const auto labels_v = ds.labels_for(v);
        for (int u = v; u < ds.num_modalities; ++u) {
            const auto labels_u = ds.labels_for(u);
            for (int i = 0; i < ds.rows(v); ++i) {
                const int j0 = (u == v) ? i + 1 : 0;
                for (int j = j0; j < ds.rows(u); ++j) {
                    if (labels_v[i] == labels_u[j]) continue;
                    gamma = std::min(gamma, (view.row(v, i) - view.row(u, j)).norm());
                }
            }
        }
    }
    return gamma;
}

double estimate_ball_measure(const MultiModalDataset& ds, int class_m, double delta) {
    if (class_m < 0 || class_m >= ds.num_classes) throw ValidationError("class index out of range");
    double eta = 1.0;
    bool found = false;
    for (int v = 0; v < ds.num_modalities; ++v) {
        const auto labels = ds.labels_for(v);
        std::vector<int> members;
        for (int i = 0; i < ds.rows(v); ++i) {
            if (labels[i] == class_m) members.push_back(i);
        }
        if (members.empty()) continue;
        found = true;
        const auto& X = ds.modality_features[v];
        for (int i : members) {
            if (members.size() == 1) {
                // no leave-one-out evidence; the conservative estimate is 0
                eta = 0.0;
                continue;
            }
            int covered = 0;
            for (int j : members) {
                if (j == i) continue;
                if ((X.row(i) - X.row(j)).norm() < delta) ++covered;
            }
            eta = std::min(eta, double(covered) / double(members.size() - 1));
        }
    }
    if (!found) throw ValidationError("class " + std::to_string(class_m) + " has no observation");
    return eta;
}

std::pair<bool, double> check_condition(double L, double delta, double eps, int d,
                                        double R_delta, double eta, double gamma) {
    if (L < 0 || delta < 0 || eps < 0 || R_delta < 0 || eta < 0 || gamma < 0 || d < 1) {
        throw ValidationError("condition arguments must be nonnegative with d >= 1");
    }
    const double slack = gamma - (6.0 * L * delta + 2.0 * std::sqrt(double(d)) * eps +
                                  2.0 * R_delta + 2.0 * eta);
    return {slack >= 0.0, slack};
}

namespace {

double failure_bracket(std::int64_t Nm, double eta_ball, int Q, int d, double eps,
                       double L, double delta) {
    if (Q < 1) throw ValidationError("Q must be >= 1");
    if (!(eta_ball >= 0.0 && eta_ball <= 1.0)) throw ValidationError("eta ball measure must be in [0,1]");
    if (double(Nm) * eta_ball <= double(Q)) {
        throw ValidationError("bound precondition violated: need N_m > Q / eta_{m,delta}");
    }
    const double diff = double(Nm) * eta_ball - double(Q);
    const double t1 = std::exp(-2.0 * diff * diff / double(Nm));
    // L*delta = 0 is taken by continuous extension: the deviation term vanishes.
    const double ld = L * delta;
    const double t2 = ld > 0.0 ? 2.0 * double(d) * std::exp(-double(Q) * eps * eps / (2.0 * ld * ld))
                               : 0.0;
    const double t3 = std::pow(1.0 - eta_ball, double(Q));
    return t1 + t2 + t3;
}

} // namespace

double classification_bound(std::int64_t Nm, double eta_ball, int Q, int d,
                            double eps, double L, double delta, int V) {
    if (V < 1) throw ValidationError("V must be >= 1");
    const double bracket = failure_bracket(Nm, eta_ball, Q, d, eps, L, delta);
    return std::max(0.0, 1.0 - std::pow(bracket, double(V)));
}

double lemma_probability(std::int64_t Nm, double eta_ball, int Q, int d,
                         double eps, double L, double delta) {
    return std::max(0.0, 1.0 - failure_bracket(Nm, eta_ball, Q, d, eps, L, delta));
}

std::pair<double, double> retrieval_guarantee(int K, int Q, std::int64_t Nm) {
    if (K < 1 || Q < 1) throw ValidationError("K and Q must be >= 1");
    if (Nm < K) throw ValidationError("retrieval depth K exceeds the class size N_m");
    if (K <= Q) return {1.0, double(K) / double(Nm)};
    return {double(Q) / double(K), double(Q) / double(Nm)};
}

AuditGrids AuditGrids::defaults(const EmbeddingModel& model) {
    const auto& ds = model.train;
    std::vector<double> input_dists;
    for (int v = 0; v < ds.num_modalities; ++v) {
        const auto& X = ds.modality_features[v];
        for (int i = 0; i < ds.rows(v); ++i) {
            for (int j = i + 1; j < ds.rows(v); ++j) {
                const double dist = (X.row(i) - X.row(j)).norm();
                if (dist > 0.0) input_dists.push_back(dist);
            }
        }
    }
    std::vector<double> embed_dists;
    const int n = static_cast<int>(model.Y_stacked.rows());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dist = (model.Y_stacked.row(i) - model.Y_stacked.row(j)).norm();
            if (dist > 0.0) embed_dists.push_back(dist);
        }
    }
    const double med_in = median_of(std::move(input_dists), 1.0);
    const double med_embed = median_of(std::move(embed_dists), 1.0);

    AuditGrids grids;
    for (int i = 0; i < 8; ++i) {
        grids.delta.push_back(med_in * std::pow(10.0, -2.0 + 2.0 * i / 7.0));
    }
    for (double m : {0.01, 0.1, 0.5, 1.0}) grids.eps.push_back(med_embed * m);
    grids.Q = {1, 2, 5, 10};
    return grids;
}

BoundReport audit(const EmbeddingModel& model, const AuditGrids& grids,
                  const BallMeasureFn& ball_measure) {
    const auto& ds = model.train;
    const int M = ds.num_classes;
    const int V = ds.num_modalities;

    BoundReport report;
    report.ball_estimator = ball_measure ? "pool" : "plug-in";

    GeometryParams base;
    base.d = model.dim();
    base.V = V;
    base.eta = estimate_alignment(model);
    base.gamma = estimate_separation(model);
    for (const auto& interp : model.interpolators) {
        base.L_per_modality.push_back(interp.lipschitz());
    }
    base.L = *std::max_element(base.L_per_modality.begin(), base.L_per_modality.end());
    for (int m = 0; m < M; ++m) base.N_per_class.push_back(ds.count_in_all_modalities(m));

    auto measure = [&](int m, double delta) {
        return ball_measure ? ball_measure(m, delta) : estimate_ball_measure(ds, m, delta);
    };

    double best_floor = -1.0;
    double best_slack = -std::numeric_limits<double>::infinity();
    bool any = false;

    for (double delta : grids.delta) {
        GeometryParams p = base;
        p.delta = delta;
        p.R_delta = estimate_compactness(model, delta);
        p.eta_ball.clear();
        for (int m = 0; m < M; ++m) p.eta_ball.push_back(measure(m, delta));
        for (double eps : grids.eps) {
            p.eps = eps;
            for (int Q : grids.Q) {
                p.Q = Q;
                ++report.grid_points_checked;
                auto [holds, slack] =
                    check_condition(p.L, delta, eps, p.d, p.R_delta, p.eta, p.gamma);
                if (holds) ++report.grid_points_condition_holds;

                double floor = 0.0;
                double lemma_floor = 0.0;
                if (holds) {
                    // the theorem-1 guarantee for an arbitrary test class is
                    // the worst case over classes
                    floor = 1.0;
                    lemma_floor = 1.0;
                    for (int m = 0; m < M; ++m) {
                        if (double(p.N_per_class[m]) * p.eta_ball[m] <= double(Q)) {
                            floor = 0.0;
                            lemma_floor = 0.0;
                            break;
                        }
                        floor = std::min(floor, classification_bound(p.N_per_class[m], p.eta_ball[m],
                                                                     Q, p.d, eps, p.L, delta, V));
                        lemma_floor = std::min(lemma_floor,
                                               lemma_probability(p.N_per_class[m], p.eta_ball[m], Q,
                                                                 p.d, eps, p.L, delta));
                    }
                }

                const bool better = !any || floor > best_floor ||
                                    (floor == best_floor && best_floor == 0.0 && slack > best_slack);
                if (better) {
                    any = true;
                    best_floor = floor;
                    best_slack = slack;
                    report.params = p;
                    report.condition_holds = holds;
                    report.slack = slack;
                    report.theorem1_floor = floor;
                    report.lemma_floor = lemma_floor;
                }
            }
        }
    }
    report.vacuous = report.theorem1_floor <= 0.0;

    // Theorem-2 floors at the selected Q, at depth K = Q (clamped to the
    // smallest class size) unless a caller overrides K downstream.
    const int min_class = *std::min_element(report.params.N_per_class.begin(),
                                            report.params.N_per_class.end());
    if (min_class >= 1) {
        report.K = std::min(report.params.Q, min_class);
        auto [p_floor, r_floor] = retrieval_guarantee(report.K, report.params.Q, min_class);
        if (report.condition_holds && !report.vacuous) {
            report.precision_floor = p_floor;
            report.recall_floor = r_floor;
        }
    }
    return report;
}

BoundReport monte_carlo_validate(const SynthConfig& cfg, const HyperParams& hp,
                                 const ValidateOptions& opts) {
    if (opts.trials < 100) throw ValidationError("Monte Carlo validation needs >= 100 trials");
    cfg.validate();

    const MultiModalDataset ds = generate_synthetic(cfg);
    const EmbeddingModel model = train(ds, hp);
    const SyntheticSampler sampler(cfg);

    BallMeasureFn measure;
    std::vector<MultiModalDataset> pools; // one pool dataset reused for all classes
    if (opts.pool_ball_measure) {
        // Large independent pool: the ball-measure estimate approaches the
        // infimum over the support far better than the training sample alone.
        Rng pool_rng(mix_seed(opts.seed, 0xb001));
        const std::int64_t per_class = std::max<std::int64_t>(100, opts.pool_size / cfg.num_classes);
        MultiModalDataset pool;
        pool.num_modalities = cfg.num_modalities;
        pool.num_classes = cfg.num_classes;
        pool.modality_features.resize(cfg.num_modalities);
        pool.modality_sample_ids.resize(cfg.num_modalities);
        for (int v = 0; v < cfg.num_modalities; ++v) {
            Matrix X(per_class * cfg.num_classes, cfg.dim(v));
            std::vector<SampleId> ids(per_class * cfg.num_classes);
            int row = 0;
            for (int m = 0; m < cfg.num_classes; ++m) {
                for (std::int64_t i = 0; i < per_class; ++i, ++row) {
                    X.row(row) = sampler.draw(m, v, pool_rng).transpose();
                    ids[row] = row;
                    pool.labels[row] = m;
                }
            }
            pool.modality_features[v] = std::move(X);
            pool.modality_sample_ids[v] = std::move(ids);
        }
        pool.finalize();
        pools.push_back(std::move(pool));
        const MultiModalDataset* pool_ptr = &pools.back();
        measure = [pool_ptr](int m, double delta) {
            return estimate_ball_measure(*pool_ptr, m, delta);
        };
    }

    BoundReport report = audit(model, AuditGrids::defaults(model), measure);
    report.trials = opts.trials;

    // Fresh test draws, one per (trial, class, modality), classified with the
    // all-modality nearest-neighbor rule.
    Rng rng(mix_seed(opts.seed, 0x7e57));
    std::int64_t correct = 0, total = 0;
    for (std::int64_t t = 0; t < opts.trials; ++t) {
        for (int m = 0; m < cfg.num_classes; ++m) {
            for (int v = 0; v < cfg.num_modalities; ++v) {
                const Vector x = sampler.draw(m, v, rng);
                if (classify(model, x, v, ClassifyMode::all_modalities) == m) ++correct;
                ++total;
            }
        }
    }
    report.empirical_classification = double(correct) / double(total);

    // Retrieval at depth K (distance ranking, the setting the guarantee is
    // stated for), between the first two modalities when present.
    const int min_class = *std::min_element(report.params.N_per_class.begin(),
                                            report.params.N_per_class.end());
    int K = opts.K > 0 ? opts.K : std::max(1, report.K);
    K = std::min(K, min_class);
    if (cfg.num_modalities >= 2 && K >= 1) {
        report.K = K;
        auto [p_floor, r_floor] = retrieval_guarantee(K, report.params.Q, min_class);
        if (report.condition_holds && !report.vacuous) {
            report.precision_floor = p_floor;
            report.recall_floor = r_floor;
        }
        double p_sum = 0.0, r_sum = 0.0;
        std::int64_t n_q = 0;
        const std::int64_t retrieval_trials = std::min<std::int64_t>(opts.trials, 200);
        for (std::int64_t t = 0; t < retrieval_trials; ++t) {
            for (int m = 0; m < cfg.num_classes; ++m) {
                const Vector x = sampler.draw(m, 0, rng);
                auto result = retrieve(model, x, 0, 1, K, Metric::euclidean);
                int tp = 0;
                for (SampleId id : result.ids()) tp += model.train.label_of(id) == m ? 1 : 0;
                const int relevant_total = [&] {
                    int c = 0;
                    for (int lbl : model.train.labels_for(1)) c += lbl == m ? 1 : 0;
                    return c;
                }();
                p_sum += double(tp) / double(K);
                r_sum += relevant_total > 0 ? double(tp) / double(relevant_total) : 0.0;
                ++n_q;
            }
        }
        if (n_q > 0) {
            report.empirical_precision = p_sum / double(n_q);
            report.empirical_recall = r_sum / double(n_q);
        }
    }

    // Statistical check of the nonvacuous floors.
    report.empirical_respects_floor = true;
    if (!report.vacuous) {
        const double f = report.theorem1_floor;
        report.classification_slack_3sigma = 3.0 * std::sqrt(f * (1.0 - f) / double(opts.trials));
        if (report.empirical_classification < f - report.classification_slack_3sigma) {
            report.empirical_respects_floor = false;
        }
        if (report.empirical_precision >= 0.0 && report.precision_floor > 0.0) {
            const double pf = report.precision_floor;
            const double pslack = 3.0 * std::sqrt(pf * (1.0 - pf) / double(opts.trials));
            if (report.empirical_precision < pf - pslack) {
                report.empirical_respects_floor = false;
            }
        }
    }
    return report;
}

} // namespace mnse
