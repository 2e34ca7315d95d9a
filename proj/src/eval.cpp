#include "mnse/eval.hpp"

#include <algorithm>
#include <cmath>

namespace mnse {

ClassifyMode parse_classify_mode(const std::string& name) {
    if (name == "all") return ClassifyMode::all_modalities;
    if (name == "own") return ClassifyMode::own_modality;
    throw ValidationError("unknown classification mode '" + name + "' (all|own)");
}

Metric parse_metric(const std::string& name) {
    if (name == "euclidean") return Metric::euclidean;
    if (name == "cosine") return Metric::cosine;
    throw ValidationError("unknown metric '" + name + "' (euclidean|cosine)");
}

namespace {

void require_trained(const EmbeddingModel& model) {
    if (model.Y_stacked.rows() == 0 || model.interpolators.empty()) {
        throw ValidationError("model has not been trained");
    }
}

} // namespace

int classify(const EmbeddingModel& model, const Vector& x, int v, ClassifyMode mode) {
    require_trained(model);
    if (v < 0 || v >= model.num_modalities()) throw ValidationError("modality index out of range");

    const Vector q = model.interpolators[v].evaluate(x);
    const auto offsets = model.offsets();

    double best_dist = std::numeric_limits<double>::infinity();
    SampleId best_id = -1;
    int best_label = -1, best_modality = -1;
    for (int u = 0; u < model.num_modalities(); ++u) {
        if (mode == ClassifyMode::own_modality && u != v) continue;
        const auto& ids = model.train.modality_sample_ids[u];
        for (int i = 0; i < model.train.rows(u); ++i) {
            const double dist =
                (model.Y_stacked.row(offsets[u] + i).transpose() - q).norm();
            const SampleId id = ids[i];
            const bool better = dist < best_dist ||
                                (dist == best_dist &&
                                 (id < best_id || (id == best_id && u < best_modality)));
            if (better) {
                best_dist = dist;
                best_id = id;
                best_modality = u;
                best_label = model.train.label_of(id);
            }
        }
    }
    return best_label;
}

std::vector<SampleId> RetrievalResult::ids() const {
    std::vector<SampleId> out;
    out.reserve(ranked.size());
    for (const auto& [id, score] : ranked) out.push_back(id);
    return out;
}

RetrievalResult retrieve(const EmbeddingModel& model, const Vector& x, int v, int u,
                         int K, Metric metric, SampleId query_id) {
    require_trained(model);
    if (v < 0 || v >= model.num_modalities() || u < 0 || u >= model.num_modalities()) {
        throw ValidationError("modality index out of range");
    }
    const int n_u = model.train.rows(u);
    if (K < 1 || K > n_u) {
        throw ValidationError("retrieval depth K=" + std::to_string(K) +
                              " out of range [1, " + std::to_string(n_u) + "]");
    }

    const Vector q = model.interpolators[v].evaluate(x);
    if (metric == Metric::cosine && q.norm() == 0.0) {
        throw ValidationError("undefined cosine similarity: query embedding is the zero vector");
    }

    const auto offsets = model.offsets();
    std::vector<std::pair<SampleId, double>> scored(n_u);
    for (int i = 0; i < n_u; ++i) {
        const Vector y = model.Y_stacked.row(offsets[u] + i).transpose();
        double score;
        if (metric == Metric::euclidean) {
            score = (y - q).norm();
        } else {
            const double norm = y.norm();
            if (norm == 0.0) {
                throw ValidationError("undefined cosine similarity: zero training embedding");
            }
            score = q.dot(y) / (q.norm() * norm);
        }
        scored[i] = {model.train.modality_sample_ids[u][i], score};
    }
    const bool ascending = metric == Metric::euclidean;
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return ascending ? a.second < b.second : a.second > b.second;
        return a.first < b.first;
    });
    scored.resize(K);

    RetrievalResult result;
    result.query_id = query_id;
    result.query_modality = v;
    result.target_modality = u;
    result.metric = metric;
    result.ranked = std::move(scored);
    return result;
}

std::pair<double, double> precision_recall(const std::vector<SampleId>& retrieved,
                                           const std::set<SampleId>& relevant,
                                           int total_relevant) {
    if (retrieved.empty()) throw ValidationError("retrieved set must be non-empty");
    int tp = 0;
    for (SampleId id : retrieved) tp += relevant.count(id) > 0 ? 1 : 0;
    if (total_relevant < tp) {
        throw ValidationError("total relevant count below the retrieved relevant count");
    }
    const int fp = static_cast<int>(retrieved.size()) - tp;
    const int fn = total_relevant - tp;
    const double p = double(tp) / double(tp + fp);
    const double r = (tp + fn) == 0 ? 0.0 : double(tp) / double(tp + fn);
    return {p, r};
}

double average_precision(const std::vector<int>& relevance_flags, int total_relevant) {
    if (total_relevant < 1) throw ValidationError("average precision needs >= 1 relevant sample");
    double sum = 0.0;
    int hits = 0;
    for (std::size_t k = 0; k < relevance_flags.size(); ++k) {
        if (relevance_flags[k]) {
            ++hits;
            sum += double(hits) / double(k + 1);
        }
    }
    return sum / double(total_relevant);
}

double mean_average_precision(const EmbeddingModel& model, const MultiModalDataset& queries,
                              int v, int u, Metric metric) {
    require_trained(model);
    const int n_u = model.train.rows(u);
    const auto target_labels = model.train.labels_for(u);

    std::vector<int> class_counts(model.train.num_classes, 0);
    for (int c : target_labels) ++class_counts[c];

    double total_ap = 0.0;
    int n_queries = 0;
    for (int i = 0; i < queries.rows(v); ++i) {
        const int cls = queries.label_of(queries.modality_sample_ids[v][i]);
        if (cls >= model.train.num_classes || class_counts[cls] == 0) {
            throw ValidationError("query class " + std::to_string(cls) +
                                  " absent from target modality " + std::to_string(u + 1));
        }
        auto result = retrieve(model, queries.modality_features[v].row(i).transpose(), v, u,
                               n_u, metric, queries.modality_sample_ids[v][i]);
        std::vector<int> flags;
        flags.reserve(n_u);
        for (const auto& [id, score] : result.ranked) {
            flags.push_back(model.train.label_of(id) == cls ? 1 : 0);
        }
        total_ap += average_precision(flags, class_counts[cls]);
        ++n_queries;
    }
    if (n_queries == 0) throw ValidationError("no queries in modality " + std::to_string(v + 1));
    return total_ap / n_queries;
}

double misclassification_rate(const EmbeddingModel& model, const MultiModalDataset& test,
                              int v, ClassifyMode mode) {
    require_trained(model);
    const int n = test.rows(v);
    if (n == 0) throw ValidationError("no test observations in modality " + std::to_string(v + 1));
    int wrong = 0;
    for (int i = 0; i < n; ++i) {
        const int predicted =
            classify(model, test.modality_features[v].row(i).transpose(), v, mode);
        if (predicted != test.label_of(test.modality_sample_ids[v][i])) ++wrong;
    }
    return 100.0 * double(wrong) / double(n);
}

} // namespace mnse
