#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mnse/optimizer.hpp"
#include "mnse/types.hpp"

namespace mnse {

enum class ClassifyMode { all_modalities, own_modality };
enum class Metric { euclidean, cosine };

ClassifyMode parse_classify_mode(const std::string& name);
Metric parse_metric(const std::string& name);

/// Embeds x (an observation in modality v) and returns the label of the
/// nearest training embedding: over all modalities' embeddings, or over
/// modality v only. Ties break by ascending sample ID, then modality.
int classify(const EmbeddingModel& model, const Vector& x, int v, ClassifyMode mode);

struct RetrievalResult {
    SampleId query_id = -1;
    int query_modality = 0;
    int target_modality = 0;
    Metric metric = Metric::euclidean;
    /// Ranked (training sample ID, score): ascending distance for euclidean,
    /// descending similarity for cosine. Ties break by ascending sample ID.
    std::vector<std::pair<SampleId, double>> ranked;

    std::vector<SampleId> ids() const;
};

/// Ranks the modality-u training embeddings against f^(v)(x) and returns the
/// top K.
RetrievalResult retrieve(const EmbeddingModel& model, const Vector& x, int v, int u,
                         int K, Metric metric, SampleId query_id = -1);

/// Set-based precision/recall: P = TP/(TP+FP), R = TP/(TP+FN).
std::pair<double, double> precision_recall(const std::vector<SampleId>& retrieved,
                                           const std::set<SampleId>& relevant,
                                           int total_relevant);

/// AP over a ranked relevance-flag list: mean of P@k at the relevant ranks,
/// normalized by the total relevant count.
double average_precision(const std::vector<int>& relevance_flags, int total_relevant);

/// Mean AP over all queries observed in modality v of the test set, ranking
/// the full modality-u training set (depth N_u).
double mean_average_precision(const EmbeddingModel& model, const MultiModalDataset& queries,
                              int v, int u, Metric metric);

/// Percent of modality-v test observations misclassified, in [0, 100].
double misclassification_rate(const EmbeddingModel& model, const MultiModalDataset& test,
                              int v, ClassifyMode mode);

} // namespace mnse
