#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mnse/rng.hpp"
#include "mnse/types.hpp"

namespace mnse {

/// A labeled multi-modal dataset. Each modality holds a feature matrix whose
/// rows are observations; alignment across modalities is by global sample ID,
/// not by row position, so a sample may be missing from some modalities.
struct MultiModalDataset {
    int num_modalities = 0;
    int num_classes = 0;
    std::vector<Matrix> modality_features;              // per v: N_v x n_v
    std::vector<std::vector<SampleId>> modality_sample_ids; // per v: N_v ids
    std::map<SampleId, int> labels;                     // global id -> class

    int rows(int v) const { return static_cast<int>(modality_features[v].rows()); }
    int dim(int v) const { return static_cast<int>(modality_features[v].cols()); }
    int total_rows() const;

    int label_of(SampleId id) const;
    /// Per-row class labels of modality v.
    std::vector<int> labels_for(int v) const;
    /// Row index of sample `id` in modality v, if observed there.
    std::optional<int> row_of(int v, SampleId id) const;
    /// Number of samples of class m observed in *every* modality.
    int count_in_all_modalities(int class_m) const;

    /// Checks all type invariants; throws ValidationError. Also (re)builds the
    /// id -> row lookup tables, so call after any manual construction.
    void finalize();

private:
    std::vector<std::unordered_map<SampleId, int>> row_index_;
};

/// Configuration of the synthetic generator: isotropic Gaussian class blobs
/// (truncated at 4 standard deviations per component, so supports are bounded)
/// with modalities beyond the first produced by warping fresh independent
/// draws from the same class blob.
struct SynthConfig {
    enum class Warp { identity, affine, cubic };

    int num_classes = 3;
    int num_modalities = 2;
    int per_class = 20;
    std::vector<int> ambient_dims;  // n_v per modality; empty = all equal to dims0
    int dims0 = 2;                  // used when ambient_dims is empty
    double center_separation = 10.0;
    double class_noise = 1.0;
    Warp warp = Warp::identity;
    double cross_noise = 0.0;
    std::uint64_t seed = 0;

    int dim(int v) const { return ambient_dims.empty() ? dims0 : ambient_dims[v]; }
    void validate() const;

    static Warp parse_warp(const std::string& name);
    static std::string warp_name(Warp w);
};

/// Draws observations from the class/modality measures defined by a
/// SynthConfig. generate_synthetic() uses this internally; Monte Carlo
/// validation uses it directly to draw fresh test observations.
class SyntheticSampler {
public:
    explicit SyntheticSampler(const SynthConfig& cfg);

    /// A fresh observation of a class-m sample in modality v (0-based both).
    Vector draw(int class_m, int v, Rng& rng) const;

    const SynthConfig& config() const { return cfg_; }

private:
    SynthConfig cfg_;
    std::vector<Vector> centers_;   // per class, in modality-1 space
    std::vector<Matrix> warp_maps_; // per modality >= 1 when warp == affine

    Vector draw_base(int class_m, Rng& rng) const; // modality-1-style draw
};

MultiModalDataset load_dataset(const std::vector<std::string>& feature_paths,
                               const std::vector<std::string>& id_paths,
                               const std::string& label_path);

MultiModalDataset generate_synthetic(const SynthConfig& cfg);

/// Stratified train/test split on global sample IDs. Every class keeps at
/// least one sample on each side.
std::pair<MultiModalDataset, MultiModalDataset>
split(const MultiModalDataset& ds, double train_fraction, std::uint64_t seed);

} // namespace mnse
