#include "mnse/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mnse {

namespace {

std::string loc(const std::string& file, int line) {
    return file + ":" + std::to_string(line);
}

double parse_real(const std::string& token, const std::string& file, int line) {
    const char* begin = token.data();
    const char* end = begin + token.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
    double value = 0.0;
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw ValidationError("parse failure: bad real '" + token + "' at " + loc(file, line));
    }
    if (!std::isfinite(value)) {
        throw ValidationError("non-finite feature value '" + token + "' at " + loc(file, line));
    }
    return value;
}

std::vector<std::vector<double>> read_csv_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string token;
        while (std::getline(ss, token, ',')) {
            row.push_back(parse_real(token, path, lineno));
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ValidationError("inconsistent column count at " + loc(path, lineno));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SampleId> read_id_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::vector<SampleId> ids;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        SampleId id = 0;
        auto res = std::from_chars(line.data(), line.data() + line.size(), id);
        if (res.ec != std::errc{} || res.ptr != line.data() + line.size() || id < 0) {
            throw ValidationError("parse failure: bad sample ID '" + line + "' at " + loc(path, lineno));
        }
        ids.push_back(id);
    }
    return ids;
}

std::map<SampleId, int> read_label_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::map<SampleId, int> labels;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ValidationError("parse failure: expected '<id>,<class>' at " + loc(path, lineno));
        }
        SampleId id = 0;
        int cls = 0;
        auto r1 = std::from_chars(line.data(), line.data() + comma, id);
        auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), cls);
        if (r1.ec != std::errc{} || r2.ec != std::errc{} ||
            r2.ptr != line.data() + line.size() || id < 0 || cls < 0) {
            throw ValidationError("parse failure: bad label line at " + loc(path, lineno));
        }
        if (labels.count(id)) {
            throw ValidationError("duplicate label for sample ID " + std::to_string(id) +
                                  " at " + loc(path, lineno));
        }
        labels[id] = cls;
    }
    return labels;
}

} // namespace

int MultiModalDataset::total_rows() const {
    int n = 0;
    for (int v = 0; v < num_modalities; ++v) n += rows(v);
    return n;
}

int MultiModalDataset::label_of(SampleId id) const {
    auto it = labels.find(id);
    if (it == labels.end()) {
        throw ValidationError("missing label for sample ID " + std::to_string(id));
    }
    return it->second;
}

std::vector<int> MultiModalDataset::labels_for(int v) const {
    std::vector<int> out;
    out.reserve(modality_sample_ids[v].size());
    for (SampleId id : modality_sample_ids[v]) out.push_back(label_of(id));
    return out;
}

std::optional<int> MultiModalDataset::row_of(int v, SampleId id) const {
    const auto& index = row_index_[v];
    auto it = index.find(id);
    if (it == index.end()) return std::nullopt;
    return it->second;
}

int MultiModalDataset::count_in_all_modalities(int class_m) const {
    int count = 0;
    for (const auto& [id, cls] : labels) {
        if (cls != class_m) continue;
        bool everywhere = true;
        for (int v = 0; v < num_modalities && everywhere; ++v) {
            everywhere = row_index_[v].count(id) > 0;
        }
        if (everywhere) ++count;
    }
    return count;
}

void MultiModalDataset::finalize() {
    if (num_modalities < 1) throw ValidationError("dataset needs at least one modality");
    if (num_classes < 1) throw ValidationError("dataset needs at least one class");
    if (static_cast<int>(modality_features.size()) != num_modalities ||
        static_cast<int>(modality_sample_ids.size()) != num_modalities) {
        throw ValidationError("modality count mismatch between features and IDs");
    }
    row_index_.assign(num_modalities, {});
    for (int v = 0; v < num_modalities; ++v) {
        const auto& ids = modality_sample_ids[v];
        if (static_cast<int>(ids.size()) != rows(v)) {
            throw ValidationError("row-count mismatch in modality " + std::to_string(v + 1) +
                                  ": " + std::to_string(rows(v)) + " feature rows vs " +
                                  std::to_string(ids.size()) + " IDs");
        }
        if (!modality_features[v].allFinite()) {
            throw ValidationError("non-finite feature entry in modality " + std::to_string(v + 1));
        }
        auto& index = row_index_[v];
        for (int i = 0; i < static_cast<int>(ids.size()); ++i) {
            if (!index.emplace(ids[i], i).second) {
                throw ValidationError("duplicate sample ID " + std::to_string(ids[i]) +
                                      " in modality " + std::to_string(v + 1));
            }
            auto lab = labels.find(ids[i]);
            if (lab == labels.end()) {
                throw ValidationError("missing label for sample ID " + std::to_string(ids[i]) +
                                      " (modality " + std::to_string(v + 1) + ", row " +
                                      std::to_string(i + 1) + ")");
            }
            if (lab->second < 0 || lab->second >= num_classes) {
                throw ValidationError("class index " + std::to_string(lab->second) +
                                      " out of range for sample ID " + std::to_string(ids[i]));
            }
        }
    }
}

void SynthConfig::validate() const {
    if (num_classes < 1) throw ValidationError("num_classes must be >= 1");
    if (num_modalities < 1) throw ValidationError("num_modalities must be >= 1");
    if (per_class < 1) throw ValidationError("per_class must be >= 1");
    if (center_separation < 0 || class_noise < 0 || cross_noise < 0) {
        throw ValidationError("scales must be >= 0");
    }
    if (!ambient_dims.empty() && static_cast<int>(ambient_dims.size()) != num_modalities) {
        throw ValidationError("ambient_dims must have one entry per modality");
    }
    for (int v = 0; v < num_modalities; ++v) {
        if (dim(v) < 1) throw ValidationError("ambient dimension must be >= 1");
        if (warp != Warp::affine && dim(v) != dim(0)) {
            throw ValidationError("identity/cubic warps need equal ambient dimensions");
        }
    }
}

SynthConfig::Warp SynthConfig::parse_warp(const std::string& name) {
    if (name == "identity") return Warp::identity;
    if (name == "affine") return Warp::affine;
    if (name == "cubic") return Warp::cubic;
    throw ValidationError("unknown warp '" + name + "' (identity|affine|cubic)");
}

std::string SynthConfig::warp_name(Warp w) {
    switch (w) {
        case Warp::identity: return "identity";
        case Warp::affine: return "affine";
        case Warp::cubic: return "cubic";
    }
    return "identity";
}

SyntheticSampler::SyntheticSampler(const SynthConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int n0 = cfg_.dim(0);
    // Class centers on a scaled axis lattice: pairwise distances are always
    // >= center_separation.
    centers_.resize(cfg_.num_classes);
    for (int m = 0; m < cfg_.num_classes; ++m) {
        Vector c = Vector::Zero(n0);
        c[m % n0] = cfg_.center_separation * (1.0 + m / n0);
        centers_[m] = c;
    }
    if (cfg_.warp == SynthConfig::Warp::affine) {
        Rng rng(mix_seed(cfg_.seed, 0xafffe));
        warp_maps_.resize(cfg_.num_modalities);
        for (int v = 1; v < cfg_.num_modalities; ++v) {
            Matrix A(cfg_.dim(v), n0);
            for (int i = 0; i < A.rows(); ++i)
                for (int j = 0; j < A.cols(); ++j) A(i, j) = rng.normal() / std::sqrt(double(n0));
            warp_maps_[v] = A;
        }
    }
}

Vector SyntheticSampler::draw_base(int class_m, Rng& rng) const {
    const int n0 = cfg_.dim(0);
    Vector x = centers_[class_m];
    for (int j = 0; j < n0; ++j) x[j] += cfg_.class_noise * rng.truncated_normal(4.0);
    return x;
}

Vector SyntheticSampler::draw(int class_m, int v, Rng& rng) const {
    if (class_m < 0 || class_m >= cfg_.num_classes) throw ValidationError("class index out of range");
    if (v < 0 || v >= cfg_.num_modalities) throw ValidationError("modality index out of range");
    Vector base = draw_base(class_m, rng);
    if (v == 0) return base;
    Vector warped;
    switch (cfg_.warp) {
        case SynthConfig::Warp::identity: warped = base; break;
        case SynthConfig::Warp::affine: warped = warp_maps_[v] * base; break;
        case SynthConfig::Warp::cubic: warped = base.array().cube(); break;
    }
    for (int j = 0; j < warped.size(); ++j) warped[j] += cfg_.cross_noise * rng.truncated_normal(4.0);
    return warped;
}

MultiModalDataset generate_synthetic(const SynthConfig& cfg) {
    SyntheticSampler sampler(cfg);
    Rng rng(mix_seed(cfg.seed, 0));

    MultiModalDataset ds;
    ds.num_modalities = cfg.num_modalities;
    ds.num_classes = cfg.num_classes;
    const int total = cfg.num_classes * cfg.per_class;
    ds.modality_features.resize(cfg.num_modalities);
    ds.modality_sample_ids.resize(cfg.num_modalities);
    for (int v = 0; v < cfg.num_modalities; ++v) {
        ds.modality_features[v] = Matrix(total, cfg.dim(v));
        ds.modality_sample_ids[v].resize(total);
    }
    int row = 0;
    for (int m = 0; m < cfg.num_classes; ++m) {
        for (int i = 0; i < cfg.per_class; ++i, ++row) {
            const SampleId id = row;
            ds.labels[id] = m;
            for (int v = 0; v < cfg.num_modalities; ++v) {
                ds.modality_features[v].row(row) = sampler.draw(m, v, rng).transpose();
                ds.modality_sample_ids[v][row] = id;
            }
        }
    }
    ds.finalize();
    return ds;
}

MultiModalDataset load_dataset(const std::vector<std::string>& feature_paths,
                               const std::vector<std::string>& id_paths,
                               const std::string& label_path) {
    if (feature_paths.empty() || feature_paths.size() != id_paths.size()) {
        throw ValidationError("need one feature file and one ID file per modality");
    }
    MultiModalDataset ds;
    ds.num_modalities = static_cast<int>(feature_paths.size());
    ds.labels = read_label_file(label_path);
    int max_class = -1;
    for (const auto& [id, cls] : ds.labels) max_class = std::max(max_class, cls);
    ds.num_classes = max_class + 1;
    if (ds.num_classes < 1) throw ValidationError("label file is empty: " + label_path);

    for (int v = 0; v < ds.num_modalities; ++v) {
        auto rows = read_csv_rows(feature_paths[v]);
        auto ids = read_id_file(id_paths[v]);
        if (rows.size() != ids.size()) {
            throw ValidationError("row-count mismatch: " + feature_paths[v] + " has " +
                                  std::to_string(rows.size()) + " rows but " + id_paths[v] +
                                  " has " + std::to_string(ids.size()) + " IDs");
        }
        if (rows.empty()) throw ValidationError("empty feature file: " + feature_paths[v]);
        Matrix X(rows.size(), rows.front().size());
        for (int i = 0; i < X.rows(); ++i) {
            for (int j = 0; j < X.cols(); ++j) X(i, j) = rows[i][j];
        }
        ds.modality_features.push_back(std::move(X));
        ds.modality_sample_ids.push_back(std::move(ids));
    }
    ds.finalize();
    return ds;
}

std::pair<MultiModalDataset, MultiModalDataset>
split(const MultiModalDataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("train_fraction must lie in the open interval (0, 1)");
    }
    // Group global IDs by class, in sorted order for determinism.
    std::vector<std::vector<SampleId>> by_class(ds.num_classes);
    for (const auto& [id, cls] : ds.labels) by_class[cls].push_back(id);

    std::set<SampleId> train_ids;
    for (int m = 0; m < ds.num_classes; ++m) {
        auto& ids = by_class[m];
        if (ids.size() < 2) {
            throw ValidationError("class " + std::to_string(m) +
                                  " has fewer than 2 samples; cannot split");
        }
        Rng rng(mix_seed(seed, 0x5011d + m));
        rng.shuffle(ids);
        auto n_train = static_cast<std::size_t>(std::llround(train_fraction * double(ids.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
        train_ids.insert(ids.begin(), ids.begin() + n_train);
    }

    auto subset = [&](bool in_train) {
        MultiModalDataset out;
        out.num_modalities = ds.num_modalities;
        out.num_classes = ds.num_classes;
        out.modality_features.resize(ds.num_modalities);
        out.modality_sample_ids.resize(ds.num_modalities);
        for (int v = 0; v < ds.num_modalities; ++v) {
            std::vector<int> keep;
            for (int i = 0; i < ds.rows(v); ++i) {
                const bool member = train_ids.count(ds.modality_sample_ids[v][i]) > 0;
                if (member == in_train) keep.push_back(i);
            }
            Matrix X(keep.size(), ds.dim(v));
            std::vector<SampleId> ids(keep.size());
            for (std::size_t k = 0; k < keep.size(); ++k) {
                X.row(k) = ds.modality_features[v].row(keep[k]);
                ids[k] = ds.modality_sample_ids[v][keep[k]];
                out.labels[ids[k]] = ds.label_of(ids[k]);
            }
            out.modality_features[v] = std::move(X);
            out.modality_sample_ids[v] = std::move(ids);
        }
        out.finalize();
        return out;
    };
    return {subset(true), subset(false)};
}

} // namespace mnse
