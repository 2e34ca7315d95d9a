#include "mnse/serialize.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace mnse {

namespace fs = std::filesystem;

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (int i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j) {
    if (!j.is_array()) throw ValidationError("matrix must be an array of rows");
    const int rows = static_cast<int>(j.size());
    if (rows == 0) return Matrix(0, 0);
    const int cols = static_cast<int>(j[0].size());
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols) {
            throw ValidationError("ragged matrix rows in document");
        }
        for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

namespace {

Json hyperparams_to_json(const HyperParams& hp) {
    return Json{{"mu1", hp.mu1},
                {"mu2", hp.mu2},
                {"mu3", hp.mu3},
                {"mu4", hp.mu4},
                {"mu5", hp.mu5},
                {"dim", hp.dim},
                {"max_iters", hp.max_iters},
                {"tol", hp.tol},
                {"sigma_grid",
                 Json{{"count", hp.sigma_grid.count},
                      {"min_mult", hp.sigma_grid.min_mult},
                      {"max_mult", hp.sigma_grid.max_mult}}},
                {"theta_override", hp.theta_override}};
}

HyperParams hyperparams_from_json(const Json& j) {
    HyperParams hp;
    hp.mu1 = j.at("mu1").get<double>();
    hp.mu2 = j.at("mu2").get<double>();
    hp.mu3 = j.at("mu3").get<double>();
    hp.mu4 = j.at("mu4").get<double>();
    hp.mu5 = j.at("mu5").get<double>();
    hp.dim = j.at("dim").get<int>();
    hp.max_iters = j.at("max_iters").get<int>();
    hp.tol = j.at("tol").get<double>();
    hp.sigma_grid.count = j.at("sigma_grid").at("count").get<int>();
    hp.sigma_grid.min_mult = j.at("sigma_grid").at("min_mult").get<double>();
    hp.sigma_grid.max_mult = j.at("sigma_grid").at("max_mult").get<double>();
    hp.theta_override = j.at("theta_override").get<std::vector<double>>();
    return hp;
}

} // namespace

Json model_to_json(const EmbeddingModel& model) {
    Json j;
    j["kind"] = "mnse-model";
    j["version"] = 1;
    j["num_modalities"] = model.train.num_modalities;
    j["num_classes"] = model.train.num_classes;
    j["dim"] = model.dim();
    j["hyperparams"] = hyperparams_to_json(model.hp);
    j["theta"] = model.theta;
    j["indefinite_A"] = model.indefinite_A;

    Json ids = Json::array(), classes = Json::array();
    for (const auto& [id, cls] : model.train.labels) {
        ids.push_back(id);
        classes.push_back(cls);
    }
    j["labels"] = Json{{"ids", std::move(ids)}, {"classes", std::move(classes)}};

    Json modalities = Json::array();
    for (int v = 0; v < model.train.num_modalities; ++v) {
        const auto& interp = model.interpolators[v];
        modalities.push_back(Json{{"sigma", interp.sigma},
                                  {"lambda", interp.lambda},
                                  {"sample_ids", model.train.modality_sample_ids[v]},
                                  {"features", matrix_to_json(interp.X)},
                                  {"Y", matrix_to_json(interp.Y)},
                                  {"C", matrix_to_json(interp.C)}});
    }
    j["modalities"] = std::move(modalities);

    Json trace = Json::array();
    for (const auto& e : model.trace) {
        trace.push_back(Json{{"iteration", e.iteration},
                             {"objective_after_y", e.objective_after_y},
                             {"objective_after_sigma", e.objective_after_sigma},
                             {"sigma", e.sigma},
                             {"ortho_error", e.ortho_error}});
    }
    j["trace"] = std::move(trace);
    return j;
}

EmbeddingModel model_from_json(const Json& j) {
    check_schema(j, "mnse-model");
    EmbeddingModel model;
    model.hp = hyperparams_from_json(j.at("hyperparams"));
    model.theta = j.at("theta").get<std::vector<double>>();
    model.indefinite_A = j.at("indefinite_A").get<bool>();

    MultiModalDataset& ds = model.train;
    ds.num_modalities = j.at("num_modalities").get<int>();
    ds.num_classes = j.at("num_classes").get<int>();
    const auto& ids = j.at("labels").at("ids");
    const auto& classes = j.at("labels").at("classes");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ds.labels[ids[i].get<SampleId>()] = classes[i].get<int>();
    }

    int total = 0;
    const int d = j.at("dim").get<int>();
    for (const auto& mod : j.at("modalities")) {
        InterpolatorModel interp;
        interp.sigma = mod.at("sigma").get<double>();
        interp.lambda = mod.at("lambda").get<double>();
        interp.X = matrix_from_json(mod.at("features"));
        interp.Y = matrix_from_json(mod.at("Y"));
        interp.C = matrix_from_json(mod.at("C"));
        ds.modality_features.push_back(interp.X);
        ds.modality_sample_ids.push_back(mod.at("sample_ids").get<std::vector<SampleId>>());
        total += static_cast<int>(interp.X.rows());
        model.interpolators.push_back(std::move(interp));
    }
    ds.finalize();

    model.Y_stacked = Matrix(total, d);
    int off = 0;
    for (const auto& interp : model.interpolators) {
        model.Y_stacked.middleRows(off, interp.Y.rows()) = interp.Y;
        off += static_cast<int>(interp.Y.rows());
    }

    for (const auto& e : j.at("trace")) {
        TraceEntry entry;
        entry.iteration = e.at("iteration").get<int>();
        entry.objective_after_y = e.at("objective_after_y").get<double>();
        entry.objective_after_sigma = e.at("objective_after_sigma").get<double>();
        entry.sigma = e.at("sigma").get<std::vector<double>>();
        entry.ortho_error = e.at("ortho_error").get<double>();
        model.trace.push_back(std::move(entry));
    }
    return model;
}

Json synth_config_to_json(const SynthConfig& cfg) {
    return Json{{"kind", "mnse-synth-config"},
                {"num_classes", cfg.num_classes},
                {"num_modalities", cfg.num_modalities},
                {"per_class", cfg.per_class},
                {"ambient_dims", cfg.ambient_dims},
                {"dims0", cfg.dims0},
                {"center_separation", cfg.center_separation},
                {"class_noise", cfg.class_noise},
                {"warp", SynthConfig::warp_name(cfg.warp)},
                {"cross_noise", cfg.cross_noise},
                {"seed", cfg.seed}};
}

SynthConfig synth_config_from_json(const Json& j) {
    SynthConfig cfg;
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.num_modalities = j.at("num_modalities").get<int>();
    cfg.per_class = j.at("per_class").get<int>();
    cfg.ambient_dims = j.at("ambient_dims").get<std::vector<int>>();
    cfg.dims0 = j.at("dims0").get<int>();
    cfg.center_separation = j.at("center_separation").get<double>();
    cfg.class_noise = j.at("class_noise").get<double>();
    cfg.warp = SynthConfig::parse_warp(j.at("warp").get<std::string>());
    cfg.cross_noise = j.at("cross_noise").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

Json bound_report_to_json(const BoundReport& r) {
    Json j;
    j["kind"] = "bound-report";
    j["condition_holds"] = r.condition_holds;
    j["slack"] = r.slack;
    j["theorem1_floor"] = r.theorem1_floor;
    j["lemma_floor"] = r.lemma_floor;
    j["K"] = r.K;
    j["precision_floor"] = r.precision_floor;
    j["recall_floor"] = r.recall_floor;
    j["vacuous"] = r.vacuous;
    j["ball_estimator"] = r.ball_estimator;
    j["grid_points_checked"] = r.grid_points_checked;
    j["grid_points_condition_holds"] = r.grid_points_condition_holds;
    j["params"] = Json{{"eta", r.params.eta},
                       {"R_delta", r.params.R_delta},
                       {"gamma", r.params.gamma},
                       {"delta", r.params.delta},
                       {"eps", r.params.eps},
                       {"Q", r.params.Q},
                       {"d", r.params.d},
                       {"V", r.params.V},
                       {"L", r.params.L},
                       {"L_per_modality", r.params.L_per_modality},
                       {"eta_ball", r.params.eta_ball},
                       {"N_per_class", r.params.N_per_class}};
    j["monte_carlo"] = Json{{"trials", r.trials},
                            {"empirical_classification", r.empirical_classification},
                            {"empirical_precision", r.empirical_precision},
                            {"empirical_recall", r.empirical_recall},
                            {"classification_slack_3sigma", r.classification_slack_3sigma},
                            {"empirical_respects_floor", r.empirical_respects_floor}};
    return j;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write file: " + tmp.string());
        out << contents;
        if (!out) throw NumericError("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

void save_model(const EmbeddingModel& model, const std::string& path) {
    write_file_atomic(path, model_to_json(model).dump(2) + "\n");
}

EmbeddingModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw ValidationError("model file is not valid JSON: " + std::string(e.what()));
    }
    return model_from_json(j);
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError("schema check failed: " + what);
}

void require_keys(const Json& j, std::initializer_list<const char*> keys) {
    require(j.is_object(), "expected an object");
    for (const char* k : keys) require(j.contains(k), std::string("missing key '") + k + "'");
}

} // namespace

void check_schema(const Json& j, const std::string& kind) {
    require_keys(j, {"kind"});
    require(j.at("kind") == kind, "kind is not '" + kind + "'");
    if (kind == "mnse-model") {
        require_keys(j, {"version", "num_modalities", "num_classes", "dim", "hyperparams",
                         "theta", "indefinite_A", "labels", "modalities", "trace"});
        require(j.at("modalities").is_array() && !j.at("modalities").empty(),
                "modalities must be a non-empty array");
        for (const auto& mod : j.at("modalities")) {
            require_keys(mod, {"sigma", "lambda", "sample_ids", "features", "Y", "C"});
        }
        require_keys(j.at("labels"), {"ids", "classes"});
        require(j.at("labels").at("ids").size() == j.at("labels").at("classes").size(),
                "labels ids/classes length mismatch");
        for (const auto& e : j.at("trace")) {
            require_keys(e, {"iteration", "objective_after_y", "objective_after_sigma", "sigma",
                             "ortho_error"});
        }
    } else if (kind == "classify-report") {
        require_keys(j, {"mode", "per_modality"});
        for (const auto& e : j.at("per_modality")) {
            require_keys(e, {"modality", "misclassification_percent", "num_test"});
            const double rate = e.at("misclassification_percent").get<double>();
            require(rate >= 0.0 && rate <= 100.0, "misclassification_percent out of [0,100]");
        }
    } else if (kind == "retrieve-report") {
        require_keys(j, {"metric", "k", "directions"});
        for (const auto& e : j.at("directions")) {
            require_keys(e, {"from", "to", "map", "precision_at_k", "recall_at_k", "per_query"});
            const double map = e.at("map").get<double>();
            require(map >= 0.0 && map <= 1.0, "map out of [0,1]");
        }
    } else if (kind == "bound-report") {
        require_keys(j, {"condition_holds", "slack", "theorem1_floor", "lemma_floor", "K",
                         "precision_floor", "recall_floor", "vacuous", "ball_estimator",
                         "params", "monte_carlo"});
        require_keys(j.at("params"), {"eta", "R_delta", "gamma", "delta", "eps", "Q", "d", "V",
                                      "L", "L_per_modality", "eta_ball", "N_per_class"});
        const double floor = j.at("theorem1_floor").get<double>();
        require(floor >= 0.0 && floor <= 1.0, "theorem1_floor out of [0,1]");
    } else if (kind == "matrix-dump") {
        require_keys(j, {"matrices"});
        require(j.at("matrices").is_object(), "matrices must be an object");
    } else if (kind == "mnse-synth-config") {
        require_keys(j, {"num_classes", "num_modalities", "per_class", "seed"});
    } else {
        throw ValidationError("unknown document kind '" + kind + "'");
    }
}

namespace {

std::string feature_file(int v) { return "modality_" + std::to_string(v + 1) + "_features.csv"; }
std::string id_file(int v) { return "modality_" + std::to_string(v + 1) + "_ids.csv"; }

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace

void save_dataset_dir(const MultiModalDataset& ds, const std::string& dir,
                      const SynthConfig* cfg) {
    fs::create_directories(dir);
    for (int v = 0; v < ds.num_modalities; ++v) {
        std::string features;
        const auto& X = ds.modality_features[v];
        for (int i = 0; i < X.rows(); ++i) {
            for (int j = 0; j < X.cols(); ++j) {
                if (j) features += ',';
                features += format_double(X(i, j));
            }
            features += '\n';
        }
        write_file_atomic((fs::path(dir) / feature_file(v)).string(), features);

        std::string ids;
        for (SampleId id : ds.modality_sample_ids[v]) ids += std::to_string(id) + "\n";
        write_file_atomic((fs::path(dir) / id_file(v)).string(), ids);
    }
    std::string labels;
    for (const auto& [id, cls] : ds.labels) {
        labels += std::to_string(id) + "," + std::to_string(cls) + "\n";
    }
    write_file_atomic((fs::path(dir) / "labels.csv").string(), labels);
    if (cfg) {
        write_file_atomic((fs::path(dir) / "synth.json").string(),
                          synth_config_to_json(*cfg).dump(2) + "\n");
    }
}

MultiModalDataset load_dataset_dir(const std::string& dir) {
    std::vector<std::string> features, ids;
    for (int v = 0;; ++v) {
        const auto f = fs::path(dir) / feature_file(v);
        const auto i = fs::path(dir) / id_file(v);
        if (!fs::exists(f)) break;
        if (!fs::exists(i)) throw ValidationError("missing ID file: " + i.string());
        features.push_back(f.string());
        ids.push_back(i.string());
    }
    if (features.empty()) {
        throw ValidationError("no modality files found in " + dir +
                              " (expected modality_1_features.csv, ...)");
    }
    const auto labels = fs::path(dir) / "labels.csv";
    if (!fs::exists(labels)) throw ValidationError("missing label file: " + labels.string());
    return load_dataset(features, ids, labels.string());
}

bool load_synth_config_dir(const std::string& dir, SynthConfig& out) {
    const auto path = fs::path(dir) / "synth.json";
    if (!fs::exists(path)) return false;
    std::ifstream in(path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw ValidationError("synth.json is not valid JSON: " + std::string(e.what()));
    }
    out = synth_config_from_json(j);
    return true;
}

} // namespace mnse
