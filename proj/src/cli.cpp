#include "mnse/cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mnse/bounds.hpp"
#include "mnse/dataset.hpp"
#include "mnse/eval.hpp"
#include "mnse/optimizer.hpp"
#include "mnse/serialize.hpp"

namespace mnse::cli {

namespace {

std::string timestamp_utc() {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

double parse_double_value(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return x;
    } catch (const std::exception&) {
        throw ValidationError("bad numeric value for key '" + key + "': " + value);
    }
}

int parse_int_value(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int x = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return x;
    } catch (const std::exception&) {
        throw ValidationError("bad integer value for key '" + key + "': " + value);
    }
}

// Flat `key = value` configuration. Unknown keys are hard errors so typos in
// the mu names cannot silently fall back to defaults.
HyperParams parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);

    // First pass: find the preset so later keys override it.
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("expected 'key = value' at " + path + ":" +
                                  std::to_string(lineno));
        }
        entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }

    HyperParams hp = HyperParams::classification_defaults();
    for (const auto& [key, value] : entries) {
        if (key == "preset") {
            if (value == "classification") hp = HyperParams::classification_defaults();
            else if (value == "retrieval") hp = HyperParams::retrieval_defaults();
            else throw ValidationError("unknown preset '" + value + "' in " + path);
        }
    }
    for (const auto& [key, value] : entries) {
        if (key == "preset") continue;
        else if (key == "mu1") hp.mu1 = parse_double_value(key, value);
        else if (key == "mu2") hp.mu2 = parse_double_value(key, value);
        else if (key == "mu3") hp.mu3 = parse_double_value(key, value);
        else if (key == "mu4") hp.mu4 = parse_double_value(key, value);
        else if (key == "mu5") hp.mu5 = parse_double_value(key, value);
        else if (key == "dim") hp.dim = parse_int_value(key, value);
        else if (key == "max_iters") hp.max_iters = parse_int_value(key, value);
        else if (key == "tol") hp.tol = parse_double_value(key, value);
        else if (key == "sigma_grid_count") hp.sigma_grid.count = parse_int_value(key, value);
        else if (key == "sigma_grid_min_mult") hp.sigma_grid.min_mult = parse_double_value(key, value);
        else if (key == "sigma_grid_max_mult") hp.sigma_grid.max_mult = parse_double_value(key, value);
        else if (key == "theta_override") {
            hp.theta_override.clear();
            std::stringstream ss(value);
            std::string token;
            while (std::getline(ss, token, ',')) {
                hp.theta_override.push_back(parse_double_value(key, trim(token)));
            }
        } else {
            throw ValidationError("unknown config key '" + key + "' in " + path);
        }
    }
    return hp;
}

struct HyperFlags {
    double mu1 = -1, mu2 = -1, mu3 = -1, mu4 = -1, mu5 = -1, tol = -1;
    int dim = -1, max_iters = -1;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--mu1", mu1, "between-class separation weight");
        cmd->add_option("--mu2", mu2, "interpolator coefficient weight");
        cmd->add_option("--mu3", mu3, "kernel scale weight");
        cmd->add_option("--mu4", mu4, "cross-modal within-class weight");
        cmd->add_option("--mu5", mu5, "cross-modal between-class weight");
        cmd->add_option("--dim", dim, "embedding dimension (default: classes - 1)");
        cmd->add_option("--max-iters", max_iters, "iteration cap");
        cmd->add_option("--tol", tol, "relative objective tolerance");
    }

    void apply(HyperParams& hp) const {
        if (mu1 >= 0) hp.mu1 = mu1;
        if (mu2 >= 0) hp.mu2 = mu2;
        if (mu3 >= 0) hp.mu3 = mu3;
        if (mu4 >= 0) hp.mu4 = mu4;
        if (mu5 >= 0) hp.mu5 = mu5;
        if (dim >= 0) hp.dim = dim;
        if (max_iters >= 0) hp.max_iters = max_iters;
        if (tol >= 0) hp.tol = tol;
    }
};

HyperParams resolve_hyperparams(const std::string& config_path, const HyperFlags& flags) {
    HyperParams hp = config_path.empty() ? HyperParams::classification_defaults()
                                         : parse_config_file(config_path);
    flags.apply(hp);
    hp.validate();
    return hp;
}

void write_json_report(const std::string& path, Json j) {
    j["timestamp"] = timestamp_utc();
    write_file_atomic(path, j.dump(2) + "\n");
}

int run_gen(const SynthConfig& cfg, const std::string& out_dir) {
    auto ds = generate_synthetic(cfg);
    save_dataset_dir(ds, out_dir, &cfg);
    std::cout << "wrote " << cfg.num_modalities << " modalities x " << ds.rows(0)
              << " observations to " << out_dir << "\n";
    return 0;
}

int run_train(const std::string& data_dir, const std::string& config_path,
              const HyperFlags& flags, const std::string& model_path) {
    const auto hp = resolve_hyperparams(config_path, flags);
    const auto ds = load_dataset_dir(data_dir);
    const auto model = train(ds, hp);
    save_model(model, model_path);
    const auto& last = model.trace.back();
    std::cout << "trained " << model.num_modalities() << "-modality model (d=" << model.dim()
              << ") in " << model.trace.size() << " iterations, objective "
              << last.objective_after_sigma << "; saved to " << model_path << "\n";
    return 0;
}

int run_eval_classify(const std::string& model_path, const std::string& test_dir,
                      const std::string& mode_name, const std::string& out_path) {
    const auto model = load_model(model_path);
    const auto test = load_dataset_dir(test_dir);
    const auto mode = parse_classify_mode(mode_name);

    Json j;
    j["kind"] = "classify-report";
    j["mode"] = mode_name;
    j["model"] = model_path;
    Json per_modality = Json::array();
    for (int v = 0; v < model.num_modalities(); ++v) {
        const double rate = misclassification_rate(model, test, v, mode);
        per_modality.push_back(Json{{"modality", v + 1},
                                    {"misclassification_percent", rate},
                                    {"num_test", test.rows(v)}});
        std::cout << "modality " << (v + 1) << ": " << rate << "% misclassified over "
                  << test.rows(v) << " samples\n";
    }
    j["per_modality"] = std::move(per_modality);
    check_schema(j, "classify-report");
    if (!out_path.empty()) write_json_report(out_path, std::move(j));
    return 0;
}

int run_eval_retrieve(const std::string& model_path, const std::string& test_dir, int K,
                      const std::string& metric_name, const std::string& out_path) {
    const auto model = load_model(model_path);
    const auto test = load_dataset_dir(test_dir);
    const auto metric = parse_metric(metric_name);

    Json j;
    j["kind"] = "retrieve-report";
    j["metric"] = metric_name;
    j["model"] = model_path;
    Json directions = Json::array();
    for (int v = 0; v < model.num_modalities(); ++v) {
        for (int u = 0; u < model.num_modalities(); ++u) {
            if (u == v) continue;
            const int n_u = model.train.rows(u);
            const int depth = K > 0 ? std::min(K, n_u) : n_u;
            const auto target_labels = model.train.labels_for(u);

            std::vector<double> precision_sum(depth, 0.0), recall_sum(depth, 0.0);
            Json per_query = Json::array();
            double map_sum = 0.0;
            int n_q = 0;
            for (int i = 0; i < test.rows(v); ++i) {
                const SampleId qid = test.modality_sample_ids[v][i];
                const int cls = test.label_of(qid);
                int total_relevant = 0;
                for (int lbl : target_labels) total_relevant += lbl == cls ? 1 : 0;
                if (total_relevant == 0) {
                    throw ValidationError("query class " + std::to_string(cls) +
                                          " absent from target modality " + std::to_string(u + 1));
                }
                const auto full = retrieve(model, test.modality_features[v].row(i).transpose(),
                                           v, u, n_u, metric, qid);
                std::vector<int> flags;
                flags.reserve(n_u);
                for (const auto& [id, score] : full.ranked) {
                    flags.push_back(model.train.label_of(id) == cls ? 1 : 0);
                }
                map_sum += average_precision(flags, total_relevant);
                int tp = 0;
                for (int k = 0; k < depth; ++k) {
                    tp += flags[k];
                    precision_sum[k] += double(tp) / double(k + 1);
                    recall_sum[k] += double(tp) / double(total_relevant);
                }
                per_query.push_back(Json{{"query_id", qid},
                                         {"tp", tp},
                                         {"fp", depth - tp},
                                         {"fn", total_relevant - tp}});
                ++n_q;
            }
            if (n_q == 0) continue;
            Json dir;
            dir["from"] = v + 1;
            dir["to"] = u + 1;
            dir["map"] = map_sum / n_q;
            Json pk = Json::array(), rk = Json::array();
            for (int k = 0; k < depth; ++k) {
                pk.push_back(precision_sum[k] / n_q);
                rk.push_back(recall_sum[k] / n_q);
            }
            dir["precision_at_k"] = std::move(pk);
            dir["recall_at_k"] = std::move(rk);
            dir["per_query"] = std::move(per_query);
            std::cout << "direction " << (v + 1) << "->" << (u + 1)
                      << ": MAP " << dir["map"].get<double>() << " over " << n_q << " queries\n";
            directions.push_back(std::move(dir));
        }
    }
    j["k"] = K;
    j["directions"] = std::move(directions);
    check_schema(j, "retrieve-report");
    if (!out_path.empty()) write_json_report(out_path, std::move(j));
    return 0;
}

int run_validate(const std::string& data_dir, const std::string& config_path,
                 const HyperFlags& flags, std::int64_t trials, int K, std::uint64_t seed,
                 const std::string& out_path) {
    SynthConfig cfg;
    if (!load_synth_config_dir(data_dir, cfg)) {
        throw ValidationError("validate needs a generated dataset: no synth.json in " + data_dir);
    }
    const auto hp = resolve_hyperparams(config_path, flags);
    ValidateOptions opts;
    opts.trials = trials;
    opts.K = K;
    opts.seed = seed;
    const auto report = monte_carlo_validate(cfg, hp, opts);

    Json j = bound_report_to_json(report);
    check_schema(j, "bound-report");
    if (!out_path.empty()) write_json_report(out_path, std::move(j));

    std::cout << (report.vacuous ? "vacuous" : "nonvacuous") << " theorem-1 floor "
              << report.theorem1_floor << "; empirical classification rate "
              << report.empirical_classification << "\n";
    if (!report.empirical_respects_floor) {
        std::cerr << "error: empirical rate violates a nonvacuous floor beyond 3-sigma slack\n";
        return 2;
    }
    return 0;
}

int run_dump_matrices(const std::string& data_dir, const std::string& config_path,
                      const HyperFlags& flags, const std::string& out_path) {
    const auto hp = resolve_hyperparams(config_path, flags);
    const auto ds = load_dataset_dir(data_dir);

    const int V = ds.num_modalities;
    std::vector<double> theta(V);
    for (int v = 0; v < V; ++v) {
        const bool overridden = v < static_cast<int>(hp.theta_override.size()) &&
                                hp.theta_override[v] > 0.0;
        theta[v] = overridden ? hp.theta_override[v]
                              : reference_scale(ds.modality_features[v], ds.labels_for(v));
    }
    const auto lap = build_laplacians(ds, theta);

    std::vector<Matrix> psi_blocks, psi_inv_sq_blocks;
    for (int v = 0; v < V; ++v) {
        Matrix psi = rbf_kernel_matrix(ds.modality_features[v], theta[v]);
        psi_inv_sq_blocks.push_back(kernel_inverse_squared(psi).first);
        psi_blocks.push_back(std::move(psi));
    }
    const Matrix psi = assemble_block_diagonal(psi_blocks);
    const Matrix psi_inv_sq = assemble_block_diagonal(psi_inv_sq_blocks);
    const Matrix A = build_A(lap, psi_inv_sq, hp);

    Json j;
    j["kind"] = "matrix-dump";
    j["theta"] = theta;
    j["matrices"] = Json{{"L_within", matrix_to_json(lap.L_within)},
                         {"L_between", matrix_to_json(lap.L_between)},
                         {"L_cross_within", matrix_to_json(lap.L_cross_within)},
                         {"L_cross_between", matrix_to_json(lap.L_cross_between)},
                         {"Psi", matrix_to_json(psi)},
                         {"Psi_inv_sq", matrix_to_json(psi_inv_sq)},
                         {"A", matrix_to_json(A)}};
    check_schema(j, "matrix-dump");
    write_json_report(out_path, std::move(j));
    std::cout << "wrote matrix dump (" << A.rows() << "x" << A.cols() << ") to " << out_path << "\n";
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args) {
    if (const char* env = std::getenv("MNSE_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) Eigen::setNbThreads(n);
    }

    CLI::App app{"supervised multi-modal nonlinear embedding toolkit"};
    app.require_subcommand(1);

    // gen
    SynthConfig synth;
    std::string gen_out;
    std::string warp_name = "identity";
    auto* gen = app.add_subcommand("gen", "generate a synthetic multi-modal dataset");
    gen->add_option("--seed", synth.seed, "RNG seed");
    gen->add_option("--classes", synth.num_classes, "number of classes");
    gen->add_option("--modalities", synth.num_modalities, "number of modalities");
    gen->add_option("--per-class", synth.per_class, "samples per class");
    gen->add_option("--dims", synth.dims0, "ambient dimension");
    gen->add_option("--separation", synth.center_separation, "class center separation");
    gen->add_option("--noise", synth.class_noise, "within-class noise scale");
    gen->add_option("--warp", warp_name, "cross-modal warp (identity|affine|cubic)");
    gen->add_option("--cross-noise", synth.cross_noise, "cross-modal noise scale");
    gen->add_option("--out", gen_out, "output directory")->required();

    // split
    std::string split_data, split_train_out, split_test_out;
    double split_fraction = 0.5;
    std::uint64_t split_seed = 0;
    auto* split_cmd = app.add_subcommand("split", "stratified train/test split");
    split_cmd->add_option("--data", split_data, "dataset directory")->required();
    split_cmd->add_option("--fraction", split_fraction, "train fraction in (0,1)");
    split_cmd->add_option("--seed", split_seed, "RNG seed");
    split_cmd->add_option("--out-train", split_train_out, "train output directory")->required();
    split_cmd->add_option("--out-test", split_test_out, "test output directory")->required();

    // train
    std::string train_data, train_config, train_model;
    HyperFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "learn the multi-modal embedding");
    train_cmd->add_option("--data", train_data, "dataset directory")->required();
    train_cmd->add_option("--config", train_config, "key = value config file");
    train_cmd->add_option("--model", train_model, "output model file")->required();
    train_flags.add_to(train_cmd);

    // eval classify / eval retrieve
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained model");
    eval_cmd->require_subcommand(1);
    std::string ec_model, ec_test, ec_mode = "all", ec_out;
    auto* ec = eval_cmd->add_subcommand("classify", "nearest-neighbor classification");
    ec->add_option("--model", ec_model, "model file")->required();
    ec->add_option("--test", ec_test, "test dataset directory")->required();
    ec->add_option("--mode", ec_mode, "nearest-neighbor search scope (all|own)");
    ec->add_option("--out", ec_out, "report output file");

    std::string er_model, er_test, er_metric = "cosine", er_out;
    int er_k = 0;
    auto* er = eval_cmd->add_subcommand("retrieve", "cross-modal retrieval");
    er->add_option("--model", er_model, "model file")->required();
    er->add_option("--test", er_test, "query dataset directory")->required();
    er->add_option("--k", er_k, "retrieval depth (0 = full ranking)");
    er->add_option("--metric", er_metric, "ranking metric (euclidean|cosine)");
    er->add_option("--out", er_out, "report output file");

    // validate
    std::string val_data, val_config, val_out;
    HyperFlags val_flags;
    std::int64_t val_trials = 1000;
    int val_k = 0;
    std::uint64_t val_seed = 1;
    auto* val = app.add_subcommand("validate", "Monte Carlo validation of the bounds");
    val->add_option("--data", val_data, "generated dataset directory (with synth.json)")->required();
    val->add_option("--config", val_config, "key = value config file");
    val->add_option("--trials", val_trials, "Monte Carlo trials (>= 100)");
    val->add_option("--k", val_k, "retrieval depth (0 = audit's Q)");
    val->add_option("--seed", val_seed, "seed for fresh test draws");
    val->add_option("--out", val_out, "report output file");
    val_flags.add_to(val);

    // dump-matrices
    std::string dump_data, dump_config, dump_out;
    HyperFlags dump_flags;
    auto* dump = app.add_subcommand("dump-matrices", "debug export of the objective matrices");
    dump->add_option("--data", dump_data, "dataset directory")->required();
    dump->add_option("--config", dump_config, "key = value config file");
    dump->add_option("--out", dump_out, "output file")->required();
    dump_flags.add_to(dump);

    std::vector<const char*> argv;
    argv.push_back("mnse");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) {
            synth.warp = SynthConfig::parse_warp(warp_name);
            return run_gen(synth, gen_out);
        }
        if (split_cmd->parsed()) {
            auto ds = load_dataset_dir(split_data);
            SynthConfig cfg;
            const bool has_cfg = load_synth_config_dir(split_data, cfg);
            auto [train_ds, test_ds] = split(ds, split_fraction, split_seed);
            save_dataset_dir(train_ds, split_train_out, has_cfg ? &cfg : nullptr);
            save_dataset_dir(test_ds, split_test_out, nullptr);
            std::cout << "split into " << train_ds.labels.size() << " train / "
                      << test_ds.labels.size() << " test samples\n";
            return 0;
        }
        if (train_cmd->parsed()) return run_train(train_data, train_config, train_flags, train_model);
        if (ec->parsed()) return run_eval_classify(ec_model, ec_test, ec_mode, ec_out);
        if (er->parsed()) return run_eval_retrieve(er_model, er_test, er_k, er_metric, er_out);
        if (val->parsed()) {
            return run_validate(val_data, val_config, val_flags, val_trials, val_k, val_seed, val_out);
        }
        if (dump->parsed()) return run_dump_matrices(dump_data, dump_config, dump_flags, dump_out);
        std::cerr << "no subcommand given\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace mnse::cli
