#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "mnse/dataset.hpp"

using namespace mnse;
namespace fs = std::filesystem;

namespace {

bool exact_eq(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("mnse_ds_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& contents) const {
        const auto p = path / name;
        std::ofstream(p) << contents;
        return p.string();
    }
};

} // namespace

TEST_CASE("load_dataset accepts a minimal two-modality input") {
    TempDir dir;
    auto f1 = dir.file("f1.csv", "0.0,1.0\n2.0,3.0\n");
    auto f2 = dir.file("f2.csv", "5.0\n6.0\n");
    auto i1 = dir.file("i1.csv", "0\n1\n");
    auto i2 = dir.file("i2.csv", "0\n1\n");
    auto lab = dir.file("labels.csv", "0,0\n1,1\n");

    auto ds = load_dataset({f1, f2}, {i1, i2}, lab);
    CHECK(ds.num_modalities == 2);
    CHECK(ds.num_classes == 2);
    CHECK(ds.rows(0) == 2);
    CHECK(ds.rows(1) == 2);
    CHECK(ds.dim(0) == 2);
    CHECK(ds.dim(1) == 1);
    CHECK(ds.label_of(0) == 0);
    CHECK(ds.label_of(1) == 1);
    CHECK(ds.modality_features[0](1, 1) == 3.0);
}

TEST_CASE("load_dataset rejects an ID without a label") {
    TempDir dir;
    auto f = dir.file("f.csv", "0.0\n1.0\n");
    auto i = dir.file("i.csv", "0\n7\n");
    auto lab = dir.file("labels.csv", "0,0\n");
    CHECK_THROWS_WITH_AS(load_dataset({f}, {i}, lab),
                         doctest::Contains("missing label"), ValidationError);
}

TEST_CASE("load_dataset rejects nan features") {
    TempDir dir;
    auto f = dir.file("f.csv", "0.0\nnan\n");
    auto i = dir.file("i.csv", "0\n1\n");
    auto lab = dir.file("labels.csv", "0,0\n1,0\n");
    CHECK_THROWS_AS(load_dataset({f}, {i}, lab), ValidationError);
}

TEST_CASE("load_dataset reports row-count mismatches and bad tokens with location") {
    TempDir dir;
    auto f = dir.file("f.csv", "0.0\n1.0\n2.0\n");
    auto i = dir.file("i.csv", "0\n1\n");
    auto lab = dir.file("labels.csv", "0,0\n1,0\n2,0\n");
    CHECK_THROWS_WITH_AS(load_dataset({f}, {i}, lab),
                         doctest::Contains("row-count mismatch"), ValidationError);

    auto f2 = dir.file("f2.csv", "0.0\nbogus\n");
    CHECK_THROWS_WITH_AS(load_dataset({f2}, {i}, lab),
                         doctest::Contains("f2.csv:2"), ValidationError);

    auto i_dup = dir.file("i_dup.csv", "0\n0\n");
    auto fb = dir.file("fb.csv", "0.0\n1.0\n");
    CHECK_THROWS_WITH_AS(load_dataset({fb}, {i_dup}, lab),
                         doctest::Contains("duplicate sample ID"), ValidationError);
}

TEST_CASE("generate_synthetic honors counts and presence") {
    SynthConfig cfg;
    cfg.seed = 7;
    cfg.num_classes = 3;
    cfg.num_modalities = 2;
    cfg.per_class = 20;
    auto ds = generate_synthetic(cfg);
    CHECK(ds.num_modalities == 2);
    CHECK(ds.rows(0) == 60);
    CHECK(ds.rows(1) == 60);
    CHECK(ds.labels.size() == 60);
    for (const auto& [id, cls] : ds.labels) {
        CHECK(ds.row_of(0, id).has_value());
        CHECK(ds.row_of(1, id).has_value());
    }
}

TEST_CASE("generate_synthetic with zero noise and identity warp duplicates modality 1") {
    SynthConfig cfg;
    cfg.seed = 3;
    cfg.class_noise = 0.0;
    cfg.cross_noise = 0.0;
    cfg.warp = SynthConfig::Warp::identity;
    auto ds = generate_synthetic(cfg);
    CHECK(exact_eq(ds.modality_features[0], ds.modality_features[1]));
}

TEST_CASE("generate_synthetic is a pure function of its config") {
    SynthConfig cfg;
    cfg.seed = 42;
    cfg.warp = SynthConfig::Warp::affine;
    cfg.ambient_dims = {2, 5};
    cfg.cross_noise = 0.3;
    auto a = generate_synthetic(cfg);
    auto b = generate_synthetic(cfg);
    CHECK(exact_eq(a.modality_features[0], b.modality_features[0]));
    CHECK(exact_eq(a.modality_features[1], b.modality_features[1]));
    CHECK(a.labels == b.labels);

    cfg.seed = 43;
    auto c = generate_synthetic(cfg);
    CHECK_FALSE(exact_eq(a.modality_features[0], c.modality_features[0]));
}

TEST_CASE("generate_synthetic rejects dimension mismatches for identity warp") {
    SynthConfig cfg;
    cfg.ambient_dims = {2, 3};
    CHECK_THROWS_AS(generate_synthetic(cfg), ValidationError);
    cfg.warp = SynthConfig::Warp::affine;
    CHECK_NOTHROW(generate_synthetic(cfg));
}

TEST_CASE("split is stratified, exhaustive, and deterministic") {
    SynthConfig cfg;
    cfg.seed = 7;
    cfg.num_classes = 3;
    cfg.per_class = 20;
    auto ds = generate_synthetic(cfg);

    auto [train_ds, test_ds] = split(ds, 0.5, 11);
    CHECK(train_ds.labels.size() == 30);
    CHECK(test_ds.labels.size() == 30);

    // per-class proportions preserved
    for (int m = 0; m < 3; ++m) {
        int n_train = 0, n_test = 0;
        for (const auto& [id, cls] : train_ds.labels) n_train += cls == m;
        for (const auto& [id, cls] : test_ds.labels) n_test += cls == m;
        CHECK(n_train == 10);
        CHECK(n_test == 10);
    }

    // partition: union is the original ID set, intersection empty
    std::set<SampleId> seen;
    for (const auto& [id, cls] : train_ds.labels) seen.insert(id);
    for (const auto& [id, cls] : test_ds.labels) CHECK(seen.insert(id).second);
    CHECK(seen.size() == ds.labels.size());

    auto [train2, test2] = split(ds, 0.5, 11);
    CHECK(train_ds.labels == train2.labels);
    CHECK(exact_eq(train_ds.modality_features[0], train2.modality_features[0]));
    auto [train3, test3] = split(ds, 0.5, 12);
    CHECK(train_ds.labels != train3.labels);
}

TEST_CASE("split rejects degenerate fractions and tiny classes") {
    SynthConfig cfg;
    cfg.per_class = 2;
    auto ds = generate_synthetic(cfg);
    CHECK_THROWS_AS(split(ds, 1.0, 0), ValidationError);
    CHECK_THROWS_AS(split(ds, 0.0, 0), ValidationError);

    SynthConfig tiny;
    tiny.per_class = 1;
    auto ds1 = generate_synthetic(tiny);
    CHECK_THROWS_AS(split(ds1, 0.5, 0), ValidationError);
}

TEST_CASE("every modality row maps to exactly one label") {
    SynthConfig cfg;
    cfg.seed = 5;
    cfg.num_classes = 4;
    cfg.per_class = 6;
    auto ds = generate_synthetic(cfg);
    for (int v = 0; v < ds.num_modalities; ++v) {
        for (SampleId id : ds.modality_sample_ids[v]) {
            CHECK_NOTHROW(ds.label_of(id));
        }
    }
}

TEST_CASE("dataset invariant validation catches duplicates and non-finite features") {
    SynthConfig cfg;
    auto ds = generate_synthetic(cfg);
    ds.modality_sample_ids[0][1] = ds.modality_sample_ids[0][0];
    CHECK_THROWS_AS(ds.finalize(), ValidationError);

    auto ds2 = generate_synthetic(cfg);
    ds2.modality_features[1](0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(ds2.finalize(), ValidationError);
}
