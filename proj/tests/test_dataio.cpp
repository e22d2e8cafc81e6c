#include <cstdio>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "divide/cluster.hpp"
#include "divide/dataset.hpp"

using namespace divide;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE_BEGIN("dataio");

TEST_CASE("synthetic generation is deterministic and balanced") {
    SyntheticSpec spec;
    spec.n = 120;
    spec.clusters = 4;
    spec.seed = 9;
    const MultiViewDataset a = generate_synthetic(spec);
    const MultiViewDataset b = generate_synthetic(spec);
    REQUIRE(a.view_count() == 2);
    CHECK(a.samples() == 120);
    CHECK(a.views[0].cols() == 10);
    CHECK(a.views[1].cols() == 12);
    CHECK(a.views[0].data() == b.views[0].data());
    CHECK(a.labels == b.labels);
    CHECK(a.all_present());
    CHECK(a.num_classes() == 4);

    std::vector<int> counts(4, 0);
    for (int l : a.labels) ++counts[l];
    for (int c : counts) CHECK(c == 30);

    spec.seed = 10;
    const MultiViewDataset c = generate_synthetic(spec);
    CHECK(a.views[0].data() != c.views[0].data());

    SyntheticSpec bad = spec;
    bad.latent_dim = 2;  // fewer latent axes than clusters
    CHECK_THROWS_AS(generate_synthetic(bad), InvalidParameterError);
}

TEST_CASE("well separated synthetic data clusters perfectly on raw features") {
    SyntheticSpec spec;
    spec.n = 200;
    spec.clusters = 4;
    spec.separation = 10.0;
    spec.latent_noise = 0.1;
    spec.view_noise = {0.05, 0.05};
    spec.seed = 1;
    const MultiViewDataset ds = generate_synthetic(spec);
    const Matrix joint = hconcat(ds.views[0], ds.views[1]);
    const ClusterAssignment c = kmeans(joint, 4, 0);
    CHECK(clustering_accuracy(c.labels, ds.labels) == 1.0);
}

TEST_CASE("simulate_missing removes exactly one view per chosen sample") {
    SyntheticSpec spec;
    spec.n = 10;
    spec.seed = 3;
    const MultiViewDataset ds = generate_synthetic(spec);
    const MultiViewDataset masked = simulate_missing(ds, 0.5, 7);
    REQUIRE(masked.present.size() == 10);
    std::size_t present_entries = 0, incomplete = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        std::size_t row = 0;
        for (std::size_t v = 0; v < 2; ++v)
            if (masked.is_present(i, v)) ++row;
        CHECK(row >= 1);
        if (row == 1) ++incomplete;
        present_entries += row;
    }
    CHECK(incomplete == 5);  // round(0.5 * 10) samples lose exactly one view
    CHECK(present_entries == 15);
    CHECK(masked.complete_count() == 5);
    CHECK(masked.labels == ds.labels);

    // hidden features are zeroed, observed features untouched
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t v = 0; v < 2; ++v)
            for (std::size_t j = 0; j < masked.views[v].cols(); ++j) {
                if (masked.is_present(i, v))
                    CHECK(masked.views[v](i, j) == ds.views[v](i, j));
                else
                    CHECK(masked.views[v](i, j) == 0.0);
            }

    const MultiViewDataset untouched = simulate_missing(ds, 0.0, 7);
    CHECK(untouched.all_present());
    CHECK_THROWS_AS(simulate_missing(ds, 1.0, 7), InvalidParameterError);
    CHECK_THROWS_AS(simulate_missing(masked, 0.5, 7), DataError);
}

TEST_CASE("dataset save and load round trip") {
    TempDir dir("divide_dataio_roundtrip");
    SyntheticSpec spec;
    spec.n = 24;
    spec.seed = 5;
    const MultiViewDataset ds = simulate_missing(generate_synthetic(spec), 0.25, 1);
    save_dataset(dir.path.string(), ds);
    const MultiViewDataset back = load_dataset(dir.path.string());
    REQUIRE(back.view_count() == ds.view_count());
    for (std::size_t v = 0; v < ds.view_count(); ++v)
        CHECK(back.views[v].data() == ds.views[v].data());
    CHECK(back.labels == ds.labels);
    for (std::size_t i = 0; i < ds.samples(); ++i)
        for (std::size_t v = 0; v < ds.view_count(); ++v)
            CHECK(back.is_present(i, v) == ds.is_present(i, v));

    CHECK_THROWS_AS(load_dataset((dir.path / "nope").string()), DataError);
}

TEST_CASE("matrix file round trips in both formats") {
    TempDir dir("divide_dataio_matrix");
    Matrix m{{1.5, -2.25, 3.0e-7}, {4.0, 5.0, 6.000000001}};
    const std::string csv = (dir.path / "m.csv").string();
    const std::string bin = (dir.path / "m.bin").string();
    write_matrix_file(csv, m);
    write_matrix_file(bin, m);
    CHECK(read_matrix_file(csv).data() == m.data());
    CHECK(read_matrix_file(bin).data() == m.data());
    CHECK_THROWS_AS(read_matrix_file((dir.path / "missing.csv").string()), DataError);

    // ragged csv is a data error
    {
        std::ofstream os(dir.path / "ragged.csv");
        os << "1,2,3\n4,5\n";
    }
    CHECK_THROWS_AS(read_matrix_csv((dir.path / "ragged.csv").string()), DataError);
}

TEST_CASE("synthetic spec file parsing") {
    TempDir dir("divide_dataio_spec");
    const fs::path p = dir.path / "spec.txt";
    {
        std::ofstream os(p);
        os << "# comment line\n"
           << "n = 48\n"
           << "clusters = 3\n"
           << "latent_dim = 5\n"
           << "view_dims = 6,7,8\n"
           << "view_noise = 0.5,0.5,0.5\n"
           << "separation = 6.0\n"
           << "seed = 12\n";
    }
    const SyntheticSpec spec = load_synthetic_spec(p.string());
    CHECK(spec.n == 48);
    CHECK(spec.clusters == 3);
    CHECK(spec.view_dims == std::vector<std::size_t>{6, 7, 8});
    CHECK(spec.view_noise == std::vector<double>{0.5, 0.5, 0.5});
    CHECK(spec.separation == 6.0);
    const MultiViewDataset ds = generate_synthetic(spec);
    CHECK(ds.view_count() == 3);
    CHECK(ds.views[2].cols() == 8);

    {
        std::ofstream os(p);
        os << "frobnicate = 1\n";
    }
    CHECK_THROWS_AS(load_synthetic_spec(p.string()), ConfigError);
    CHECK_THROWS_AS(load_synthetic_spec((dir.path / "none.txt").string()), ConfigError);
}

TEST_SUITE_END();
