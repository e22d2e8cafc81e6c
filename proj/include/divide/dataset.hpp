#pragma once

#include <optional>
#include <string>
#include <vector>

#include "divide/matrix.hpp"
#include "divide/rng.hpp"

namespace divide {

/// Per-view feature matrices with optional labels and a per-sample
/// per-view presence mask. Masked entries are never read as features.
struct MultiViewDataset {
    std::vector<Matrix> views;          // each n x d_v
    std::vector<int> labels;            // empty when unlabeled
    std::vector<std::vector<bool>> present;  // n x V; empty = all present

    std::size_t samples() const { return views.empty() ? 0 : views[0].rows(); }
    std::size_t view_count() const { return views.size(); }
    bool has_labels() const { return !labels.empty(); }
    bool is_present(std::size_t i, std::size_t v) const {
        return present.empty() ? true : present[i][v];
    }
    bool all_present() const;
    std::size_t complete_count() const;  // samples with every view observed
    int num_classes() const;

    void validate() const;
};

struct SyntheticSpec {
    std::size_t n = 1000;
    std::size_t clusters = 4;
    std::size_t latent_dim = 4;
    std::vector<std::size_t> view_dims = {10, 12};
    std::vector<double> view_noise = {1.0, 1.0};
    double latent_noise = 1.0;
    double separation = 4.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Cluster means on a scaled simplex in latent space; each view is a fixed
/// seeded linear map of the latent point plus view-specific Gaussian noise.
MultiViewDataset generate_synthetic(const SyntheticSpec& spec);

/// Removes exactly one uniformly chosen view from round(eta * n) samples
/// selected without replacement. Input must be complete.
MultiViewDataset simulate_missing(const MultiViewDataset& ds, double eta, std::uint64_t seed);

/// Directory format: manifest.json naming per-view feature files (CSV or
/// .bin by extension), optional labels.csv and mask.csv.
MultiViewDataset load_dataset(const std::string& dir);
void save_dataset(const std::string& dir, const MultiViewDataset& ds);

SyntheticSpec load_synthetic_spec(const std::string& path);

// Matrix file IO shared with the CLI exporters.
Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv_file(const std::string& path, const Matrix& m);
Matrix read_matrix_bin(const std::string& path);
void write_matrix_bin(const std::string& path, const Matrix& m);
Matrix read_matrix_file(const std::string& path);   // dispatch by extension
void write_matrix_file(const std::string& path, const Matrix& m);

}  // namespace divide
