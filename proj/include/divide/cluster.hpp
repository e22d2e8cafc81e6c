#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divide/matrix.hpp"

namespace divide {

struct ClusterAssignment {
    std::vector<int> labels;  // in [0, C)
    std::size_t clusters = 0;
    double inertia = 0.0;
};

/// k-means++ seeding, Lloyd iterations to an assignment fixpoint (or
/// max_iters), best of `restarts` by inertia with ties to the lowest
/// restart index. Empty clusters are re-seeded from the farthest point.
ClusterAssignment kmeans(const Matrix& x, std::size_t clusters, std::uint64_t seed,
                         std::size_t max_iters = 300, std::size_t restarts = 10);

/// Best one-to-one mapping of predicted to true ids (optimal assignment on
/// the contingency matrix), as a fraction of agreements.
double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

/// Mutual information normalized by the arithmetic mean of the two label
/// entropies. Note other conventions (max/min/sqrt) give different values.
double nmi(const std::vector<int>& pred, const std::vector<int>& truth);

/// Adjusted Rand index on pair counts.
double ari(const std::vector<int>& pred, const std::vector<int>& truth);

struct ClusteringReport {
    double acc = 0.0, nmi = 0.0, ari = 0.0;
    double kl = -1.0;  // optional rectification diagnostic, < 0 = absent
    std::size_t clusters = 0;
    std::uint64_t seed = 0;
    double eta = 0.0;
    std::string setting;

    std::string to_json() const;
    /// Appends one row to a CSV table, writing the header first if the
    /// file is new. Columns: setting, eta, seed, acc, nmi, ari, kl.
    void append_csv(const std::string& path) const;
};

/// Max-sum assignment on a rectangular cost matrix (Hungarian /
/// shortest-augmenting-path); returns per-row column choices.
std::vector<int> max_assignment(const Matrix& score);

}  // namespace divide
