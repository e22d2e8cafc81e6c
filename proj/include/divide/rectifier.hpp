#pragma once

#include <string>
#include <vector>

#include "divide/matrix.hpp"

namespace divide {

/// Heat-kernel affinity over L2-normalized embeddings; symmetric, unit
/// diagonal, fully connected.
struct AffinityGraph {
    Matrix a;
    double sigma = 0.1;
};

/// Row-normalized affinity: M_ij = A_ij / d_i with d_i = sum_j A_ij.
struct TransitionMatrix {
    Matrix m;
    std::vector<double> degree;
};

enum class RectifyStrategy { random_walk, knn, eps, none };
enum class TargetScheme { self_swap, self, swap, concat };

struct RectifierConfig {
    RectifyStrategy strategy = RectifyStrategy::random_walk;
    unsigned steps = 5;     // random-walk step count t
    double alpha = 0.5;     // identity mix weight
    double sigma = 0.1;     // heat-kernel bandwidth
    std::size_t k = 10;     // knn baseline
    double epsilon = 0.5;   // eps-neighborhood baseline (squared distance)
    TargetScheme scheme = TargetScheme::self_swap;
};

AffinityGraph affinity_graph(const Matrix& z, double sigma);
TransitionMatrix transition_matrix(const AffinityGraph& g);

/// T = alpha * I + (1 - alpha) * M^t.
Matrix random_walk_target(const Matrix& z, double sigma, unsigned t, double alpha);

/// T = alpha * I + (1 - alpha) * U, U uniform over each anchor's k nearest
/// neighbors (cosine, self excluded, ties to the lower index).
Matrix knn_target(const Matrix& z, std::size_t k, double alpha);

/// Neighborhood = points within squared distance epsilon on the unit
/// sphere; an empty neighborhood falls back to the pure identity row.
Matrix eps_target(const Matrix& z, double epsilon, double alpha);

/// T_ij = 1/|P_i| for same-class pairs (self included), else 0.
Matrix oracle_target(const std::vector<int>& labels);

/// (1/n) * sum_i KL(Tgt_i || T_i) with 0 log 0 = 0.
double kl_to_oracle(const Matrix& oracle, const Matrix& target);

/// Diagnostic variant: target entries are floored at `floor` so hard
/// targets (identity, knn) yield a large finite divergence instead of an
/// error. Used by the KL reporting, never by the loss.
double kl_to_oracle_floored(const Matrix& oracle, const Matrix& target, double floor = 1e-10);

/// Per-term target assignment for the decoupled loss.
struct TargetSet {
    std::vector<Matrix> intra;               // per view
    std::vector<std::vector<Matrix>> inter;  // [v][u]
};

/// self_swap (default): intra term of view v gets T from view v's graph,
/// inter term (v->u) gets T from view u's graph. self / swap / concat as
/// named. Strategy none yields identity targets everywhere.
TargetSet build_targets(const std::vector<Matrix>& zk, const RectifierConfig& cfg);

/// CSV export of transition matrices / targets for offline heatmaps.
void write_matrix_csv(const std::string& path, const Matrix& m);

RectifyStrategy parse_strategy(const std::string& s);
TargetScheme parse_scheme(const std::string& s);
std::string to_string(RectifyStrategy s);
std::string to_string(TargetScheme s);

}  // namespace divide
