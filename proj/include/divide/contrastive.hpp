#pragma once

#include <vector>

#include "divide/matrix.hpp"

namespace divide {

/// Row-stochastic similarity probabilities, softmax over all n columns
/// (diagonal included) of the temperature-scaled cosine logits.
struct SimilarityDistribution {
    Matrix p;
    double tau = 0.5;
};

SimilarityDistribution similarity_rows(const Matrix& zq, const Matrix& zk, double tau);

/// (1/n) * sum_ij -T_ij log P_ij, averaged over anchors. Terms with
/// T_ij = 0 contribute nothing.
double soft_cross_entropy(const Matrix& target, const SimilarityDistribution& dist);

/// Gradient of soft_cross_entropy(similarity_rows(zq, zk)) with respect to
/// the anchor embeddings only; the key branch is treated as constant.
Matrix contrastive_grad(const Matrix& target, const Matrix& zq, const Matrix& zk, double tau);

/// Both-sided gradients, used when the stop-gradient on the key branch is
/// disabled (shared-encoder ablation).
struct PairGrad {
    Matrix d_anchor;
    Matrix d_key;
};
PairGrad contrastive_grad_full(const Matrix& target, const Matrix& zq, const Matrix& zk, double tau);

struct DecoupledLossInput {
    std::vector<Matrix> zq;  // per view, online branch
    std::vector<Matrix> zk;  // per view, target branch (constant unless grad_to_keys)
    // decoded[v][u] = g^(v->u)(zq[v]); ignored when use_decoder is false,
    // in which case the inter term pairs zq[v] against zk[u] directly.
    std::vector<std::vector<Matrix>> decoded;
    std::vector<Matrix> intra_targets;               // per view
    std::vector<std::vector<Matrix>> inter_targets;  // [v][u], u != v
    double tau = 0.5;
    bool enable_intra = true;
    bool enable_inter = true;
    bool use_decoder = true;
    bool grad_to_keys = false;
};

struct DecoupledLossResult {
    double total = 0.0;
    std::vector<double> intra_terms;               // per view
    std::vector<std::vector<double>> inter_terms;  // [v][u]
    std::vector<Matrix> d_zq;                      // per view
    std::vector<std::vector<Matrix>> d_decoded;    // [v][u]; empty when decoder off
    std::vector<Matrix> d_zk;                      // nonzero only when grad_to_keys
};

/// Total objective: sum_v H(T_v, rho(zq_v, zk_v)) + sum_{v != u}
/// H(T_u, rho(p_{v->u}, zk_u)), with gradients for every branch that is
/// allowed to learn.
DecoupledLossResult decoupled_loss(const DecoupledLossInput& in);

}  // namespace divide
