#include <cmath>

#include <doctest.h>

#include "divide/contrastive.hpp"
#include "divide/rng.hpp"

using namespace divide;

namespace {

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t d, double scale = 1.0) {
    Matrix m(n, d);
    for (double& v : m.data()) v = rng.normal(0.0, scale);
    return m;
}

Matrix random_row_stochastic(Rng& rng, std::size_t n) {
    Matrix t(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            t(i, j) = rng.uniform() + 0.05;
            sum += t(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) t(i, j) /= sum;
    }
    return t;
}

double fd_slot(const Matrix& target, Matrix zq, const Matrix& zk, double tau, std::size_t k) {
    const double h = 1e-5;
    const double saved = zq.data()[k];
    zq.data()[k] = saved + h;
    const double up = soft_cross_entropy(target, similarity_rows(zq, zk, tau));
    zq.data()[k] = saved - h;
    const double down = soft_cross_entropy(target, similarity_rows(zq, zk, tau));
    return (up - down) / (2 * h);
}

}  // namespace

TEST_SUITE_BEGIN("contrastive");

TEST_CASE("similarity rows match the closed form") {
    const Matrix z{{1, 0}, {0, 1}};
    const SimilarityDistribution d = similarity_rows(z, z, 0.5);
    // cosine logits [[1,0],[0,1]] / 0.5 -> rows softmax([2,0])
    CHECK(d.p(0, 0) == doctest::Approx(0.88079707797788231).epsilon(1e-12));
    CHECK(d.p(0, 1) == doctest::Approx(0.11920292202211769).epsilon(1e-12));
    CHECK(d.p(1, 1) == doctest::Approx(0.88079707797788231).epsilon(1e-12));

    CHECK_THROWS_AS(similarity_rows(Matrix(2, 3, 1.0), Matrix(3, 3, 1.0), 0.5), ShapeError);
    CHECK_THROWS_AS(similarity_rows(z, z, 0.0), InvalidParameterError);
}

TEST_CASE("cross entropy on identical points is ln 2") {
    const Matrix z{{1, 0}, {1, 0}};  // all pairwise cosines 1 -> uniform rows
    const SimilarityDistribution d = similarity_rows(z, z, 0.5);
    CHECK(d.p(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    const double h = soft_cross_entropy(Matrix::identity(2), d);
    CHECK(h == doctest::Approx(0.69314718055994531).epsilon(1e-12));
}

TEST_CASE("cross entropy with the orthonormal identity target") {
    const Matrix z{{1, 0}, {0, 1}};
    const double h = soft_cross_entropy(Matrix::identity(2), similarity_rows(z, z, 0.5));
    // -ln(e^2 / (e^2 + 1)) per anchor
    CHECK(h == doctest::Approx(0.12692801104297250).epsilon(1e-10));
}

TEST_CASE("gradient vanishes when the target equals the distribution") {
    Rng rng(9);
    const Matrix zq = random_matrix(rng, 5, 4);
    const Matrix zk = random_matrix(rng, 5, 4);
    const SimilarityDistribution d = similarity_rows(zq, zk, 0.5);
    const Matrix g = contrastive_grad(d.p, zq, zk, 0.5);
    for (double v : g.data()) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("anchor gradient matches finite differences") {
    Rng rng(21);
    for (int rep = 0; rep < 4; ++rep) {
        const Matrix zq = random_matrix(rng, 4, 3);
        const Matrix zk = random_matrix(rng, 4, 3);
        const Matrix t = random_row_stochastic(rng, 4);
        const Matrix g = contrastive_grad(t, zq, zk, 0.5);
        for (std::size_t k = 0; k < zq.size(); ++k) {
            const double fd = fd_slot(t, zq, zk, 0.5, k);
            CHECK(std::abs(g.data()[k] - fd) <
                  1e-4 * std::max({std::abs(fd), std::abs(g.data()[k]), 1.0}));
        }
    }
}

TEST_CASE("key gradient matches finite differences") {
    Rng rng(22);
    const Matrix zq = random_matrix(rng, 4, 3);
    const Matrix zk = random_matrix(rng, 4, 3);
    const Matrix t = random_row_stochastic(rng, 4);
    const PairGrad g = contrastive_grad_full(t, zq, zk, 0.5);
    CHECK(g.d_anchor.data() == contrastive_grad(t, zq, zk, 0.5).data());
    const double h = 1e-5;
    for (std::size_t k = 0; k < zk.size(); ++k) {
        Matrix probe = zk;
        probe.data()[k] += h;
        const double up = soft_cross_entropy(t, similarity_rows(zq, probe, 0.5));
        probe.data()[k] -= 2 * h;
        const double down = soft_cross_entropy(t, similarity_rows(zq, probe, 0.5));
        const double fd = (up - down) / (2 * h);
        CHECK(std::abs(g.d_key.data()[k] - fd) <
              1e-4 * std::max({std::abs(fd), std::abs(g.d_key.data()[k]), 1.0}));
    }
}

TEST_CASE("loss is invariant to positive row scaling of the embeddings") {
    Rng rng(13);
    const Matrix zq = random_matrix(rng, 5, 4);
    const Matrix zk = random_matrix(rng, 5, 4);
    const Matrix t = random_row_stochastic(rng, 5);
    Matrix scaled = zq;
    for (std::size_t j = 0; j < scaled.cols(); ++j) scaled(2, j) *= 7.5;
    const double a = soft_cross_entropy(t, similarity_rows(zq, zk, 0.5));
    const double b = soft_cross_entropy(t, similarity_rows(scaled, zk, 0.5));
    CHECK(a == doctest::Approx(b).epsilon(1e-12));

    // consequence: the anchor gradient is orthogonal to its own embedding row
    const Matrix g = contrastive_grad(t, zq, zk, 0.5);
    for (std::size_t i = 0; i < zq.rows(); ++i) {
        double dot = 0.0, norm = 0.0;
        for (std::size_t j = 0; j < zq.cols(); ++j) {
            dot += g(i, j) * zq(i, j);
            norm += std::abs(g(i, j));
        }
        CHECK(std::abs(dot) < 1e-10 * std::max(1.0, norm));
    }
}

TEST_CASE("decoupled loss totals and structure") {
    Rng rng(31);
    const std::size_t n = 4, d = 3, V = 2;
    DecoupledLossInput in;
    in.tau = 0.5;
    for (std::size_t v = 0; v < V; ++v) {
        in.zq.push_back(random_matrix(rng, n, d));
        in.zk.push_back(random_matrix(rng, n, d));
        in.intra_targets.push_back(random_row_stochastic(rng, n));
    }
    in.decoded.assign(V, std::vector<Matrix>(V));
    in.inter_targets.assign(V, std::vector<Matrix>(V));
    for (std::size_t v = 0; v < V; ++v)
        for (std::size_t u = 0; u < V; ++u) {
            if (u == v) continue;
            in.decoded[v][u] = random_matrix(rng, n, d);
            in.inter_targets[v][u] = random_row_stochastic(rng, n);
        }

    const DecoupledLossResult r = decoupled_loss(in);
    double sum = 0.0;
    for (double x : r.intra_terms) sum += x;
    for (std::size_t v = 0; v < V; ++v)
        for (std::size_t u = 0; u < V; ++u)
            if (u != v) sum += r.inter_terms[v][u];
    CHECK(r.total == doctest::Approx(sum).epsilon(1e-12));

    // each term is an independently checkable cross entropy
    CHECK(r.intra_terms[0] ==
          doctest::Approx(soft_cross_entropy(in.intra_targets[0],
                                             similarity_rows(in.zq[0], in.zk[0], 0.5)))
              .epsilon(1e-12));
    CHECK(r.inter_terms[0][1] ==
          doctest::Approx(soft_cross_entropy(in.inter_targets[0][1],
                                             similarity_rows(in.decoded[0][1], in.zk[1], 0.5)))
              .epsilon(1e-12));

    // intra-only drops every inter term
    DecoupledLossInput intra_only = in;
    intra_only.enable_inter = false;
    const DecoupledLossResult ri = decoupled_loss(intra_only);
    double intra_sum = 0.0;
    for (double x : ri.intra_terms) intra_sum += x;
    CHECK(ri.total == doctest::Approx(intra_sum).epsilon(1e-12));

    // decoder grads flow to the decoded matrices, FD checked
    const double h = 1e-5;
    for (std::size_t k = 0; k < in.decoded[0][1].size(); ++k) {
        DecoupledLossInput probe = in;
        probe.decoded[0][1].data()[k] += h;
        const double up = decoupled_loss(probe).total;
        probe.decoded[0][1].data()[k] -= 2 * h;
        const double down = decoupled_loss(probe).total;
        const double fd = (up - down) / (2 * h);
        const double an = r.d_decoded[0][1].data()[k];
        CHECK(std::abs(an - fd) < 1e-4 * std::max({std::abs(fd), std::abs(an), 1.0}));
    }

    // and to zq, through both intra and (decoder-off) inter paths
    DecoupledLossInput no_dec = in;
    no_dec.use_decoder = false;
    const DecoupledLossResult rn = decoupled_loss(no_dec);
    CHECK(rn.d_decoded.empty());
    for (std::size_t k = 0; k < in.zq[0].size(); ++k) {
        DecoupledLossInput probe = no_dec;
        probe.zq[0].data()[k] += h;
        const double up = decoupled_loss(probe).total;
        probe.zq[0].data()[k] -= 2 * h;
        const double down = decoupled_loss(probe).total;
        const double fd = (up - down) / (2 * h);
        const double an = rn.d_zq[0].data()[k];
        CHECK(std::abs(an - fd) < 1e-4 * std::max({std::abs(fd), std::abs(an), 1.0}));
    }

    // key gradients appear only when requested
    for (const Matrix& m : r.d_zk)
        for (double v : m.data()) CHECK(v == 0.0);
    DecoupledLossInput keys = in;
    keys.grad_to_keys = true;
    const DecoupledLossResult rk = decoupled_loss(keys);
    for (std::size_t k = 0; k < in.zk[0].size(); ++k) {
        DecoupledLossInput probe = keys;
        probe.zk[0].data()[k] += h;
        const double up = decoupled_loss(probe).total;
        probe.zk[0].data()[k] -= 2 * h;
        const double down = decoupled_loss(probe).total;
        const double fd = (up - down) / (2 * h);
        const double an = rk.d_zk[0].data()[k];
        CHECK(std::abs(an - fd) < 1e-4 * std::max({std::abs(fd), std::abs(an), 1.0}));
    }
}

TEST_SUITE_END();
