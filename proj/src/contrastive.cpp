#include "divide/contrastive.hpp"

#include <cmath>
#include <string>

namespace divide {
namespace {

std::vector<double> row_norms(const Matrix& m) {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        const double* ri = m.row_ptr(i);
        for (std::size_t j = 0; j < m.cols(); ++j) s += ri[j] * ri[j];
        if (s <= 0.0) throw DataError("contrastive: zero-norm embedding row");
        out[i] = std::sqrt(s);
    }
    return out;
}

/// dL/dS for L = (1/n) sum_ij -T_ij log softmax_j(S_ij / tau):
/// G_ij = (P_ij * rowsum(T)_i - T_ij) / (n * tau).
Matrix logit_grad(const Matrix& target, const Matrix& p, double tau) {
    const std::size_t n = p.rows();
    Matrix g(n, p.cols());
    for (std::size_t i = 0; i < n; ++i) {
        double row_mass = 0.0;
        for (std::size_t j = 0; j < p.cols(); ++j) row_mass += target(i, j);
        for (std::size_t j = 0; j < p.cols(); ++j)
            g(i, j) = (p(i, j) * row_mass - target(i, j)) / (static_cast<double>(n) * tau);
    }
    return g;
}

PairGrad cosine_chain(const Matrix& g, const Matrix& cos, const Matrix& zq, const Matrix& zk,
                      bool want_key) {
    const auto na = row_norms(zq);
    const auto nb = row_norms(zk);
    const std::size_t n = zq.rows();
    const std::size_t m = zk.rows();
    Matrix w(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) w(i, j) = g(i, j) / (na[i] * nb[j]);
    PairGrad out;
    out.d_anchor = matmul(w, zk);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += g(i, j) * cos(i, j);
        s /= na[i] * na[i];
        double* di = out.d_anchor.row_ptr(i);
        const double* qi = zq.row_ptr(i);
        for (std::size_t k = 0; k < zq.cols(); ++k) di[k] -= s * qi[k];
    }
    if (want_key) {
        out.d_key = matmul(transpose(w), zq);
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += g(i, j) * cos(i, j);
            s /= nb[j] * nb[j];
            double* dj = out.d_key.row_ptr(j);
            const double* kj = zk.row_ptr(j);
            for (std::size_t k = 0; k < zk.cols(); ++k) dj[k] -= s * kj[k];
        }
    }
    return out;
}

}  // namespace

SimilarityDistribution similarity_rows(const Matrix& zq, const Matrix& zk, double tau) {
    if (!zq.same_shape(zk)) throw ShapeError("similarity_rows: embedding shapes differ");
    return {row_softmax(pairwise_cosine(zq, zk), tau), tau};
}

double soft_cross_entropy(const Matrix& target, const SimilarityDistribution& dist) {
    const Matrix& p = dist.p;
    if (!target.same_shape(p)) throw ShapeError("soft_cross_entropy: target/probability shape mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
            const double t = target(i, j);
            if (t == 0.0) continue;
            const double q = p(i, j);
            if (q <= 0.0) throw NumericError("soft_cross_entropy: zero probability on target support");
            total -= t * std::log(q);
        }
    }
    return total / static_cast<double>(p.rows());
}

Matrix contrastive_grad(const Matrix& target, const Matrix& zq, const Matrix& zk, double tau) {
    const Matrix cos = pairwise_cosine(zq, zk);
    const Matrix p = row_softmax(cos, tau);
    const Matrix g = logit_grad(target, p, tau);
    return cosine_chain(g, cos, zq, zk, /*want_key=*/false).d_anchor;
}

PairGrad contrastive_grad_full(const Matrix& target, const Matrix& zq, const Matrix& zk, double tau) {
    const Matrix cos = pairwise_cosine(zq, zk);
    const Matrix p = row_softmax(cos, tau);
    const Matrix g = logit_grad(target, p, tau);
    return cosine_chain(g, cos, zq, zk, /*want_key=*/true);
}

DecoupledLossResult decoupled_loss(const DecoupledLossInput& in) {
    const std::size_t views = in.zq.size();
    if (views < 2) throw InvalidParameterError("decoupled_loss: need at least two views");
    if (in.zk.size() != views) throw ShapeError("decoupled_loss: zq/zk view counts differ");
    const std::size_t n = in.zq[0].rows();
    for (std::size_t v = 0; v < views; ++v)
        if (in.zq[v].rows() != n || in.zk[v].rows() != n)
            throw ShapeError("decoupled_loss: batch sizes differ across views");

    DecoupledLossResult out;
    out.intra_terms.assign(views, 0.0);
    out.inter_terms.assign(views, std::vector<double>(views, 0.0));
    out.d_zq.reserve(views);
    out.d_zk.reserve(views);
    for (std::size_t v = 0; v < views; ++v) {
        out.d_zq.emplace_back(in.zq[v].rows(), in.zq[v].cols());
        out.d_zk.emplace_back(in.zk[v].rows(), in.zk[v].cols());
    }
    if (in.use_decoder && in.enable_inter)
        out.d_decoded.assign(views, std::vector<Matrix>(views));

    if (in.enable_intra) {
        for (std::size_t v = 0; v < views; ++v) {
            const Matrix& t = in.intra_targets.at(v);
            const auto dist = similarity_rows(in.zq[v], in.zk[v], in.tau);
            out.intra_terms[v] = soft_cross_entropy(t, dist);
            out.total += out.intra_terms[v];
            if (in.grad_to_keys) {
                PairGrad pg = contrastive_grad_full(t, in.zq[v], in.zk[v], in.tau);
                out.d_zq[v] += pg.d_anchor;
                out.d_zk[v] += pg.d_key;
            } else {
                out.d_zq[v] += contrastive_grad(t, in.zq[v], in.zk[v], in.tau);
            }
        }
    }
    if (in.enable_inter) {
        for (std::size_t v = 0; v < views; ++v) {
            for (std::size_t u = 0; u < views; ++u) {
                if (u == v) continue;
                const Matrix& anchor = in.use_decoder ? in.decoded.at(v).at(u) : in.zq[v];
                const Matrix& t = in.inter_targets.at(v).at(u);
                const auto dist = similarity_rows(anchor, in.zk[u], in.tau);
                out.inter_terms[v][u] = soft_cross_entropy(t, dist);
                out.total += out.inter_terms[v][u];
                Matrix d_anchor;
                if (in.grad_to_keys) {
                    PairGrad pg = contrastive_grad_full(t, anchor, in.zk[u], in.tau);
                    d_anchor = std::move(pg.d_anchor);
                    out.d_zk[u] += pg.d_key;
                } else {
                    d_anchor = contrastive_grad(t, anchor, in.zk[u], in.tau);
                }
                if (in.use_decoder)
                    out.d_decoded[v][u] = std::move(d_anchor);
                else
                    out.d_zq[v] += d_anchor;
            }
        }
    }
    return out;
}

}  // namespace divide
