#include "divide/rectifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace divide {

AffinityGraph affinity_graph(const Matrix& z, double sigma) {
    if (z.rows() < 2) throw DataError("affinity_graph: need at least two embeddings");
    if (!(sigma > 0.0)) throw InvalidParameterError("affinity_graph: sigma must be positive");
    const Matrix zn = l2_normalize_rows(z);
    const Matrix d2 = pairwise_sq_euclidean(zn, zn);
    Matrix a(z.rows(), z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        for (std::size_t j = 0; j < z.rows(); ++j) a(i, j) = std::exp(-d2(i, j) / sigma);
        a(i, i) = 1.0;
    }
    // Symmetrize away rounding differences between d2(i,j) and d2(j,i).
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = i + 1; j < z.rows(); ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = v;
            a(j, i) = v;
        }
    return {std::move(a), sigma};
}

TransitionMatrix transition_matrix(const AffinityGraph& g) {
    const std::size_t n = g.a.rows();
    TransitionMatrix tm;
    tm.m = Matrix(n, n);
    tm.degree.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < n; ++j) d += g.a(i, j);
        if (!(d > 0.0)) throw DataError("transition_matrix: zero degree row");
        tm.degree[i] = d;
        for (std::size_t j = 0; j < n; ++j) tm.m(i, j) = g.a(i, j) / d;
    }
    return tm;
}

namespace {

Matrix mix_identity(Matrix base, double alpha) {
    base *= 1.0 - alpha;
    for (std::size_t i = 0; i < base.rows(); ++i) base(i, i) += alpha;
    return base;
}

}  // namespace

Matrix random_walk_target(const Matrix& z, double sigma, unsigned t, double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw InvalidParameterError("random_walk_target: alpha must be in [0,1]");
    const auto tm = transition_matrix(affinity_graph(z, sigma));
    return mix_identity(matrix_power(tm.m, t), alpha);
}

Matrix knn_target(const Matrix& z, std::size_t k, double alpha) {
    const std::size_t n = z.rows();
    if (k < 1 || k > n - 1) throw InvalidParameterError("knn_target: k must be in [1, n-1]");
    if (alpha < 0.0 || alpha > 1.0) throw InvalidParameterError("knn_target: alpha must be in [0,1]");
    const Matrix zn = l2_normalize_rows(z);
    const Matrix cos = pairwise_cosine(zn, zn);
    Matrix t(n, n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::iota(order.begin(), order.end(), 0);
        // Descending similarity, ties to the lower index; self excluded.
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return cos(i, a) > cos(i, b);
        });
        std::size_t taken = 0;
        for (std::size_t j : order) {
            if (j == i) continue;
            t(i, j) = (1.0 - alpha) / static_cast<double>(k);
            if (++taken == k) break;
        }
        t(i, i) += alpha;
    }
    return t;
}

Matrix eps_target(const Matrix& z, double epsilon, double alpha) {
    if (epsilon < 0.0) throw InvalidParameterError("eps_target: epsilon must be nonnegative");
    if (alpha < 0.0 || alpha > 1.0) throw InvalidParameterError("eps_target: alpha must be in [0,1]");
    const std::size_t n = z.rows();
    const Matrix zn = l2_normalize_rows(z);
    const Matrix d2 = pairwise_sq_euclidean(zn, zn);
    Matrix t(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t count = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && d2(i, j) <= epsilon) ++count;
        if (count == 0) {
            t(i, i) = 1.0;  // empty neighborhood: identity fallback
            continue;
        }
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && d2(i, j) <= epsilon) t(i, j) = (1.0 - alpha) / static_cast<double>(count);
        t(i, i) = alpha;
    }
    return t;
}

Matrix oracle_target(const std::vector<int>& labels) {
    const std::size_t n = labels.size();
    Matrix t(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t same = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (labels[j] == labels[i]) ++same;
        for (std::size_t j = 0; j < n; ++j)
            if (labels[j] == labels[i]) t(i, j) = 1.0 / static_cast<double>(same);
    }
    return t;
}

double kl_to_oracle(const Matrix& oracle, const Matrix& target) {
    if (!oracle.same_shape(target)) throw ShapeError("kl_to_oracle: shape mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < oracle.rows(); ++i) {
        for (std::size_t j = 0; j < oracle.cols(); ++j) {
            const double p = oracle(i, j);
            if (p == 0.0) continue;
            const double q = target(i, j);
            if (q <= 0.0) throw NumericError("kl_to_oracle: target lacks support where oracle has mass");
            total += p * std::log(p / q);
        }
    }
    return total / static_cast<double>(oracle.rows());
}

double kl_to_oracle_floored(const Matrix& oracle, const Matrix& target, double floor) {
    if (!oracle.same_shape(target)) throw ShapeError("kl_to_oracle: shape mismatch");
    if (!(floor > 0.0)) throw InvalidParameterError("kl_to_oracle_floored: floor must be positive");
    double total = 0.0;
    for (std::size_t i = 0; i < oracle.rows(); ++i) {
        for (std::size_t j = 0; j < oracle.cols(); ++j) {
            const double p = oracle(i, j);
            if (p == 0.0) continue;
            total += p * std::log(p / std::max(target(i, j), floor));
        }
    }
    return total / static_cast<double>(oracle.rows());
}

TargetSet build_targets(const std::vector<Matrix>& zk, const RectifierConfig& cfg) {
    const std::size_t views = zk.size();
    if (views == 0) throw InvalidParameterError("build_targets: no views");
    const std::size_t n = zk[0].rows();
    for (const auto& z : zk)
        if (z.rows() != n) throw ShapeError("build_targets: batch sizes differ across views");

    auto make = [&cfg](const Matrix& z) -> Matrix {
        switch (cfg.strategy) {
            case RectifyStrategy::random_walk:
                return random_walk_target(z, cfg.sigma, cfg.steps, cfg.alpha);
            case RectifyStrategy::knn:
                return knn_target(z, cfg.k, cfg.alpha);
            case RectifyStrategy::eps:
                return eps_target(z, cfg.epsilon, cfg.alpha);
            case RectifyStrategy::none:
                return Matrix::identity(z.rows());
        }
        throw InvalidParameterError("build_targets: unknown strategy");
    };

    TargetSet out;
    out.intra.resize(views);
    out.inter.assign(views, std::vector<Matrix>(views));

    if (cfg.strategy == RectifyStrategy::none) {
        const Matrix id = Matrix::identity(n);
        for (std::size_t v = 0; v < views; ++v) {
            out.intra[v] = id;
            for (std::size_t u = 0; u < views; ++u)
                if (u != v) out.inter[v][u] = id;
        }
        return out;
    }

    if (cfg.scheme == TargetScheme::concat) {
        Matrix joined = zk[0];
        for (std::size_t v = 1; v < views; ++v) joined = hconcat(joined, zk[v]);
        const Matrix t = make(joined);
        for (std::size_t v = 0; v < views; ++v) {
            out.intra[v] = t;
            for (std::size_t u = 0; u < views; ++u)
                if (u != v) out.inter[v][u] = t;
        }
        return out;
    }

    std::vector<Matrix> per_view(views);
    for (std::size_t v = 0; v < views; ++v) per_view[v] = make(zk[v]);

    for (std::size_t v = 0; v < views; ++v) {
        // Intra term of view v: its own graph for self and self_swap, the
        // other view's graph under swap (cyclic next view when V > 2).
        out.intra[v] = (cfg.scheme == TargetScheme::swap) ? per_view[(v + 1) % views] : per_view[v];
        for (std::size_t u = 0; u < views; ++u) {
            if (u == v) continue;
            // Inter term (v->u): the predicted view's graph under self_swap
            // and swap, the anchor view's graph under self.
            out.inter[v][u] = (cfg.scheme == TargetScheme::self) ? per_view[v] : per_view[u];
        }
    }
    return out;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
    std::ofstream os(path);
    if (!os) throw DataError("write_matrix_csv: cannot open " + path);
    char buf[32];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            os << buf << (j + 1 < m.cols() ? "," : "");
        }
        os << "\n";
    }
}

RectifyStrategy parse_strategy(const std::string& s) {
    if (s == "random_walk" || s == "rw") return RectifyStrategy::random_walk;
    if (s == "knn") return RectifyStrategy::knn;
    if (s == "eps") return RectifyStrategy::eps;
    if (s == "none") return RectifyStrategy::none;
    throw ConfigError("unknown rectifier strategy: " + s);
}

TargetScheme parse_scheme(const std::string& s) {
    if (s == "self_swap") return TargetScheme::self_swap;
    if (s == "self") return TargetScheme::self;
    if (s == "swap") return TargetScheme::swap;
    if (s == "concat") return TargetScheme::concat;
    throw ConfigError("unknown target strategy: " + s);
}

std::string to_string(RectifyStrategy s) {
    switch (s) {
        case RectifyStrategy::random_walk: return "random_walk";
        case RectifyStrategy::knn: return "knn";
        case RectifyStrategy::eps: return "eps";
        case RectifyStrategy::none: return "none";
    }
    return "?";
}

std::string to_string(TargetScheme s) {
    switch (s) {
        case TargetScheme::self_swap: return "self_swap";
        case TargetScheme::self: return "self";
        case TargetScheme::swap: return "swap";
        case TargetScheme::concat: return "concat";
    }
    return "?";
}

}  // namespace divide
