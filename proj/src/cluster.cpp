#include "divide/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "divide/rng.hpp"

namespace divide {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Hungarian algorithm (potentials form) minimizing total cost over a
/// square matrix. Returns the column matched to each row.
std::vector<int> hungarian_min(const Matrix& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> match(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] != 0) match[p[j] - 1] = j - 1;
    return match;
}

Matrix contingency(const std::vector<int>& pred, const std::vector<int>& truth, std::size_t& cp,
                   std::size_t& ct) {
    if (pred.size() != truth.size()) throw ShapeError("label sequences have different lengths");
    if (pred.empty()) throw InvalidParameterError("empty label sequences");
    int mp = 0, mt = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || truth[i] < 0) throw InvalidParameterError("negative label");
        mp = std::max(mp, pred[i]);
        mt = std::max(mt, truth[i]);
    }
    cp = static_cast<std::size_t>(mp) + 1;
    ct = static_cast<std::size_t>(mt) + 1;
    Matrix c(cp, ct);
    for (std::size_t i = 0; i < pred.size(); ++i)
        c(static_cast<std::size_t>(pred[i]), static_cast<std::size_t>(truth[i])) += 1.0;
    return c;
}

double entropy(const std::vector<double>& counts, double n) {
    double h = 0.0;
    for (double c : counts) {
        if (c <= 0.0) continue;
        const double p = c / n;
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

std::vector<int> max_assignment(const Matrix& score) {
    const std::size_t dim = std::max(score.rows(), score.cols());
    double mx = 0.0;
    for (double v : score.data()) mx = std::max(mx, v);
    Matrix cost(dim, dim, 0.0);
    for (std::size_t i = 0; i < score.rows(); ++i)
        for (std::size_t j = 0; j < score.cols(); ++j) cost(i, j) = mx - score(i, j);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            if (i >= score.rows() || j >= score.cols()) cost(i, j) = mx;
    auto match = hungarian_min(cost);
    match.resize(score.rows());
    return match;
}

double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    std::size_t cp = 0, ct = 0;
    const Matrix c = contingency(pred, truth, cp, ct);
    const auto match = max_assignment(c);
    double agree = 0.0;
    for (std::size_t i = 0; i < cp; ++i)
        if (match[i] >= 0 && static_cast<std::size_t>(match[i]) < ct)
            agree += c(i, static_cast<std::size_t>(match[i]));
    return agree / static_cast<double>(pred.size());
}

double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
    std::size_t cp = 0, ct = 0;
    const Matrix c = contingency(pred, truth, cp, ct);
    const double n = static_cast<double>(pred.size());
    std::vector<double> a(cp, 0.0), b(ct, 0.0);
    for (std::size_t i = 0; i < cp; ++i)
        for (std::size_t j = 0; j < ct; ++j) {
            a[i] += c(i, j);
            b[j] += c(i, j);
        }
    double mi = 0.0;
    for (std::size_t i = 0; i < cp; ++i)
        for (std::size_t j = 0; j < ct; ++j) {
            const double nij = c(i, j);
            if (nij <= 0.0) continue;
            mi += (nij / n) * std::log(n * nij / (a[i] * b[j]));
        }
    const double ha = entropy(a, n), hb = entropy(b, n);
    if (ha + hb == 0.0) return 1.0;  // both labelings constant: identical partitions
    const double value = mi / (0.5 * (ha + hb));
    return std::clamp(value, 0.0, 1.0);
}

double ari(const std::vector<int>& pred, const std::vector<int>& truth) {
    std::size_t cp = 0, ct = 0;
    const Matrix c = contingency(pred, truth, cp, ct);
    const double n = static_cast<double>(pred.size());
    auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
    std::vector<double> a(cp, 0.0), b(ct, 0.0);
    double index = 0.0;
    for (std::size_t i = 0; i < cp; ++i)
        for (std::size_t j = 0; j < ct; ++j) {
            a[i] += c(i, j);
            b[j] += c(i, j);
            index += comb2(c(i, j));
        }
    double sum_a = 0.0, sum_b = 0.0;
    for (double x : a) sum_a += comb2(x);
    for (double x : b) sum_b += comb2(x);
    // Common-denominator form (both sides scaled by C(n,2)): every quantity
    // stays an exact small integer, so hand-computable ratios come out exact.
    const double numer = comb2(n) * index - sum_a * sum_b;
    const double denom = comb2(n) * 0.5 * (sum_a + sum_b) - sum_a * sum_b;
    if (denom == 0.0) return 1.0;  // degenerate identical partitions
    return numer / denom;
}

ClusterAssignment kmeans(const Matrix& x, std::size_t clusters, std::uint64_t seed,
                         std::size_t max_iters, std::size_t restarts) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (clusters < 1 || clusters > n)
        throw InvalidParameterError("kmeans: cluster count must be in [1, n]");
    if (restarts < 1) throw InvalidParameterError("kmeans: need at least one restart");

    ClusterAssignment best;
    best.inertia = kInf;

    for (std::size_t r = 0; r < restarts; ++r) {
        Rng rng = Rng::derive(seed, r);
        // k-means++ seeding.
        Matrix centroids(clusters, d);
        std::vector<double> dist2(n, kInf);
        const std::size_t first = static_cast<std::size_t>(rng.uniform_index(n));
        std::copy(x.row_ptr(first), x.row_ptr(first) + d, centroids.row_ptr(0));
        for (std::size_t c = 1; c < clusters; ++c) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                const double* xi = x.row_ptr(i);
                const double* mc = centroids.row_ptr(c - 1);
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = xi[j] - mc[j];
                    s += diff * diff;
                }
                dist2[i] = std::min(dist2[i], s);
                total += dist2[i];
            }
            std::size_t pick = 0;
            if (total > 0.0) {
                const double target = rng.uniform() * total;
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += dist2[i];
                    if (acc >= target) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<std::size_t>(rng.uniform_index(n));
            }
            std::copy(x.row_ptr(pick), x.row_ptr(pick) + d, centroids.row_ptr(c));
        }

        std::vector<int> assign(n, -1);
        double inertia = 0.0;
        for (std::size_t iter = 0; iter < max_iters; ++iter) {
            bool changed = false;
            inertia = 0.0;
            std::vector<double> point_dist(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double* xi = x.row_ptr(i);
                double bestd = kInf;
                int bestc = 0;
                for (std::size_t c = 0; c < clusters; ++c) {
                    const double* mc = centroids.row_ptr(c);
                    double s = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double diff = xi[j] - mc[j];
                        s += diff * diff;
                    }
                    if (s < bestd) {
                        bestd = s;
                        bestc = static_cast<int>(c);
                    }
                }
                if (assign[i] != bestc) {
                    assign[i] = bestc;
                    changed = true;
                }
                point_dist[i] = bestd;
                inertia += bestd;
            }

            // Recompute centroids; re-seed any empty cluster from the
            // farthest point.
            Matrix sums(clusters, d);
            std::vector<std::size_t> counts(clusters, 0);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t c = static_cast<std::size_t>(assign[i]);
                const double* xi = x.row_ptr(i);
                double* sc = sums.row_ptr(c);
                for (std::size_t j = 0; j < d; ++j) sc[j] += xi[j];
                ++counts[c];
            }
            for (std::size_t c = 0; c < clusters; ++c) {
                if (counts[c] == 0) {
                    std::size_t far = 0;
                    for (std::size_t i = 1; i < n; ++i)
                        if (point_dist[i] > point_dist[far]) far = i;
                    std::copy(x.row_ptr(far), x.row_ptr(far) + d, centroids.row_ptr(c));
                    point_dist[far] = 0.0;
                    changed = true;
                } else {
                    double* mc = centroids.row_ptr(c);
                    const double* sc = sums.row_ptr(c);
                    for (std::size_t j = 0; j < d; ++j)
                        mc[j] = sc[j] / static_cast<double>(counts[c]);
                }
            }
            if (!changed) break;
        }

        // Final inertia against the converged centroids.
        inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = x.row_ptr(i);
            const double* mc = centroids.row_ptr(static_cast<std::size_t>(assign[i]));
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = xi[j] - mc[j];
                s += diff * diff;
            }
            inertia += s;
        }
        if (inertia < best.inertia) {
            best.labels = assign;
            best.clusters = clusters;
            best.inertia = inertia;
        }
    }
    return best;
}

std::string ClusteringReport::to_json() const {
    nlohmann::json j;
    j["acc"] = acc;
    j["nmi"] = nmi;
    j["ari"] = ari;
    if (kl >= 0.0) j["kl"] = kl;
    j["clusters"] = clusters;
    j["seed"] = seed;
    j["eta"] = eta;
    j["setting"] = setting;
    return j.dump(2);
}

void ClusteringReport::append_csv(const std::string& path) const {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream os(path, std::ios::app);
    if (!os) throw DataError("cannot open " + path + " for append");
    if (fresh) os << "setting,eta,seed,acc,nmi,ari,kl\n";
    os << setting << "," << eta << "," << seed << "," << acc << "," << nmi << "," << ari << ","
       << (kl >= 0.0 ? std::to_string(kl) : "") << "\n";
}

}  // namespace divide
