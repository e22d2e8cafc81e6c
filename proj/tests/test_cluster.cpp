#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <vector>

#include <doctest.h>

#include "divide/cluster.hpp"
#include "divide/rng.hpp"

using namespace divide;

namespace {

// Brute-force accuracy: try every one-to-one mapping of predicted ids onto
// true ids and keep the best agreement fraction.
double brute_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    std::vector<int> pids = pred, tids = truth;
    std::sort(pids.begin(), pids.end());
    pids.erase(std::unique(pids.begin(), pids.end()), pids.end());
    std::sort(tids.begin(), tids.end());
    tids.erase(std::unique(tids.begin(), tids.end()), tids.end());
    // pad so the permutation covers the larger id set
    while (tids.size() < pids.size()) tids.push_back(-1 - static_cast<int>(tids.size()));
    std::sort(tids.begin(), tids.end());
    double best = 0.0;
    do {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const auto slot = std::find(pids.begin(), pids.end(), pred[i]) - pids.begin();
            if (tids[static_cast<std::size_t>(slot)] == truth[i]) ++hits;
        }
        best = std::max(best, static_cast<double>(hits) / static_cast<double>(pred.size()));
    } while (std::next_permutation(tids.begin(), tids.end()));
    return best;
}

std::map<std::pair<int, int>, std::size_t> contingency(const std::vector<int>& a,
                                                       const std::vector<int>& b) {
    std::map<std::pair<int, int>, std::size_t> c;
    for (std::size_t i = 0; i < a.size(); ++i) ++c[{a[i], b[i]}];
    return c;
}

double brute_nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
    const double n = static_cast<double>(pred.size());
    std::map<int, std::size_t> cp, ct;
    for (int x : pred) ++cp[x];
    for (int x : truth) ++ct[x];
    double mi = 0.0;
    for (const auto& [key, nij] : contingency(pred, truth)) {
        const double pij = static_cast<double>(nij) / n;
        const double pi = static_cast<double>(cp[key.first]) / n;
        const double pj = static_cast<double>(ct[key.second]) / n;
        mi += pij * std::log(pij / (pi * pj));
    }
    double hp = 0.0, ht = 0.0;
    for (const auto& [id, c] : cp) {
        const double p = static_cast<double>(c) / n;
        hp -= p * std::log(p);
    }
    for (const auto& [id, c] : ct) {
        const double p = static_cast<double>(c) / n;
        ht -= p * std::log(p);
    }
    if (hp + ht == 0.0) return 1.0;  // both constant: identical partitions
    return 2.0 * mi / (hp + ht);
}

double brute_ari(const std::vector<int>& pred, const std::vector<int>& truth) {
    auto choose2 = [](std::size_t k) { return static_cast<double>(k) * (k - 1.0) / 2.0; };
    std::map<int, std::size_t> cp, ct;
    for (int x : pred) ++cp[x];
    for (int x : truth) ++ct[x];
    double index = 0.0;
    for (const auto& [key, nij] : contingency(pred, truth)) index += choose2(nij);
    double sum_a = 0.0, sum_b = 0.0;
    for (const auto& [id, c] : cp) sum_a += choose2(c);
    for (const auto& [id, c] : ct) sum_b += choose2(c);
    const double total = choose2(pred.size());
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

}  // namespace

TEST_SUITE_BEGIN("cluster");

TEST_CASE("metric hand values") {
    CHECK(clustering_accuracy({0, 0, 1, 2}, {1, 1, 0, 0}) == 0.75);
    CHECK(nmi({0, 1, 0, 1}, {0, 0, 1, 1}) == 0.0);
    CHECK(ari({0, 1, 0, 1}, {0, 0, 1, 1}) == -0.5);

    CHECK(clustering_accuracy({2, 2, 0, 1}, {0, 0, 1, 2}) == 1.0);  // relabeling
    CHECK(nmi({0, 1, 2, 0, 1, 2}, {0, 1, 2, 0, 1, 2}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ari({3, 3, 5, 5}, {0, 0, 1, 1}) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(clustering_accuracy({0, 1}, {0}), ShapeError);
    CHECK_THROWS_AS(nmi({0, 1}, {0}), ShapeError);
    CHECK_THROWS_AS(ari({0, 1}, {0}), ShapeError);
}

TEST_CASE("metrics agree with brute-force references on every small instance") {
    // exhaustive n=5, C<=3 plus random n=8 instances
    std::vector<int> pred(5), truth(5);
    for (int code = 0; code < 243; ++code) {
        int c = code;
        for (int i = 0; i < 5; ++i) {
            pred[i] = c % 3;
            c /= 3;
        }
        Rng rng(static_cast<std::uint64_t>(code) + 99);
        for (int i = 0; i < 5; ++i) truth[i] = static_cast<int>(rng.uniform_index(3));
        CHECK(clustering_accuracy(pred, truth) ==
              doctest::Approx(brute_accuracy(pred, truth)).epsilon(1e-10));
        CHECK(nmi(pred, truth) == doctest::Approx(brute_nmi(pred, truth)).epsilon(1e-10));
        CHECK(ari(pred, truth) == doctest::Approx(brute_ari(pred, truth)).epsilon(1e-10));
    }
    Rng rng(2024);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<int> p(8), t(8);
        for (int i = 0; i < 8; ++i) {
            p[i] = static_cast<int>(rng.uniform_index(3));
            t[i] = static_cast<int>(rng.uniform_index(3));
        }
        CHECK(clustering_accuracy(p, t) == doctest::Approx(brute_accuracy(p, t)).epsilon(1e-10));
        CHECK(nmi(p, t) == doctest::Approx(brute_nmi(p, t)).epsilon(1e-10));
        CHECK(ari(p, t) == doctest::Approx(brute_ari(p, t)).epsilon(1e-10));
    }
}

TEST_CASE("metrics are invariant to relabeling") {
    const std::vector<int> pred{0, 1, 2, 1, 0, 2, 2, 1};
    const std::vector<int> truth{1, 1, 0, 0, 2, 2, 0, 1};
    std::vector<int> relabeled(pred.size());
    const int map[3] = {2, 0, 1};
    for (std::size_t i = 0; i < pred.size(); ++i) relabeled[i] = map[pred[i]];
    CHECK(clustering_accuracy(pred, truth) == clustering_accuracy(relabeled, truth));
    CHECK(nmi(pred, truth) == doctest::Approx(nmi(relabeled, truth)).epsilon(1e-12));
    CHECK(ari(pred, truth) == doctest::Approx(ari(relabeled, truth)).epsilon(1e-12));
}

TEST_CASE("max assignment picks the best one-to-one matching") {
    const Matrix score{{10, 1, 1}, {1, 1, 10}, {1, 10, 1}};
    const std::vector<int> pick = max_assignment(score);
    CHECK(pick[0] == 0);
    CHECK(pick[1] == 2);
    CHECK(pick[2] == 1);
}

TEST_CASE("kmeans degenerate and separable cases") {
    const Matrix one{{1, 1}, {2, 2}, {3, 3}};
    const ClusterAssignment c1 = kmeans(one, 1, 0);
    CHECK(c1.labels == std::vector<int>{0, 0, 0});

    const Matrix distinct{{0, 0}, {5, 5}, {-5, 5}};
    const ClusterAssignment cn = kmeans(distinct, 3, 0);
    CHECK(cn.inertia == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<int> sorted = cn.labels;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2});

    CHECK_THROWS_AS(kmeans(one, 4, 0), InvalidParameterError);

    // two tight clusters at +-10: perfect split on every seed
    Rng rng(77);
    Matrix x(40, 3);
    std::vector<int> truth(40);
    for (std::size_t i = 0; i < 40; ++i) {
        const double center = (i < 20) ? 10.0 : -10.0;
        truth[i] = (i < 20) ? 0 : 1;
        for (std::size_t j = 0; j < 3; ++j) x(i, j) = center + rng.normal(0.0, 0.1);
    }
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ClusterAssignment c = kmeans(x, 2, seed);
        CHECK(clustering_accuracy(c.labels, truth) == 1.0);
    }

    // determinism under a fixed seed
    const ClusterAssignment a = kmeans(x, 2, 3);
    const ClusterAssignment b = kmeans(x, 2, 3);
    CHECK(a.labels == b.labels);
    CHECK(a.inertia == b.inertia);
}

TEST_CASE("clustering report json and csv") {
    ClusteringReport r;
    r.acc = 0.9;
    r.nmi = 0.8;
    r.ari = 0.7;
    r.clusters = 4;
    r.seed = 11;
    r.setting = "unit";
    const std::string js = r.to_json();
    CHECK(js.find("\"acc\"") != std::string::npos);
    CHECK(js.find("0.9") != std::string::npos);

    const std::string path = "report_test.csv";
    std::remove(path.c_str());
    r.append_csv(path);
    r.append_csv(path);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "setting,eta,seed,acc,nmi,ari,kl");
    int rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
    std::remove(path.c_str());
}

TEST_SUITE_END();
