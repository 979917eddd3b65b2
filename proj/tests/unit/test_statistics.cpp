#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cla/statistics.hpp"

using namespace cla;

namespace {

/// Mid-ranks by direct counting: rank = (#less) + (#equal + 1) / 2.
std::vector<double> oracle_ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (double x : v) {
            if (x < v[i]) ++less;
            if (x == v[i]) ++equal;
        }
        r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
}

double oracle_pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

/// Two-sided permutation p-value over every assignment of |a| positions to group a.
double oracle_ranksum(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::vector<double> ranks = oracle_ranks(pooled);
    const std::size_t n = pooled.size(), k = a.size();
    double observed = 0;
    for (std::size_t i = 0; i < k; ++i) observed += ranks[i];
    const double expected = static_cast<double>(k) * (static_cast<double>(n) + 1.0) / 2.0;
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<long>(k), true);
    double total = 0, extreme = 0;
    do {
        double w = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (pick[i]) w += ranks[i];
        ++total;
        if (std::abs(w - expected) >= std::abs(observed - expected) - 1e-9) ++extreme;
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return extreme / total;
}

}  // namespace

TEST_CASE("exact rank-sum hand cases") {
    CHECK(std::abs(stats::ranksum_test(std::vector<double>{1, 2}, std::vector<double>{3, 4}) - 1.0 / 3.0) <= 1e-12);
    CHECK(std::abs(stats::ranksum_test(std::vector<double>{5, 6, 7}, std::vector<double>{1, 2, 3}) - 0.1) <= 1e-12);
    CHECK(stats::ranksum_test(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == doctest::Approx(1.0));
}

TEST_CASE("exact rank-sum agrees with an exhaustive permutation oracle, ties included") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> value(0, 6);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t na = 1 + rep % 6, nb = 1 + (rep / 6) % 6;
        std::vector<double> a(na), b(nb);
        for (auto& x : a) x = value(rng);
        for (auto& x : b) x = value(rng) + 1;
        CHECK(std::abs(stats::ranksum_test(a, b) - oracle_ranksum(a, b)) <= 1e-12);
    }
}

TEST_CASE("spearman hand cases and the constant-input convention") {
    CHECK(stats::spearman(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30}) == doctest::Approx(1.0));
    CHECK(stats::spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(stats::spearman(std::vector<double>{4, 4, 4}, std::vector<double>{3, 2, 1}) == 0.0);
    const std::vector<double> x{1, 2, 2, 4}, y{1, 3, 2, 4};
    CHECK(std::abs(stats::spearman(x, y) - oracle_pearson(oracle_ranks(x), oracle_ranks(y))) <= 1e-12);
    CHECK_THROWS(stats::spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}));
}

TEST_CASE("spearman with ties matches the mid-rank Pearson oracle on random vectors") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> len(3, 40);
    std::normal_distribution<double> n(0, 1);
    for (int rep = 0; rep < 100; ++rep) {
        const int m = len(rng);
        std::vector<double> x(static_cast<std::size_t>(m)), y(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
            x[static_cast<std::size_t>(i)] = std::round(n(rng) * 2.0);
            y[static_cast<std::size_t>(i)] = std::round(x[static_cast<std::size_t>(i)] + n(rng) * 3.0);
        }
        const auto rx = oracle_ranks(x), ry = oracle_ranks(y);
        if (std::adjacent_find(rx.begin(), rx.end(), std::not_equal_to<>()) == rx.end()) continue;
        if (std::adjacent_find(ry.begin(), ry.end(), std::not_equal_to<>()) == ry.end()) continue;
        CHECK(std::abs(stats::spearman(x, y) - oracle_pearson(rx, ry)) <= 1e-10);
    }
}

TEST_CASE("exact and normal routes agree within 0.02 at the n=12 boundary for balanced groups") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    double worst = 0;
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t na = 4 + rep % 5;  // 4..8 of 12
        std::vector<double> a(na), b(12 - na);
        const double shift = 0.3 * (rep % 7);
        for (auto& x : a) x = n(rng) + shift;
        for (auto& x : b) x = n(rng);
        worst = std::max(worst, std::abs(stats::ranksum_exact(a, b) - stats::ranksum_normal(a, b)));
    }
    CHECK(worst <= 0.02);
}

TEST_CASE("rank-sum p-values are uniform under the null") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 1);
    const int reps = 400;
    std::vector<double> p;
    for (int rep = 0; rep < reps; ++rep) {
        std::vector<double> a(10), b(10);
        for (auto& x : a) x = n(rng);
        for (auto& x : b) x = n(rng);
        p.push_back(stats::ranksum_test(a, b));
    }
    std::sort(p.begin(), p.end());
    double d = 0;
    for (int i = 0; i < reps; ++i)
        d = std::max({d, std::abs(p[static_cast<std::size_t>(i)] - static_cast<double>(i) / reps),
                      std::abs(p[static_cast<std::size_t>(i)] - static_cast<double>(i + 1) / reps)});
    // Kolmogorov-Smirnov critical value at the 1% level
    CHECK(d <= 1.63 / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("with-set values all above without-set values (6 vs 6) is significant") {
    const std::vector<double> with{0.6, 0.61, 0.7, 0.8, 0.65, 0.9}, without{0.1, 0.2, 0.15, 0.3, 0.05, 0.12};
    CHECK(stats::ranksum_test(with, without) < 0.01);
}
