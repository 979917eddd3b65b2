#include "cla/statistics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "cla/common.hpp"

namespace cla::stats {

std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

bool is_constant(std::span<const double> values) {
    return std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) == values.end();
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("spearman: length mismatch");
    if (x.size() < 3) throw InputError("spearman: need at least 3 points");
    if (is_constant(x) || is_constant(y)) return 0.0;
    const std::vector<double> rx = midranks(x);
    const std::vector<double> ry = midranks(y);
    const double n = static_cast<double>(x.size());
    const double mean = (n + 1.0) / 2.0;  // midranks always average to (n+1)/2
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

namespace {

void require_nonempty(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InputError("ranksum_test: both samples must be non-empty");
}

std::vector<double> pooled(std::span<const double> a, std::span<const double> b) {
    std::vector<double> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    return all;
}

}  // namespace

double ranksum_exact(std::span<const double> a, std::span<const double> b) {
    require_nonempty(a, b);
    const std::size_t n = a.size() + b.size();
    if (n > 20) throw InputError("ranksum_exact: sample too large for enumeration");
    const std::vector<double> ranks = midranks(pooled(a, b));
    const auto n1 = static_cast<int>(a.size());
    const double expected = static_cast<double>(a.size()) * (static_cast<double>(n) + 1.0) / 2.0;
    double observed = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) observed += ranks[i];
    const double observed_dev = std::abs(observed - expected);

    std::uint64_t total = 0, extreme = 0;
    const std::uint32_t limit = 1u << n;
    for (std::uint32_t mask = 0; mask < limit; ++mask) {
        if (std::popcount(mask) != n1) continue;
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) w += ranks[i];
        ++total;
        if (std::abs(w - expected) >= observed_dev - 1e-9) ++extreme;
    }
    return static_cast<double>(extreme) / static_cast<double>(total);
}

double ranksum_normal(std::span<const double> a, std::span<const double> b) {
    require_nonempty(a, b);
    const std::vector<double> all = pooled(a, b);
    const std::vector<double> ranks = midranks(all);
    const double n1 = static_cast<double>(a.size());
    const double n2 = static_cast<double>(b.size());
    const double n = n1 + n2;
    double r1 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) r1 += ranks[i];
    const double u = r1 - n1 * (n1 + 1.0) / 2.0;
    const double mu = n1 * n2 / 2.0;

    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (!(var > 0)) return 1.0;
    const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

double ranksum_test(std::span<const double> a, std::span<const double> b) {
    require_nonempty(a, b);
    if (a.size() + b.size() <= kExactRanksumLimit) return ranksum_exact(a, b);
    return ranksum_normal(a, b);
}

}  // namespace cla::stats
