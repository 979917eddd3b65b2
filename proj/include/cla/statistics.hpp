#pragma once

#include <span>
#include <vector>

namespace cla::stats {

/// 1-based ranks with ties given their average (mid) rank.
std::vector<double> midranks(std::span<const double> values);

bool is_constant(std::span<const double> values);

/// Pearson correlation of midranks. Returns 0 when either input is constant.
/// Throws InputError for unequal lengths or fewer than 3 points.
double spearman(std::span<const double> x, std::span<const double> y);

/// Total sample size at or below which ranksum_test enumerates the exact null.
inline constexpr std::size_t kExactRanksumLimit = 12;

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) p-value. Exact permutation null over
/// midranks when |a| + |b| <= 12, otherwise the normal approximation with tie and
/// continuity correction.
double ranksum_test(std::span<const double> a, std::span<const double> b);

/// Branch-specific entry points, exposed for cross-checking the two routes.
double ranksum_exact(std::span<const double> a, std::span<const double> b);
double ranksum_normal(std::span<const double> a, std::span<const double> b);

}  // namespace cla::stats
