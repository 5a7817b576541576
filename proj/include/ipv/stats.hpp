#pragma once

#include <optional>
#include <span>
#include <vector>

namespace ipv::stats {

/// Empirical quantile with linear interpolation between order statistics
/// (h = (n-1) q, the "type 7" convention). This is the single quantile
/// convention used for thresholds, calipers and bootstrap intervals.
double quantile(std::span<const double> values, double q);
/// quantile() that reorders `values` instead of copying them.
double quantile_inplace(std::vector<double>& values, double q);
/// Same as quantile() for input that is already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

double mean(std::span<const double> values);
/// Population standard deviation (divides by n).
double stddev(std::span<const double> values);
double median(std::span<const double> values);
double iqr(std::span<const double> values);
/// Sample skewness g1 = m3 / m2^{3/2} (biased moment estimator).
double skewness(std::span<const double> values);

/// Ranks starting at 1, ties receive the average of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation; nullopt when either input has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);
/// Spearman correlation on average ranks; nullopt when either input is constant.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_distance(std::span<const double> a, std::span<const double> b);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace ipv::stats
