#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace syncup {

double rmse(std::span<const double> predictions, std::span<const double> truth);

// Pearson correlation; nullopt when either series has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Two-sided p-value of a Pearson r over n pairs (t distribution, n - 2 dof).
double pearson_p_value(double r, std::size_t n);

// Spearman rank correlation (average ranks for ties).
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

}  // namespace syncup
