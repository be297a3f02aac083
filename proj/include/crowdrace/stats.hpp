#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace crowdrace {

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> xs);

enum class AnovaStatus {
  ok,
  infinite,   // zero within-group variance, unequal means
  undefined,  // zero within-group variance, equal means (0/0)
};

struct AnovaResult {
  double f = 0;  // +inf or NaN for the degenerate statuses
  std::int64_t df_between = 0;
  std::int64_t df_within = 0;
  AnovaStatus status = AnovaStatus::ok;
};

// One-way ANOVA F = MS_between / MS_within. Throws ConfigError for fewer than
// two groups or a group with fewer than two samples.
AnovaResult anova_f(const std::vector<std::vector<double>>& groups);

struct SignTest {
  std::int64_t positive = 0;
  std::int64_t negative = 0;
  std::int64_t ties = 0;
  // P(X >= positive) for X ~ Binomial(positive + negative, 1/2); 1 with no
  // untied pairs.
  double p_value = 1;
};

// One-sided test that `after` tends to exceed `before`, pair by pair.
SignTest sign_test_greater(std::span<const double> before, std::span<const double> after);

// Upper tail of Binomial(n, 1/2) at k.
double binomial_half_upper_tail(std::int64_t n, std::int64_t k);

// Kolmogorov-Smirnov distance between the sample and a continuous CDF.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);

// Asymptotic p-value for the one-sample KS statistic with Stephens' small-n
// correction.
double ks_p_value(double d, std::int64_t n);

}  // namespace crowdrace
