#include "crowdrace/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crowdrace/error.hpp"

namespace crowdrace {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

AnovaResult anova_f(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw ConfigError("anova_f: need at least two groups");
  std::size_t total_n = 0;
  double grand_sum = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw ConfigError("anova_f: every group needs at least two samples");
    total_n += g.size();
    grand_sum += std::accumulate(g.begin(), g.end(), 0.0);
  }
  const double grand_mean = grand_sum / static_cast<double>(total_n);
  double ss_between = 0.0, ss_within = 0.0;
  for (const auto& g : groups) {
    const double m = mean(g);
    ss_between += static_cast<double>(g.size()) * (m - grand_mean) * (m - grand_mean);
    for (double x : g) ss_within += (x - m) * (x - m);
  }
  AnovaResult r;
  r.df_between = static_cast<std::int64_t>(groups.size()) - 1;
  r.df_within = static_cast<std::int64_t>(total_n - groups.size());
  const double ms_between = ss_between / static_cast<double>(r.df_between);
  const double ms_within = ss_within / static_cast<double>(r.df_within);
  // Sums of squares below this scale are rounding noise.
  const double scale = std::max(1.0, grand_mean * grand_mean) * static_cast<double>(total_n);
  const double eps = 1e-24 * scale;
  if (ss_within <= eps) {
    if (ss_between <= eps) {
      r.f = std::numeric_limits<double>::quiet_NaN();
      r.status = AnovaStatus::undefined;
    } else {
      r.f = std::numeric_limits<double>::infinity();
      r.status = AnovaStatus::infinite;
    }
    return r;
  }
  r.f = ms_between / ms_within;
  return r;
}

double binomial_half_upper_tail(std::int64_t n, std::int64_t k) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  // Sum in log space: log C(n, i) - n log 2.
  double total = 0.0;
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  for (std::int64_t i = k; i <= n; ++i) {
    const double log_c = std::lgamma(static_cast<double>(n) + 1) -
                         std::lgamma(static_cast<double>(i) + 1) -
                         std::lgamma(static_cast<double>(n - i) + 1);
    total += std::exp(log_c + log_half_n);
  }
  return std::min(1.0, total);
}

SignTest sign_test_greater(std::span<const double> before, std::span<const double> after) {
  if (before.size() != after.size()) throw ContractError("sign_test: unpaired samples");
  SignTest t;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (after[i] > before[i]) {
      ++t.positive;
    } else if (after[i] < before[i]) {
      ++t.negative;
    } else {
      ++t.ties;
    }
  }
  t.p_value = binomial_half_upper_tail(t.positive + t.negative, t.positive);
  return t;
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) return 0.0;
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  return d;
}

double ks_p_value(double d, std::int64_t n) {
  if (n <= 0) return 1.0;
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace crowdrace
