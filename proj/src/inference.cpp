#include "crowdrace/inference.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "crowdrace/corpus.hpp"
#include "crowdrace/error.hpp"

namespace crowdrace {

namespace {

double dot(const DesignRow& x, std::span<const double> theta) {
  double s = 0.0;
  for (std::size_t d = 0; d < kFeatureCount; ++d) s += x[d] * theta[d];
  return s;
}

void check_theta(std::span<const double> theta) {
  if (theta.size() != kFeatureCount) {
    throw ContractError("theta has " + std::to_string(theta.size()) + " entries, expected " +
                        std::to_string(kFeatureCount));
  }
}

void check_holding(const Observation& o) {
  if (!(o.holding_s > 0.0)) throw DomainError("holding time must be positive");
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Solves A x = b for symmetric positive definite A by Cholesky. Returns false
// if A is not numerically positive definite.
bool cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t n,
                    std::vector<double>& x) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 1e-300)) return false;
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / d;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
    b[i] = s / a[i * n + i];
  }
  x = std::move(b);
  return true;
}

}  // namespace

std::vector<Observation> observations_from(std::span<const AnnotationEvent> events,
                                           const FeatureScale& scale) {
  std::vector<Observation> obs;
  obs.reserve(events.size());
  for (const auto& e : events) {
    obs.push_back({static_cast<double>(e.holding_time_ms) / 1000.0, e.eligible_at_event,
                   design_row(features_of(e), scale)});
  }
  return obs;
}

std::vector<std::vector<AnnotationEvent>> events_by_worker(const EventLog& log) {
  std::vector<std::vector<AnnotationEvent>> out(static_cast<std::size_t>(log.config.n_workers));
  for (const auto& e : log.events) {
    const auto w = static_cast<std::size_t>(e.worker_id);
    if (w >= out.size()) out.resize(w + 1);
    out[w].push_back(e);
  }
  return out;
}

double negative_log_likelihood(std::span<const Observation> obs, const TwoStateRates& rates) {
  if (!(rates.lambda_in > 0.0) || !(rates.lambda_out > 0.0)) {
    throw DomainError("negative_log_likelihood: rates must be positive");
  }
  double nll = 0.0;
  for (const auto& o : obs) {
    check_holding(o);
    const double r = o.eligible ? rates.lambda_in : rates.lambda_out;
    nll += -std::log(r) + r * o.holding_s;
  }
  return nll;
}

double negative_log_likelihood(std::span<const Observation> obs,
                               std::span<const double> theta) {
  check_theta(theta);
  double nll = 0.0;
  for (const auto& o : obs) {
    check_holding(o);
    const double eta = dot(o.x, theta);
    nll += -eta + std::exp(eta) * o.holding_s;
  }
  return nll;
}

std::vector<double> nll_gradient(std::span<const Observation> obs,
                                 std::span<const double> theta) {
  check_theta(theta);
  std::vector<double> g(kFeatureCount, 0.0);
  for (const auto& o : obs) {
    const double resid = std::exp(dot(o.x, theta)) * o.holding_s - 1.0;
    for (std::size_t d = 0; d < kFeatureCount; ++d) g[d] += resid * o.x[d];
  }
  return g;
}

FittedBehavior fit_two_state(std::span<const Observation> obs, WorkerId worker) {
  FittedBehavior fit;
  fit.worker_id = worker;
  fit.model_kind = RateModel::two_state;
  double time_in = 0.0, time_out = 0.0;
  for (const auto& o : obs) {
    check_holding(o);
    if (o.eligible) {
      ++fit.n_events_in;
      time_in += o.holding_s;
    } else {
      ++fit.n_events_out;
      time_out += o.holding_s;
    }
  }
  if (!(time_in + time_out > 0.0)) {
    throw DegenerateDataError("fit_two_state: zero total holding time");
  }
  double nll = 0.0;
  if (fit.n_events_in > 0) {
    const double r = static_cast<double>(fit.n_events_in) / time_in;
    fit.lambda_in_hat = r;
    nll += -static_cast<double>(fit.n_events_in) * std::log(r) + r * time_in;
  }
  if (fit.n_events_out > 0) {
    const double r = static_cast<double>(fit.n_events_out) / time_out;
    fit.lambda_out_hat = r;
    nll += -static_cast<double>(fit.n_events_out) * std::log(r) + r * time_out;
  }
  fit.nll_at_optimum = nll;
  fit.converged = true;
  return fit;
}

FittedBehavior fit_log_linear(std::span<const Observation> obs,
                              std::span<const double> init_theta,
                              const LogLinearOptions& options, WorkerId worker) {
  check_theta(init_theta);
  if (options.max_iters < 1) throw ConfigError("fit_log_linear: max_iters must be >= 1");
  if (!(options.step_size > 0.0)) throw ConfigError("fit_log_linear: step_size must be positive");
  if (!options.fixed.empty() && options.fixed.size() != kFeatureCount) {
    throw ContractError("fit_log_linear: fixed mask has the wrong length");
  }
  const auto is_free = [&](std::size_t d) { return options.fixed.empty() || !options.fixed[d]; };

  FittedBehavior fit;
  fit.worker_id = worker;
  fit.model_kind = RateModel::log_linear;
  for (const auto& o : obs) (o.eligible ? fit.n_events_in : fit.n_events_out)++;

  std::vector<double> theta(init_theta.begin(), init_theta.end());
  double f = negative_log_likelihood(obs, theta);
  if (!std::isfinite(f)) {
    throw OptimizationError("fit_log_linear: non-finite NLL at the starting point", theta);
  }
  fit.nll_trace.push_back(f);

  std::vector<std::size_t> free_dims;
  for (std::size_t d = 0; d < kFeatureCount; ++d) {
    if (is_free(d)) free_dims.push_back(d);
  }
  const std::size_t m = free_dims.size();

  std::vector<double> g;
  for (;;) {
    g = nll_gradient(obs, theta);
    for (std::size_t d = 0; d < kFeatureCount; ++d) {
      if (!is_free(d)) g[d] = 0.0;
    }
    fit.gradient_norm = inf_norm(g);
    if (fit.gradient_norm < options.tolerance * std::max(1.0, std::fabs(f))) {
      fit.converged = true;
      break;
    }
    if (fit.iterations >= options.max_iters) break;

    std::vector<double> dir(kFeatureCount, 0.0);
    bool newton = false;
    if (options.direction == DescentDirection::newton && m > 0) {
      std::vector<double> h(m * m, 0.0), rhs(m, 0.0), step;
      for (const auto& o : obs) {
        const double w = std::exp(dot(o.x, theta)) * o.holding_s;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j <= i; ++j) {
            h[i * m + j] += w * o.x[free_dims[i]] * o.x[free_dims[j]];
          }
        }
      }
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < i; ++j) h[j * m + i] = h[i * m + j];
        rhs[i] = -g[free_dims[i]];
      }
      // Unidentified directions (a feature that is always zero) make the
      // Hessian singular; a small ridge keeps Newton on the rest.
      double diag = 0.0;
      for (std::size_t i = 0; i < m; ++i) diag = std::max(diag, h[i * m + i]);
      for (double ridge = 0.0; !newton && ridge <= diag; ridge = ridge == 0.0 ? diag * 1e-10 : ridge * 100) {
        auto hr = h;
        for (std::size_t i = 0; i < m; ++i) hr[i * m + i] += ridge;
        if (cholesky_solve(hr, rhs, m, step)) {
          for (std::size_t i = 0; i < m; ++i) dir[free_dims[i]] = step[i];
          newton = true;
        }
      }
    }
    if (!newton) {
      for (std::size_t d = 0; d < kFeatureCount; ++d) dir[d] = -g[d];
    }
    double slope = 0.0;
    for (std::size_t d = 0; d < kFeatureCount; ++d) slope += g[d] * dir[d];
    if (!(slope < 0.0)) {
      for (std::size_t d = 0; d < kFeatureCount; ++d) dir[d] = -g[d];
      slope = -std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    }

    // Armijo backtracking from the trial step.
    double t = newton ? 1.0 : options.step_size;
    std::vector<double> trial(kFeatureCount);
    double f_trial = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int halvings = 0; halvings < 200; ++halvings) {
      for (std::size_t d = 0; d < kFeatureCount; ++d) trial[d] = theta[d] + t * dir[d];
      f_trial = negative_log_likelihood(obs, trial);
      if (std::isfinite(f_trial) && f_trial <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No decrease representable in floating point; this is as good as it gets.
      break;
    }
    theta = trial;
    f = f_trial;
    fit.nll_trace.push_back(f);
    ++fit.iterations;
  }

  fit.theta_hat = theta;
  fit.nll_at_optimum = f;
  // Rates implied at the two eligibility states with every other feature at 0.
  fit.lambda_out_hat = std::exp(theta[0]);
  fit.lambda_in_hat = std::exp(theta[0] + theta[kFeatureCount - 1]);
  return fit;
}

std::vector<double> theta_for_two_state(double lambda_in, double lambda_out) {
  if (!(lambda_in > 0.0) || !(lambda_out > 0.0)) {
    throw DomainError("theta_for_two_state: rates must be positive");
  }
  std::vector<double> theta(kFeatureCount, 0.0);
  theta[0] = std::log(lambda_out);
  theta[kFeatureCount - 1] = std::log(lambda_in) - std::log(lambda_out);
  return theta;
}

namespace {

void accumulate(RateErrorStats& s, const std::optional<double>& err) {
  if (!err) {
    ++s.unidentified;
    return;
  }
  s.mean_rel_error += *err;
  s.max_rel_error = std::max(s.max_rel_error, *err);
  ++s.identified;
}

void finish(RateErrorStats& s) {
  if (s.identified > 0) s.mean_rel_error /= static_cast<double>(s.identified);
}

}  // namespace

RecoveryReport recovery_experiment(const RecoveryOptions& options,
                                   std::span<const std::uint64_t> seeds) {
  options.contest.validate();
  options.prior.validate();
  if (options.n_events_target < 0) throw ConfigError("n_events_target must be >= 0");
  const auto n = static_cast<std::size_t>(options.contest.n_workers);
  const FeatureScale scale = feature_scale(options.contest);

  RecoveryReport report;
  for (std::uint64_t seed : seeds) {
    SeedRecovery sr;
    sr.seed = seed;
    RandomStream behavior_rng(derive_seed(seed, "behaviors"));
    std::vector<WorkerProfile> profiles(n);
    std::vector<BehaviorDraw> truth(n);
    for (std::size_t w = 0; w < n; ++w) {
      truth[w] = draw_behavior(options.prior, behavior_rng);
      if (w == 0 && options.worker0) truth[w] = *options.worker0;
      profiles[w].id = static_cast<WorkerId>(w);
      profiles[w].skill = options.skill;
      profiles[w].lambda_in = truth[w].lambda_in;
      profiles[w].lambda_out = truth[w].lambda_out;
      profiles[w].theta = theta_for_two_state(truth[w].lambda_in, truth[w].lambda_out);
    }

    std::vector<std::vector<Observation>> pooled(n);
    std::vector<std::int64_t> n_in(n, 0), n_out(n, 0);
    const auto satisfied = [&] {
      const std::size_t checked = options.target_worker0_only ? 1 : n;
      for (std::size_t w = 0; w < checked; ++w) {
        if (n_in[w] < options.n_events_target || n_out[w] < options.n_events_target) {
          return false;
        }
      }
      return true;
    };
    while (!satisfied() && sr.runs < options.max_runs_per_seed) {
      RandomStream corpus_rng(derive_seed(seed, "corpus", static_cast<std::uint64_t>(sr.runs)));
      const auto posts = generate_corpus(options.contest.n_posts, corpus_rng);
      const EventLog log =
          run_contest(options.contest, profiles, posts,
                      derive_seed(seed, "contest", static_cast<std::uint64_t>(sr.runs)),
                      options.simulation);
      for (const auto& e : log.events) {
        const auto w = static_cast<std::size_t>(e.worker_id);
        pooled[w].push_back({static_cast<double>(e.holding_time_ms) / 1000.0,
                             e.eligible_at_event, design_row(features_of(e), scale)});
        (e.eligible_at_event ? n_in[w] : n_out[w])++;
      }
      ++sr.runs;
    }

    for (std::size_t w = 0; w < n; ++w) {
      WorkerRecovery wr;
      wr.worker_id = static_cast<WorkerId>(w);
      wr.truth = truth[w];
      wr.fit.worker_id = wr.worker_id;
      if (!pooled[w].empty()) wr.fit = fit_two_state(pooled[w], wr.worker_id);
      if (wr.fit.lambda_in_hat) {
        wr.rel_error_in = std::abs(*wr.fit.lambda_in_hat - truth[w].lambda_in) / truth[w].lambda_in;
      }
      if (wr.fit.lambda_out_hat) {
        wr.rel_error_out =
            std::abs(*wr.fit.lambda_out_hat - truth[w].lambda_out) / truth[w].lambda_out;
      }
      accumulate(report.lambda_in, wr.rel_error_in);
      accumulate(report.lambda_out, wr.rel_error_out);
      if (w == 0) {
        accumulate(report.worker0_in, wr.rel_error_in);
        accumulate(report.worker0_out, wr.rel_error_out);
      }
      sr.workers.push_back(std::move(wr));
    }
    report.seeds.push_back(std::move(sr));
  }
  finish(report.lambda_in);
  finish(report.lambda_out);
  finish(report.worker0_in);
  finish(report.worker0_out);
  return report;
}

std::vector<FittedBehavior> fit_event_log(const EventLog& log, RateModel model,
                                          const LogLinearOptions& options) {
  const auto by_worker = events_by_worker(log);
  const auto scale = feature_scale(log.config);
  std::vector<FittedBehavior> fits(by_worker.size());

  auto fit_one = [&](std::size_t w) {
    const auto obs = observations_from(by_worker[w], scale);
    const auto id = static_cast<WorkerId>(w);
    if (obs.empty()) {
      fits[w].worker_id = id;
      fits[w].model_kind = model;
      if (model == RateModel::log_linear) fits[w].theta_hat.assign(kFeatureCount, 0.0);
      return;
    }
    auto two = fit_two_state(obs, id);
    if (model == RateModel::two_state) {
      fits[w] = std::move(two);
      return;
    }
    LogLinearOptions opts = options;
    std::vector<double> init(kFeatureCount, 0.0);
    if (two.lambda_in_hat && two.lambda_out_hat) {
      init = theta_for_two_state(*two.lambda_in_hat, *two.lambda_out_hat);
    } else {
      init[0] = std::log(two.lambda_in_hat ? *two.lambda_in_hat : *two.lambda_out_hat);
      opts.fixed.assign(kFeatureCount, false);
      opts.fixed[kFeatureCount - 1] = true;
    }
    fits[w] = fit_log_linear(obs, init, opts, id);
  };

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t w = next++; w < fits.size(); w = next++) fit_one(w);
  };
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(
      std::max(1u, std::thread::hardware_concurrency()), std::max<std::size_t>(fits.size(), 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return fits;
}

RecoveryOptions recovery_fixture() {
  RecoveryOptions o;
  o.contest.n_workers = 5;
  o.contest.n_posts = 1000;
  o.contest.window_size = 1000;
  o.contest.task_unit_time_s = 200;
  o.contest.task_unit_size = 250;
  o.contest.arrival_rate = 5;
  o.contest.reward_spread = 2;
  o.n_events_target = 1000;
  o.target_worker0_only = true;
  o.worker0 = BehaviorDraw{1.66, 1.12};
  return o;
}

}  // namespace crowdrace
