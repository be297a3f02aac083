#pragma once

// Maximum-likelihood recovery of worker behaviour rates from event logs.
//
// Each holding interval tau_j (in seconds) is exponential with rate r_j, so the
// negative log-likelihood of a worker's log is
//
//   NLL = sum_j [ -log r_j + r_j * tau_j ].
//
// two_state:  r_j = lambda_in or lambda_out by eligibility when the interval began.
// log_linear: r_j = exp(theta . x_j) over the standardised design row x_j.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdrace/ctmc.hpp"
#include "crowdrace/features.hpp"

namespace crowdrace {

struct Observation {
  double holding_s = 0;
  bool eligible = false;
  DesignRow x{};
};

std::vector<Observation> observations_from(std::span<const AnnotationEvent> events,
                                           const FeatureScale& scale);

// Events grouped by worker id, in log order.
std::vector<std::vector<AnnotationEvent>> events_by_worker(const EventLog& log);

struct TwoStateRates {
  double lambda_in = 1;
  double lambda_out = 1;
};

// Throws DomainError for a non-positive rate or holding time. Empty input
// gives 0.
double negative_log_likelihood(std::span<const Observation> obs, const TwoStateRates& rates);
double negative_log_likelihood(std::span<const Observation> obs,
                               std::span<const double> theta);

// d NLL / d theta_d = sum_j (r_j tau_j - 1) x_jd. Throws ContractError when
// theta does not have kFeatureCount entries.
std::vector<double> nll_gradient(std::span<const Observation> obs,
                                 std::span<const double> theta);

struct FittedBehavior {
  WorkerId worker_id = 0;
  RateModel model_kind = RateModel::two_state;
  // Empty when the state has no data.
  std::optional<double> lambda_in_hat;
  std::optional<double> lambda_out_hat;
  std::vector<double> theta_hat;
  double nll_at_optimum = 0;
  std::int64_t n_events_in = 0;
  std::int64_t n_events_out = 0;
  bool converged = false;
  std::int64_t iterations = 0;
  double gradient_norm = 0;
  // NLL after every accepted step, starting with the initial point.
  std::vector<double> nll_trace;

  friend bool operator==(const FittedBehavior&, const FittedBehavior&) = default;
};

// Closed-form MLE: events / total holding time within each state. Throws
// DegenerateDataError when there is no holding time at all.
FittedBehavior fit_two_state(std::span<const Observation> obs, WorkerId worker = 0);

class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, std::vector<double> last_theta)
      : std::runtime_error(what), last_theta_(std::move(last_theta)) {}
  const std::vector<double>& last_theta() const { return last_theta_; }

 private:
  std::vector<double> last_theta_;
};

enum class DescentDirection { newton, steepest };

struct LogLinearOptions {
  double step_size = 1.0;  // initial trial step of the line search
  std::int64_t max_iters = 10000;
  double tolerance = 1e-8;  // gradient infinity norm, relative to max(1, |NLL|)
  DescentDirection direction = DescentDirection::newton;
  // Coefficients held at their initial value; empty means all free.
  std::vector<bool> fixed;
};

// Descent with Armijo backtracking; the NLL never increases between accepted
// iterates. Throws OptimizationError if the starting point has a non-finite NLL.
FittedBehavior fit_log_linear(std::span<const Observation> obs,
                              std::span<const double> init_theta,
                              const LogLinearOptions& options = {},
                              WorkerId worker = 0);

// Coefficients that make the log-linear model reproduce a two-state worker.
std::vector<double> theta_for_two_state(double lambda_in, double lambda_out);

struct RecoveryOptions {
  ContestConfig contest;
  SimulationOptions simulation;
  BehaviorPrior prior;
  std::int64_t n_events_target = 1000;  // per worker and state
  std::int64_t max_runs_per_seed = 2000;
  // Stop pooling once worker 0 alone meets the target.
  bool target_worker0_only = false;
  double skill = 0.8;
  // Overrides the drawn rates of worker 0.
  std::optional<BehaviorDraw> worker0;
};

struct WorkerRecovery {
  WorkerId worker_id = 0;
  BehaviorDraw truth;
  FittedBehavior fit;
  std::optional<double> rel_error_in;
  std::optional<double> rel_error_out;
};

struct SeedRecovery {
  std::uint64_t seed = 0;
  std::int64_t runs = 0;
  std::vector<WorkerRecovery> workers;
};

struct RateErrorStats {
  std::int64_t identified = 0;
  std::int64_t unidentified = 0;
  double mean_rel_error = 0;
  double max_rel_error = 0;
};

struct RecoveryReport {
  std::vector<SeedRecovery> seeds;
  RateErrorStats lambda_in;
  RateErrorStats lambda_out;
  // Same statistics restricted to worker 0.
  RateErrorStats worker0_in;
  RateErrorStats worker0_out;
};

// Fits every worker of a log, workers in parallel. A worker without events
// gets a record with no rates. The log-linear fit starts from the two-state
// estimate and holds the eligibility coefficient at 0 when only one state was
// observed.
std::vector<FittedBehavior> fit_event_log(const EventLog& log, RateModel model,
                                          const LogLinearOptions& options = {});

// Five workers on a 1000-post stream with worker 0 pinned to
// lambda_in = 1.66, lambda_out = 1.12.
RecoveryOptions recovery_fixture();

// Draw behaviours, simulate pooled contests until every worker has
// n_events_target events in each state (or the run cap is hit), then fit.
RecoveryReport recovery_experiment(const RecoveryOptions& options,
                                   std::span<const std::uint64_t> seeds);

}  // namespace crowdrace
