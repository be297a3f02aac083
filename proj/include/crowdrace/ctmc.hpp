#pragma once

// Workers as continuous-time Markov chains: each annotation ends an
// exponentially distributed holding interval whose rate depends on whether the
// worker sits inside the reward spread when the interval starts.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crowdrace/core.hpp"
#include "crowdrace/features.hpp"
#include "crowdrace/rng.hpp"
#include "crowdrace/stream.hpp"

namespace crowdrace {

struct BehaviorPrior {
  double gamma_shape = 9.0;
  double gamma_rate = 8.0;
  double halfnormal_sigma = 0.3;

  void validate() const;
  friend bool operator==(const BehaviorPrior&, const BehaviorPrior&) = default;
};

struct BehaviorDraw {
  double lambda_in = 0;
  double lambda_out = 0;
};

// lambda_in ~ Gamma(shape, rate); lambda_out ~ Gamma(shape, rate) + |N(0, sigma^2)|
// from independent draws.
BehaviorDraw draw_behavior(const BehaviorPrior& prior, RandomStream& rng);

// Exponential holding time in (real) milliseconds with rate
// base_rate * modulation events per second.
double holding_time(double base_rate, double modulation, RandomStream& rng);

// Integer-millisecond holding time, rounded up and at least 1 ms.
Millis holding_time_ms(double rate_per_s, RandomStream& rng);

struct ExitModel {
  // h0; 0 switches exits off.
  double base_hazard = 0.0;
  // Decision epochs per contest; the first checkpoint_count - 1 interior marks
  // are decision points.
  std::int32_t checkpoint_count = 20;

  friend bool operator==(const ExitModel&, const ExitModel&) = default;
};

// Exit probability at one decision epoch:
//   h0 * (1 - exit_threshold) * min(1, rank_gap / n_workers) * elapsed^2,
// and 0 inside the spread. rank_gap counts places below the last paid rank
// (0 for the first unpaid rank).
double exit_hazard(bool eligible, std::int32_t rank_gap, double elapsed_fraction,
                   const WorkerProfile& profile, const ExitModel& model,
                   std::int32_t n_workers);

enum class RateModel { two_state, log_linear };

std::string to_string(RateModel m);
RateModel rate_model_from_string(const std::string& s);

struct SimulationOptions {
  RateModel rate_model = RateModel::two_state;
  ExitModel exit;
  // Added to skill to give the exact-count probability.
  double accuracy_floor = 0.0;

  friend bool operator==(const SimulationOptions&, const SimulationOptions&) = default;
};

// Stand-in for human labelling: the exact entity count with probability
// clamp(skill + accuracy_floor, 0, 1), otherwise a count off by one (never the
// true count).
std::int64_t simulate_annotated_count(const Post& post, const WorkerProfile& profile,
                                      RandomStream& rng, double accuracy_floor = 0.0);

struct AnnotationEvent {
  WorkerId worker_id = 0;
  std::int64_t event_index = 0;
  Millis event_time_ms = 0;
  Millis holding_time_ms = 1;
  PostId post_id = 0;
  std::int64_t annotated_count = 0;
  std::int64_t points = 0;
  // Worker state when this holding interval began; it fixed the interval's rate.
  std::int32_t rank_at_event = 1;
  bool eligible_at_event = false;
  std::int64_t annotations_remaining = 0;

  friend bool operator==(const AnnotationEvent&, const AnnotationEvent&) = default;
};

struct ExitEvent {
  WorkerId worker_id = 0;
  Millis exit_time_ms = 0;
  std::int32_t rank_at_exit = 1;
  bool eligible_at_exit = false;

  friend bool operator==(const ExitEvent&, const ExitEvent&) = default;
};

struct EventLog {
  ContestConfig config;
  SimulationOptions options;
  std::uint64_t seed = 0;
  std::vector<WorkerProfile> profiles;
  std::vector<AnnotationEvent> events;  // processing order, sorted by time
  std::vector<ExitEvent> exits;
  Ranking final_ranking;
  StreamCounts final_counts;
  // Active workers at each of checkpoint_count + 1 evenly spaced marks
  // (0% .. 100% of the contest).
  std::vector<std::int32_t> active_at_checkpoint;

  friend bool operator==(const EventLog&, const EventLog&) = default;
};

FeatureScale feature_scale(const ContestConfig& config);
FeatureVector features_of(const AnnotationEvent& e);

// Time of checkpoint k of `count` over a contest of duration_ms.
Millis checkpoint_time_ms(Millis duration_ms, std::int32_t k, std::int32_t count);

// Throws ConfigError before generating anything if the inputs are invalid.
EventLog run_contest(const ContestConfig& config,
                     std::span<const WorkerProfile> profiles,
                     std::span<const Post> posts, std::uint64_t seed,
                     const SimulationOptions& options = {});

struct LogCheck {
  std::vector<std::string> violations;
  StreamCounts replayed_counts;
  bool ok() const { return violations.empty(); }
};

// Replays a log against its posts and checks every structural invariant:
// time ordering, per-worker index and holding-time sums, rank and
// eligibility self-consistency, exit irreversibility and stream conservation.
LogCheck verify_event_log(const EventLog& log, std::span<const Post> posts);

}  // namespace crowdrace
