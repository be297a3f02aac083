#pragma once

// Contest economics shared by the simulator and the experiment runner:
// quality, utility, scoring, ranking and payment eligibility.

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace crowdrace {

using WorkerId = std::int32_t;
using PostId = std::int64_t;
// Virtual-clock time in integer milliseconds.
using Millis = std::int64_t;

struct Post {
  PostId id = 0;
  std::int32_t token_count = 1;
  std::int32_t expected_entities = 0;
  std::int64_t arrival_index = 0;

  // Throws ConfigError when token_count < 1 or expected_entities is outside
  // [0, token_count].
  void validate() const;

  friend bool operator==(const Post&, const Post&) = default;
};

struct WorkerProfile {
  WorkerId id = 0;
  double skill = 0.5;          // in [0, 1]
  double lambda_in = 1.0;      // rate multiplier while inside the reward spread
  double lambda_out = 1.0;     // rate multiplier while outside it
  double cost_per_effort = 0;  // linear cost c(e) = cost_per_effort * e
  double exit_threshold = 0;   // in [0, 1]; 1 switches the exit hazard off
  // Log-linear rate coefficients, used only by the log-linear rate model.
  std::vector<double> theta;

  double cost(double effort) const { return cost_per_effort * effort; }
  void validate() const;

  friend bool operator==(const WorkerProfile&, const WorkerProfile&) = default;
};

// Requester-side parameters of a contest.
struct ContestConfig {
  std::int32_t n_workers = 100;
  std::int64_t n_posts = 7600;
  std::int32_t window_size = 200;
  double task_unit_time_s = 10.0;
  std::int32_t task_unit_size = 10;
  double arrival_rate = 20.0;  // tasks per second
  std::int32_t reward_spread = 1;
  double prize_value = 0.10;
  std::int32_t base_points = 10;
  std::int32_t leaderboard_k = 3;
  std::int32_t quality_constraint = 1;
  double reduction_rate = 10.0;

  // Tasks a single worker can clear per second: one task unit per unit time.
  double service_rate() const;
  double task_intensity() const;
  // Total contest time T = P * mu / w, in whole milliseconds.
  Millis duration_ms() const;

  // Throws ConfigError on any violated invariant, including the load check
  // task_intensity() < n_workers.
  void validate() const;

  friend bool operator==(const ContestConfig&, const ContestConfig&) = default;
};

struct RankEntry {
  WorkerId worker_id = 0;
  double score = 0;
  std::int64_t annotations = 0;
  Millis tie_break_stamp = 0;  // time of the last event that earned points

  friend bool operator==(const RankEntry&, const RankEntry&) = default;
};

// Leaderboard sorted by score descending, then earlier stamp, then lower id.
struct Ranking {
  std::vector<RankEntry> entries;

  // 1-based rank; throws LookupError for an unknown worker.
  std::int32_t rank_of(WorkerId worker) const;
  std::size_t size() const { return entries.size(); }

  friend bool operator==(const Ranking&, const Ranking&) = default;
};

struct RankedEntry {
  std::int32_t rank = 0;
  RankEntry entry;
};

// q = skill * effort + delta
double compute_quality(double skill, double effort, double delta);

// U = V - c(e) for a winner, -c(e) otherwise, with linear cost.
double worker_utility(double prize, bool won, double effort,
                      double cost_per_effort);

// 5x for an exact entity-count match, x for any other non-empty annotation,
// 0 for an empty submission.
std::int64_t score_annotation(std::int64_t annotated_count,
                              std::int64_t expected_entities,
                              std::int64_t base_points);

// Throws ConfigError when the two maps (and annotations, if non-empty) do not
// cover the same workers.
Ranking rank_workers(const std::map<WorkerId, double>& scores,
                     const std::map<WorkerId, Millis>& last_scored,
                     const std::map<WorkerId, std::int64_t>& annotations = {});

// Sorts standings into leaderboard order in place.
void sort_standings(std::vector<RankEntry>& standings);

bool is_eligible(std::int32_t rank, std::int32_t reward_spread);

// The worker plus up to k contenders above and below, in leaderboard order.
std::vector<RankedEntry> k_neighbours_view(const Ranking& ranking,
                                           WorkerId worker, std::int32_t k);

// Winners are the first `reward_spread` ranked workers with at least
// `quality_constraint` annotations.
std::vector<WorkerId> select_winners(const Ranking& final_ranking,
                                     std::int32_t reward_spread,
                                     std::int32_t quality_constraint);

}  // namespace crowdrace
