#include "crowdrace/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crowdrace/error.hpp"

namespace crowdrace {

void Post::validate() const {
  if (token_count < 1) {
    throw ConfigError("post " + std::to_string(id) + ": token_count < 1");
  }
  if (expected_entities < 0 || expected_entities > token_count) {
    throw ConfigError("post " + std::to_string(id) +
                      ": expected_entities outside [0, token_count]");
  }
}

void WorkerProfile::validate() const {
  const std::string who = "worker " + std::to_string(id);
  if (!(skill >= 0.0 && skill <= 1.0)) throw ConfigError(who + ": skill outside [0,1]");
  if (!(lambda_in > 0.0) || !(lambda_out > 0.0) || !std::isfinite(lambda_in) ||
      !std::isfinite(lambda_out)) {
    throw ConfigError(who + ": rates must be positive and finite");
  }
  if (!(cost_per_effort >= 0.0)) throw ConfigError(who + ": negative cost_per_effort");
  if (!(exit_threshold >= 0.0 && exit_threshold <= 1.0)) {
    throw ConfigError(who + ": exit_threshold outside [0,1]");
  }
}

double ContestConfig::service_rate() const {
  return static_cast<double>(task_unit_size) / task_unit_time_s;
}

double ContestConfig::task_intensity() const {
  return arrival_rate / service_rate();
}

Millis ContestConfig::duration_ms() const {
  return std::llround(static_cast<double>(n_posts) * task_unit_time_s * 1000.0 /
                      static_cast<double>(window_size));
}

void ContestConfig::validate() const {
  if (n_workers < 1) throw ConfigError("n_workers must be >= 1");
  if (n_posts < 1) throw ConfigError("n_posts must be >= 1");
  if (window_size < 1) throw ConfigError("window_size must be >= 1");
  if (!(task_unit_time_s > 0.0) || !std::isfinite(task_unit_time_s)) {
    throw ConfigError("task_unit_time_s must be positive");
  }
  if (task_unit_size < 1) throw ConfigError("task_unit_size must be >= 1");
  if (task_unit_size > window_size) {
    throw ConfigError("task_unit_size must not exceed window_size");
  }
  if (!(arrival_rate > 0.0) || !std::isfinite(arrival_rate)) {
    throw ConfigError("arrival_rate must be positive");
  }
  if (reward_spread < 1) throw ConfigError("reward_spread must be >= 1");
  if (reward_spread > n_workers) {
    throw ConfigError("reward_spread must not exceed n_workers");
  }
  if (!(prize_value >= 0.0)) throw ConfigError("prize_value must be >= 0");
  if (base_points < 1) throw ConfigError("base_points must be >= 1");
  if (leaderboard_k < 1) throw ConfigError("leaderboard_k must be >= 1");
  if (quality_constraint < 0) throw ConfigError("quality_constraint must be >= 0");
  if (!(reduction_rate > 0.0)) throw ConfigError("reduction_rate must be positive");
  if (!(task_intensity() < static_cast<double>(n_workers))) {
    throw ConfigError("task intensity " + std::to_string(task_intensity()) +
                      " must stay below n_workers " + std::to_string(n_workers));
  }
}

std::int32_t Ranking::rank_of(WorkerId worker) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].worker_id == worker) return static_cast<std::int32_t>(i + 1);
  }
  throw LookupError("worker " + std::to_string(worker) + " not in ranking");
}

double compute_quality(double skill, double effort, double delta) {
  return skill * effort + delta;
}

double worker_utility(double prize, bool won, double effort,
                      double cost_per_effort) {
  const double cost = cost_per_effort * effort;
  return won ? prize - cost : -cost;
}

std::int64_t score_annotation(std::int64_t annotated_count,
                              std::int64_t expected_entities,
                              std::int64_t base_points) {
  if (annotated_count <= 0) return 0;
  return annotated_count == expected_entities ? 5 * base_points : base_points;
}

void sort_standings(std::vector<RankEntry>& standings) {
  std::sort(standings.begin(), standings.end(),
            [](const RankEntry& a, const RankEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.tie_break_stamp != b.tie_break_stamp) {
                return a.tie_break_stamp < b.tie_break_stamp;
              }
              return a.worker_id < b.worker_id;
            });
}

Ranking rank_workers(const std::map<WorkerId, double>& scores,
                     const std::map<WorkerId, Millis>& last_scored,
                     const std::map<WorkerId, std::int64_t>& annotations) {
  const auto same_keys = [](const auto& a, const auto& b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(),
                      [](const auto& x, const auto& y) { return x.first == y.first; });
  };
  if (!same_keys(scores, last_scored)) {
    throw ConfigError("rank_workers: score and timestamp maps cover different workers");
  }
  if (!annotations.empty() && !same_keys(scores, annotations)) {
    throw ConfigError("rank_workers: annotation map covers different workers");
  }
  Ranking out;
  out.entries.reserve(scores.size());
  for (const auto& [id, score] : scores) {
    RankEntry e;
    e.worker_id = id;
    e.score = score;
    e.tie_break_stamp = last_scored.at(id);
    if (!annotations.empty()) e.annotations = annotations.at(id);
    out.entries.push_back(e);
  }
  sort_standings(out.entries);
  return out;
}

bool is_eligible(std::int32_t rank, std::int32_t reward_spread) {
  return rank <= reward_spread;
}

std::vector<RankedEntry> k_neighbours_view(const Ranking& ranking,
                                           WorkerId worker, std::int32_t k) {
  const std::int32_t rank = ranking.rank_of(worker);
  const std::int32_t n = static_cast<std::int32_t>(ranking.size());
  const std::int32_t first = std::max(1, rank - k);
  const std::int32_t last = std::min(n, rank + k);
  std::vector<RankedEntry> view;
  view.reserve(static_cast<std::size_t>(last - first + 1));
  for (std::int32_t r = first; r <= last; ++r) {
    view.push_back({r, ranking.entries[static_cast<std::size_t>(r - 1)]});
  }
  return view;
}

std::vector<WorkerId> select_winners(const Ranking& final_ranking,
                                     std::int32_t reward_spread,
                                     std::int32_t quality_constraint) {
  std::vector<WorkerId> winners;
  for (const auto& e : final_ranking.entries) {
    if (static_cast<std::int32_t>(winners.size()) >= reward_spread) break;
    if (e.annotations >= quality_constraint) winners.push_back(e.worker_id);
  }
  return winners;
}

}  // namespace crowdrace
