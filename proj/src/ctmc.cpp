#include "crowdrace/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "crowdrace/error.hpp"

namespace crowdrace {

void BehaviorPrior::validate() const {
  if (!(gamma_shape > 0.0) || !(gamma_rate > 0.0) || !(halfnormal_sigma > 0.0)) {
    throw ConfigError("behavior prior parameters must be strictly positive");
  }
}

BehaviorDraw draw_behavior(const BehaviorPrior& prior, RandomStream& rng) {
  BehaviorDraw d;
  d.lambda_in = rng.gamma(prior.gamma_shape, prior.gamma_rate);
  d.lambda_out = rng.gamma(prior.gamma_shape, prior.gamma_rate) +
                 rng.half_normal(prior.halfnormal_sigma);
  // A gamma draw can underflow to 0 for tiny shapes; keep rates usable.
  d.lambda_in = std::max(d.lambda_in, std::numeric_limits<double>::min());
  d.lambda_out = std::max(d.lambda_out, std::numeric_limits<double>::min());
  return d;
}

double holding_time(double base_rate, double modulation, RandomStream& rng) {
  const double rate = base_rate * modulation;
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw DomainError("holding_time: rate must be positive and finite");
  }
  return rng.standard_exponential() / rate * 1000.0;
}

Millis holding_time_ms(double rate_per_s, RandomStream& rng) {
  const double ms = std::ceil(holding_time(rate_per_s, 1.0, rng));
  if (ms >= 9.0e15) throw DomainError("holding_time_ms: rate too small");
  return std::max<Millis>(1, static_cast<Millis>(ms));
}

double exit_hazard(bool eligible, std::int32_t rank_gap, double elapsed_fraction,
                   const WorkerProfile& profile, const ExitModel& model,
                   std::int32_t n_workers) {
  if (eligible || model.base_hazard <= 0.0 || n_workers < 1) return 0.0;
  const double gap = std::min(1.0, std::max(0, rank_gap) / static_cast<double>(n_workers));
  const double t = std::clamp(elapsed_fraction, 0.0, 1.0);
  const double h = model.base_hazard * (1.0 - profile.exit_threshold) * gap * t * t;
  return std::clamp(h, 0.0, 1.0);
}

std::string to_string(RateModel m) {
  return m == RateModel::two_state ? "two_state" : "log_linear";
}

RateModel rate_model_from_string(const std::string& s) {
  if (s == "two_state") return RateModel::two_state;
  if (s == "log_linear") return RateModel::log_linear;
  throw ParseError("unknown rate model '" + s + "'");
}

std::int64_t simulate_annotated_count(const Post& post, const WorkerProfile& profile,
                                      RandomStream& rng, double accuracy_floor) {
  const double p_correct = std::clamp(profile.skill + accuracy_floor, 0.0, 1.0);
  if (rng.uniform01() < p_correct) return post.expected_entities;
  if (post.expected_entities == 0) return 1;
  return post.expected_entities + (rng.uniform01() < 0.5 ? -1 : 1);
}

FeatureScale feature_scale(const ContestConfig& config) {
  return {static_cast<double>(config.n_workers),
          static_cast<double>(std::max<Millis>(1, config.duration_ms())),
          static_cast<double>(config.n_posts)};
}

FeatureVector features_of(const AnnotationEvent& e) {
  return {e.rank_at_event, e.event_time_ms - e.holding_time_ms,
          e.annotations_remaining, e.eligible_at_event};
}

Millis checkpoint_time_ms(Millis duration_ms, std::int32_t k, std::int32_t count) {
  return duration_ms * k / count;
}

namespace {

void validate_inputs(const ContestConfig& config,
                     std::span<const WorkerProfile> profiles,
                     std::span<const Post> posts, const SimulationOptions& options) {
  config.validate();
  if (static_cast<std::int64_t>(profiles.size()) != config.n_workers) {
    throw ConfigError("run_contest: expected " + std::to_string(config.n_workers) +
                      " profiles, got " + std::to_string(profiles.size()));
  }
  if (static_cast<std::int64_t>(posts.size()) != config.n_posts) {
    throw ConfigError("run_contest: expected " + std::to_string(config.n_posts) +
                      " posts, got " + std::to_string(posts.size()));
  }
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    profiles[i].validate();
    if (profiles[i].id != static_cast<WorkerId>(i)) {
      throw ConfigError("run_contest: profile ids must be 0..n_workers-1 in order");
    }
    if (options.rate_model == RateModel::log_linear &&
        profiles[i].theta.size() != kFeatureCount) {
      throw ConfigError("run_contest: log-linear model needs " +
                        std::to_string(kFeatureCount) + " coefficients per worker");
    }
  }
  std::set<PostId> ids;
  for (const auto& p : posts) {
    p.validate();
    if (!ids.insert(p.id).second) {
      throw ConfigError("run_contest: duplicate post id " + std::to_string(p.id));
    }
  }
  if (options.exit.checkpoint_count < 1) {
    throw ConfigError("run_contest: checkpoint_count must be >= 1");
  }
  if (!(options.exit.base_hazard >= 0.0)) {
    throw ConfigError("run_contest: base_hazard must be >= 0");
  }
}

struct WorkerState {
  WorkerState(std::uint64_t seed, std::size_t w)
      : holding(derive_seed(seed, "holding", w)),
        labels(derive_seed(seed, "labels", w)),
        exits(derive_seed(seed, "exit", w)) {}

  RandomStream holding;
  RandomStream labels;
  RandomStream exits;
  bool active = true;
  Millis last_event_ms = 0;
  Millis next_event_ms = 0;
  bool scheduled = false;
  std::int64_t next_index = 0;
  FeatureVector interval;
};

}  // namespace

EventLog run_contest(const ContestConfig& config,
                     std::span<const WorkerProfile> profiles,
                     std::span<const Post> posts, std::uint64_t seed,
                     const SimulationOptions& options) {
  validate_inputs(config, profiles, posts, options);

  EventLog log;
  log.config = config;
  log.options = options;
  log.seed = seed;
  log.profiles.assign(profiles.begin(), profiles.end());

  const auto n = static_cast<std::size_t>(config.n_workers);
  const Millis duration = config.duration_ms();
  const FeatureScale scale = feature_scale(config);
  const std::int32_t n_checkpoints = options.exit.checkpoint_count;

  StreamEngine stream(config, std::vector<Post>(posts.begin(), posts.end()));

  std::vector<WorkerState> workers;
  workers.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    workers.emplace_back(seed, w);
  }

  std::vector<RankEntry> standings(n);
  for (std::size_t w = 0; w < n; ++w) standings[w].worker_id = static_cast<WorkerId>(w);
  std::vector<std::int32_t> rank_of(n, 0);
  std::vector<RankEntry> sorted;
  const auto rerank = [&] {
    sorted = standings;
    sort_standings(sorted);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      rank_of[static_cast<std::size_t>(sorted[i].worker_id)] = static_cast<std::int32_t>(i + 1);
    }
  };

  std::set<std::pair<Millis, WorkerId>> agenda;
  const auto rate_for = [&](std::size_t w) {
    const WorkerProfile& p = profiles[w];
    const FeatureVector& f = workers[w].interval;
    if (options.rate_model == RateModel::two_state) {
      return f.eligible ? p.lambda_in : p.lambda_out;
    }
    const DesignRow x = design_row(f, scale);
    return std::exp(std::inner_product(x.begin(), x.end(), p.theta.begin(), 0.0));
  };
  const auto schedule = [&](std::size_t w, Millis from) {
    WorkerState& st = workers[w];
    st.next_event_ms = from + holding_time_ms(rate_for(w), st.holding);
    st.scheduled = true;
    agenda.emplace(st.next_event_ms, static_cast<WorkerId>(w));
  };
  const auto unschedule = [&](std::size_t w) {
    WorkerState& st = workers[w];
    if (st.scheduled) agenda.erase({st.next_event_ms, static_cast<WorkerId>(w)});
    st.scheduled = false;
  };
  const auto active_count = [&] {
    return static_cast<std::int32_t>(
        std::count_if(workers.begin(), workers.end(), [](const auto& s) { return s.active; }));
  };

  rerank();
  for (std::size_t w = 0; w < n; ++w) {
    const std::int32_t r = rank_of[w];
    workers[w].interval = {r, 0, config.n_posts, is_eligible(r, config.reward_spread)};
    schedule(w, 0);
  }

  log.active_at_checkpoint.assign(static_cast<std::size_t>(n_checkpoints) + 1, 0);
  log.active_at_checkpoint[0] = active_count();

  constexpr Millis kNever = std::numeric_limits<Millis>::max();
  std::int32_t next_checkpoint = 1;
  for (;;) {
    const Millis next_event = agenda.empty() ? kNever : agenda.begin()->first;
    const Millis next_mark = next_checkpoint < n_checkpoints
                                 ? checkpoint_time_ms(duration, next_checkpoint, n_checkpoints)
                                 : kNever;
    if (next_event <= next_mark && next_event <= duration) {
      const auto w = static_cast<std::size_t>(agenda.begin()->second);
      agenda.erase(agenda.begin());
      WorkerState& st = workers[w];
      st.scheduled = false;
      const Millis t = next_event;

      stream.advance_to(t);
      const auto taken = stream.take_post(static_cast<WorkerId>(w));
      if (!taken) {
        // Nothing left on offer: wait for the next window with the same
        // interval state; the recorded holding time then spans the wait.
        if (auto reopen = stream.next_open_ms(); reopen && *reopen <= duration) {
          schedule(w, std::max(*reopen, t));
        }
        continue;
      }

      AnnotationEvent e;
      e.worker_id = static_cast<WorkerId>(w);
      e.event_index = st.next_index++;
      e.event_time_ms = t;
      e.holding_time_ms = t - st.last_event_ms;
      e.post_id = taken->post.id;
      e.annotated_count =
          simulate_annotated_count(taken->post, profiles[w], st.labels, options.accuracy_floor);
      e.points = score_annotation(e.annotated_count, taken->post.expected_entities,
                                  config.base_points);
      e.rank_at_event = st.interval.rank;
      e.eligible_at_event = st.interval.eligible;
      e.annotations_remaining = st.interval.annotations_remaining;
      log.events.push_back(e);
      st.last_event_ms = t;

      RankEntry& me = standings[w];
      me.score += static_cast<double>(e.points);
      me.annotations += 1;
      if (e.points > 0) me.tie_break_stamp = t;
      rerank();

      if (!stream.counts().conserved()) {
        throw ContractError("stream conservation violated at t=" + std::to_string(t));
      }

      const std::int32_t r = rank_of[w];
      st.interval = {r, t, config.n_posts - stream.solved_count(),
                     is_eligible(r, config.reward_spread)};
      schedule(w, t);
    } else if (next_mark <= duration && next_checkpoint < n_checkpoints) {
      const double fraction = static_cast<double>(next_mark) / static_cast<double>(duration);
      for (std::size_t w = 0; w < n; ++w) {
        WorkerState& st = workers[w];
        if (!st.active) continue;
        // One draw per active worker per epoch, hazard or not, so that runs
        // differing only in spread stay aligned draw for draw.
        const double u = st.exits.uniform01();
        const std::int32_t r = rank_of[w];
        const bool eligible = is_eligible(r, config.reward_spread);
        const double h = exit_hazard(eligible, r - config.reward_spread - 1, fraction,
                                     profiles[w], options.exit, config.n_workers);
        if (u < h) {
          st.active = false;
          unschedule(w);
          stream.retire_worker(static_cast<WorkerId>(w));
          log.exits.push_back({static_cast<WorkerId>(w), next_mark, r, eligible});
        }
      }
      log.active_at_checkpoint[static_cast<std::size_t>(next_checkpoint)] = active_count();
      ++next_checkpoint;
    } else {
      break;
    }
  }

  stream.flush_through(duration);
  log.final_counts = stream.counts();
  log.active_at_checkpoint[static_cast<std::size_t>(n_checkpoints)] = active_count();
  rerank();
  log.final_ranking.entries = sorted;
  return log;
}

LogCheck verify_event_log(const EventLog& log, std::span<const Post> posts) {
  LogCheck out;
  auto fail = [&](std::string msg) { out.violations.push_back(std::move(msg)); };
  const ContestConfig& cfg = log.config;
  const auto n = static_cast<std::size_t>(cfg.n_workers);
  const Millis duration = cfg.duration_ms();

  std::map<PostId, const Post*> post_by_id;
  for (const auto& p : posts) post_by_id[p.id] = &p;

  std::vector<RankEntry> standings(n);
  for (std::size_t w = 0; w < n; ++w) standings[w].worker_id = static_cast<WorkerId>(w);
  std::vector<std::int32_t> rank_of(n, 0);
  const auto rerank = [&] {
    auto sorted = standings;
    sort_standings(sorted);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      rank_of[static_cast<std::size_t>(sorted[i].worker_id)] = static_cast<std::int32_t>(i + 1);
    }
    return sorted;
  };
  rerank();
  std::vector<std::int32_t> interval_rank = rank_of;
  std::vector<std::int64_t> interval_remaining(n, cfg.n_posts);
  std::vector<std::int64_t> next_index(n, 0);
  std::vector<Millis> last_time(n, 0);
  std::vector<Millis> holding_sum(n, 0);
  std::map<PostId, Millis> first_annotation;

  std::vector<Millis> exit_time(n, std::numeric_limits<Millis>::max());
  for (const auto& x : log.exits) {
    const auto w = static_cast<std::size_t>(x.worker_id);
    if (w >= n) {
      fail("exit for unknown worker");
      continue;
    }
    if (exit_time[w] != std::numeric_limits<Millis>::max()) {
      fail("worker " + std::to_string(w) + " exits twice");
    }
    exit_time[w] = x.exit_time_ms;
  }

  Millis prev_time = 0;
  for (const auto& e : log.events) {
    const auto w = static_cast<std::size_t>(e.worker_id);
    const std::string who = "worker " + std::to_string(w) + " event " +
                            std::to_string(e.event_index) + ": ";
    if (w >= n) {
      fail("event for unknown worker");
      continue;
    }
    if (e.event_time_ms < prev_time) fail(who + "log not sorted by time");
    prev_time = e.event_time_ms;
    if (e.event_time_ms > duration) fail(who + "after contest end");
    if (e.event_index != next_index[w]) fail(who + "index does not increase by one");
    next_index[w] = e.event_index + 1;
    if (e.holding_time_ms < 1) fail(who + "non-positive holding time");
    if (e.event_time_ms != last_time[w] + e.holding_time_ms) {
      fail(who + "event time != previous time + holding time");
    }
    last_time[w] = e.event_time_ms;
    holding_sum[w] += e.holding_time_ms;
    if (e.event_time_ms > exit_time[w]) fail(who + "annotation after exit");
    if (e.rank_at_event != interval_rank[w]) fail(who + "rank does not replay");
    if (e.eligible_at_event != is_eligible(e.rank_at_event, cfg.reward_spread)) {
      fail(who + "eligibility inconsistent with rank");
    }
    if (e.annotations_remaining != interval_remaining[w]) {
      fail(who + "annotations_remaining does not replay");
    }
    const auto pit = post_by_id.find(e.post_id);
    if (pit == post_by_id.end()) {
      fail(who + "unknown post");
    } else if (e.points != score_annotation(e.annotated_count,
                                            pit->second->expected_entities,
                                            cfg.base_points)) {
      fail(who + "points do not match score_annotation");
    }
    first_annotation.emplace(e.post_id, e.event_time_ms);

    RankEntry& me = standings[w];
    me.score += static_cast<double>(e.points);
    me.annotations += 1;
    if (e.points > 0) me.tie_break_stamp = e.event_time_ms;
    rerank();
    interval_rank[w] = rank_of[w];
    interval_remaining[w] = cfg.n_posts - static_cast<std::int64_t>(first_annotation.size());
  }
  for (std::size_t w = 0; w < n; ++w) {
    if (holding_sum[w] != last_time[w]) {
      fail("worker " + std::to_string(w) + ": holding times do not sum to last event time");
    }
  }
  const auto replay_final = rerank();
  if (replay_final != log.final_ranking.entries) fail("final ranking does not replay");

  // Stream conservation from first-annotation times alone.
  const auto windows = build_windows(posts, cfg.window_size, cfg.task_unit_time_s);
  StreamCounts c;
  for (const auto& win : windows) {
    if (win.open_ms > duration) break;
    c.ingested += static_cast<std::int64_t>(win.posts.size());
    const bool closed = win.close_ms <= duration;
    for (const auto& p : win.posts) {
      const auto it = first_annotation.find(p.id);
      if (it != first_annotation.end()) {
        if (it->second <= win.open_ms && win.index > 0) {
          fail("post " + std::to_string(p.id) + " annotated before its window opened");
        }
        if (it->second > win.close_ms) {
          fail("post " + std::to_string(p.id) + " annotated after its window closed");
        }
        ++c.solved;
      } else if (closed) {
        ++c.dropped;
      } else {
        ++c.pending;  // pending + in-assignment, not separable here
      }
    }
  }
  out.replayed_counts = c;
  const StreamCounts& f = log.final_counts;
  if (!f.conserved()) fail("logged stream counts are not conserved");
  if (f.ingested != c.ingested || f.solved != c.solved || f.dropped != c.dropped ||
      f.pending + f.in_assignment != c.pending) {
    fail("stream counts do not replay");
  }

  const auto& active = log.active_at_checkpoint;
  for (std::size_t k = 1; k < active.size(); ++k) {
    if (active[k] > active[k - 1]) fail("active worker count increases over time");
  }
  if (!active.empty() &&
      active.back() != cfg.n_workers - static_cast<std::int32_t>(log.exits.size())) {
    fail("final active count disagrees with exit events");
  }
  return out;
}

}  // namespace crowdrace
