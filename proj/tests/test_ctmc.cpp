#include <doctest.h>

#include <map>

#include "crowdrace/corpus.hpp"
#include "crowdrace/ctmc.hpp"
#include "crowdrace/error.hpp"
#include "crowdrace/io.hpp"
#include "crowdrace/stats.hpp"

using namespace crowdrace;

namespace {

ContestConfig small_config(std::int32_t workers = 5, std::int32_t spread = 2) {
  ContestConfig c;
  c.n_workers = workers;
  c.n_posts = 100;
  c.window_size = 20;
  c.task_unit_time_s = 10;
  c.task_unit_size = 4;
  c.arrival_rate = 0.1;
  c.reward_spread = spread;
  return c;
}

std::vector<WorkerProfile> profiles(std::int32_t n, double lin = 1.0, double lout = 1.0,
                                    double skill = 0.7) {
  std::vector<WorkerProfile> v;
  for (WorkerId w = 0; w < n; ++w) {
    WorkerProfile p;
    p.id = w;
    p.skill = skill;
    p.lambda_in = lin;
    p.lambda_out = lout;
    v.push_back(p);
  }
  return v;
}

std::vector<Post> corpus(std::int64_t n, std::uint64_t seed = 3) {
  RandomStream rng(seed);
  return generate_corpus(n, rng);
}

}  // namespace

TEST_CASE("exit_hazard shape") {
  WorkerProfile p;
  ExitModel m{0.5, 20};
  CHECK(exit_hazard(true, 10, 0.9, p, m, 20) == 0.0);
  CHECK(exit_hazard(false, 0, 0.5, p, m, 20) == 0.0);
  CHECK(exit_hazard(false, 10, 0.0, p, m, 20) == 0.0);
  CHECK(exit_hazard(false, 10, 0.5, p, m, 20) == doctest::Approx(0.5 * 0.5 * 0.25));
  CHECK(exit_hazard(false, 40, 1.0, p, m, 20) == doctest::Approx(0.5));
  for (int gap = 0; gap < 30; ++gap) {
    for (int k = 0; k < 20; ++k) {
      const double f = k / 20.0;
      CHECK(exit_hazard(false, gap + 1, f, p, m, 20) >= exit_hazard(false, gap, f, p, m, 20));
      CHECK(exit_hazard(false, gap, f + 0.05, p, m, 20) >= exit_hazard(false, gap, f, p, m, 20));
    }
  }
  CHECK(exit_hazard(false, 100, 1.0, p, ExitModel{5.0, 20}, 20) == 1.0);
  p.exit_threshold = 1.0;
  CHECK(exit_hazard(false, 10, 0.9, p, m, 20) == 0.0);
  CHECK(exit_hazard(false, 10, 0.9, WorkerProfile{}, ExitModel{}, 20) == 0.0);
}

TEST_CASE("simulate_annotated_count") {
  const Post post{0, 20, 3, 0};
  WorkerProfile p;
  RandomStream rng(51);

  p.skill = 1.0;
  for (int i = 0; i < 1000; ++i) CHECK(simulate_annotated_count(post, p, rng) == 3);

  p.skill = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto k = simulate_annotated_count(post, p, rng);
    CHECK(k != 3);
    CHECK(k >= 0);
  }

  p.skill = 0.5;
  int exact = 0;
  for (int i = 0; i < 100000; ++i) exact += simulate_annotated_count(post, p, rng) == 3;
  CHECK(exact / 1e5 == doctest::Approx(0.5).epsilon(0.02));

  p.skill = 0.0;
  int floored = 0;
  for (int i = 0; i < 1000; ++i) floored += simulate_annotated_count(post, p, rng, 1.0) == 3;
  CHECK(floored == 1000);
}

TEST_CASE("run_contest logs are deterministic and replay cleanly") {
  const auto cfg = small_config();
  const auto posts = corpus(cfg.n_posts);
  const auto prof = profiles(cfg.n_workers, 1.3, 0.8);
  SimulationOptions opts;
  opts.exit.base_hazard = 2.0;

  const auto a = run_contest(cfg, prof, posts, 77, opts);
  const auto b = run_contest(cfg, prof, posts, 77, opts);
  CHECK(serialize_event_log(a) == serialize_event_log(b));
  CHECK(serialize_event_log(a) != serialize_event_log(run_contest(cfg, prof, posts, 78, opts)));

  const auto check = verify_event_log(a, posts);
  for (const auto& v : check.violations) MESSAGE(v);
  CHECK(check.ok());
  CHECK(check.replayed_counts.conserved());
  CHECK(a.active_at_checkpoint.size() == 21);

  std::map<WorkerId, Millis> last, sum;
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    const auto& e = a.events[i];
    if (i > 0) CHECK(a.events[i - 1].event_time_ms <= e.event_time_ms);
    CHECK(e.holding_time_ms >= 1);
    CHECK(e.eligible_at_event == is_eligible(e.rank_at_event, cfg.reward_spread));
    sum[e.worker_id] += e.holding_time_ms;
    last[e.worker_id] = e.event_time_ms;
  }
  for (const auto& [w, t] : last) CHECK(sum[w] == t);
  for (const auto& x : a.exits) {
    for (const auto& e : a.events) {
      if (e.worker_id == x.worker_id) CHECK(e.event_time_ms <= x.exit_time_ms);
    }
  }
}

TEST_CASE("replay catches a tampered log") {
  const auto cfg = small_config();
  const auto posts = corpus(cfg.n_posts);
  auto log = run_contest(cfg, profiles(cfg.n_workers), posts, 5);
  REQUIRE(log.events.size() > 3);
  SUBCASE("holding time") {
    log.events[2].holding_time_ms += 1;
    CHECK_FALSE(verify_event_log(log, posts).ok());
  }
  SUBCASE("eligibility") {
    log.events[2].eligible_at_event = !log.events[2].eligible_at_event;
    CHECK_FALSE(verify_event_log(log, posts).ok());
  }
  SUBCASE("points") {
    log.events[1].points += 10;
    CHECK_FALSE(verify_event_log(log, posts).ok());
  }
  SUBCASE("checkpoint counts") {
    log.active_at_checkpoint.back() += 1;
    CHECK_FALSE(verify_event_log(log, posts).ok());
  }
}

TEST_CASE("degenerate contests") {
  SUBCASE("one worker, spread one: always eligible") {
    auto cfg = small_config(1, 1);
    cfg.arrival_rate = 0.05;
    const auto posts = corpus(cfg.n_posts);
    const auto log = run_contest(cfg, profiles(1, 2.0, 0.5), posts, 9);
    REQUIRE_FALSE(log.events.empty());
    for (const auto& e : log.events) CHECK(e.eligible_at_event);
  }
  SUBCASE("spread equal to the worker count: no exits") {
    const auto cfg = small_config(5, 5);
    SimulationOptions opts;
    opts.exit.base_hazard = 100.0;
    const auto log = run_contest(cfg, profiles(5), corpus(cfg.n_posts), 10, opts);
    CHECK(log.exits.empty());
    for (const auto& e : log.events) CHECK(e.eligible_at_event);
    CHECK(log.active_at_checkpoint.back() == 5);
  }
}

TEST_CASE("run_contest rejects bad input before simulating") {
  auto cfg = small_config();
  const auto posts = corpus(cfg.n_posts);
  CHECK_THROWS_AS(run_contest(cfg, profiles(4), posts, 1), ConfigError);
  CHECK_THROWS_AS(run_contest(cfg, profiles(5), corpus(99), 1), ConfigError);
  auto bad = profiles(5);
  bad[1].id = 7;
  CHECK_THROWS_AS(run_contest(cfg, bad, posts, 1), ConfigError);
  bad = profiles(5);
  bad[0].skill = 2;
  CHECK_THROWS_AS(run_contest(cfg, bad, posts, 1), ConfigError);
  SimulationOptions ll;
  ll.rate_model = RateModel::log_linear;
  CHECK_THROWS_AS(run_contest(cfg, profiles(5), posts, 1, ll), ConfigError);
  cfg.reward_spread = 6;
  CHECK_THROWS_AS(run_contest(cfg, profiles(5), posts, 1), ConfigError);
}

TEST_CASE("race trajectories for five workers") {
  // Five workers, 100 posts, 200 ticks of 1 s.
  ContestConfig cfg;
  cfg.n_workers = 5;
  cfg.n_posts = 100;
  cfg.window_size = 10;
  cfg.task_unit_time_s = 20;
  cfg.task_unit_size = 2;
  cfg.arrival_rate = 0.05;
  cfg.reward_spread = 2;
  REQUIRE(cfg.duration_ms() == 200000);
  RandomStream rng(52);
  std::vector<WorkerProfile> prof;
  for (WorkerId w = 0; w < 5; ++w) {
    const auto d = draw_behavior(BehaviorPrior{9, 8, 0.3}, rng);
    WorkerProfile p;
    p.id = w;
    p.lambda_in = d.lambda_in;
    p.lambda_out = d.lambda_out;
    prof.push_back(p);
  }
  const auto log = run_contest(cfg, prof, corpus(100), 53);
  std::map<WorkerId, std::int64_t> counts;
  for (const auto& e : log.events) {
    CHECK(e.event_index == counts[e.worker_id]);
    ++counts[e.worker_id];
  }
  CHECK(counts.size() == 5);
  CHECK(verify_event_log(log, corpus(100)).ok());
}

TEST_CASE("log-linear rate model") {
  const auto cfg = small_config();
  auto prof = profiles(cfg.n_workers);
  for (auto& p : prof) p.theta = {0.1, -0.2, 0.3, 0.0, 0.4};
  SimulationOptions opts;
  opts.rate_model = RateModel::log_linear;
  const auto posts = corpus(cfg.n_posts);
  const auto log = run_contest(cfg, prof, posts, 54, opts);
  CHECK_FALSE(log.events.empty());
  CHECK(verify_event_log(log, posts).ok());
  CHECK(rate_model_from_string(to_string(RateModel::log_linear)) == RateModel::log_linear);
  CHECK_THROWS_AS(rate_model_from_string("mixture"), ParseError);
}

TEST_CASE("symmetric workers win equally often") {
  const auto cfg = small_config(2, 1);
  const auto prof = profiles(2, 1.0, 1.0, 0.6);
  int wins0 = 0;
  const int seeds = 1000;
  for (int s = 0; s < seeds; ++s) {
    // Posts are binned round-robin, so a fixed corpus would hand worker 0 the
    // same half every time. Draw a fresh one per seed.
    const auto posts = corpus(cfg.n_posts, 1000 + static_cast<std::uint64_t>(s));
    const auto log = run_contest(cfg, prof, posts, static_cast<std::uint64_t>(s));
    wins0 += log.final_ranking.entries.front().worker_id == 0;
  }
  // Two-sided binomial check at about 3.3 sigma.
  CHECK(std::abs(wins0 - seeds / 2) < 53);
}

TEST_CASE("dominant rates give more annotations") {
  const auto cfg = small_config(2, 1);
  const auto posts = corpus(cfg.n_posts);
  auto prof = profiles(2, 1.0, 1.0);
  prof[0].lambda_in = 1.4;
  prof[0].lambda_out = 1.3;
  prof[1].lambda_in = 1.0;
  prof[1].lambda_out = 0.9;
  std::vector<double> slow, fast;
  for (int s = 0; s < 500; ++s) {
    const auto log = run_contest(cfg, prof, posts, static_cast<std::uint64_t>(1000 + s));
    std::int64_t n0 = 0, n1 = 0;
    for (const auto& e : log.events) (e.worker_id == 0 ? n0 : n1) += 1;
    fast.push_back(static_cast<double>(n0));
    slow.push_back(static_cast<double>(n1));
  }
  CHECK(mean(fast) > mean(slow));
  CHECK(sign_test_greater(slow, fast).p_value < 0.05);
}

TEST_CASE("checkpoint times") {
  CHECK(checkpoint_time_ms(380000, 0, 20) == 0);
  CHECK(checkpoint_time_ms(380000, 18, 20) == 342000);
  CHECK(checkpoint_time_ms(380000, 20, 20) == 380000);
}
