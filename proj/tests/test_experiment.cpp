#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "crowdrace/corpus.hpp"
#include "crowdrace/error.hpp"
#include "crowdrace/experiment.hpp"
#include "crowdrace/io.hpp"

using namespace crowdrace;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  auto c = scaled_experiment_config();
  c.replications = 3;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("crowdrace_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("generate_corpus") {
  RandomStream rng(101);
  const auto posts = generate_corpus(100000, rng);
  double entities = 0;
  for (const auto& p : posts) {
    CHECK(p.token_count >= 5);
    CHECK(p.token_count <= 30);
    CHECK(p.expected_entities <= p.token_count);
    entities += p.expected_entities;
  }
  const double m = entities / 1e5;
  CHECK(m >= 1.15);
  CHECK(m <= 1.25);

  RandomStream one(102);
  const auto single = generate_corpus(1, one);
  REQUIRE(single.size() == 1);
  CHECK_NOTHROW(single[0].validate());

  RandomStream capped(103);
  CorpusSpec spec;
  spec.mean_entities = 8.0;
  spec.min_tokens = spec.max_tokens = 5;
  for (const auto& p : generate_corpus(100000, capped, spec)) CHECK(p.expected_entities <= 5);

  RandomStream a(104), b(104);
  CHECK(generate_corpus(50, a) == generate_corpus(50, b));
  RandomStream bad(105);
  CHECK_THROWS_AS(generate_corpus(0, bad), ConfigError);
}

TEST_CASE("config text round-trips and rejects typos") {
  auto c = tiny_config();
  c.spreads = {1, 3, 7};
  c.equal_rates = true;
  c.prior.halfnormal_sigma = 0.1 + 0.2;  // not exactly representable in short decimal
  std::ostringstream out;
  write_config(out, c);
  std::istringstream in(out.str());
  CHECK(parse_config(in) == c);

  std::istringstream typo("format_version = 1\nn_wrokers = 5\n");
  CHECK_THROWS_AS(parse_config(typo), ConfigError);
  std::istringstream unversioned("n_workers = 5\n");
  CHECK_THROWS_AS(parse_config(unversioned), ConfigError);
  std::istringstream future("format_version = 2\n");
  CHECK_THROWS_AS(parse_config(future), ConfigError);
  std::istringstream junk("format_version = 1\nreplications = many\n");
  CHECK_THROWS_AS(parse_config(junk), ConfigError);
  std::istringstream dup("format_version = 1\nreplications = 2\nreplications = 3\n");
  CHECK_THROWS_AS(parse_config(dup), ConfigError);
  std::istringstream comments("# note\nformat_version = 1  # trailing\n\nreplications = 4\n");
  CHECK(parse_config(comments).replications == 4);
}

TEST_CASE("config validation") {
  auto c = tiny_config();
  CHECK_NOTHROW(c.validate());
  c.replications = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.spreads = {1, 21};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.spreads.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.skill_min = 0.8;
  c.skill_max = 0.2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  CHECK_THROWS_AS(run_condition(c, 0, 0), ConfigError);
}

TEST_CASE("full-size contest lasts 380 s") {
  const auto c = full_experiment_config();
  CHECK(c.contest.duration_ms() == 380000);
  CHECK(scaled_experiment_config().contest.duration_ms() == 380000);
}

TEST_CASE("run_condition") {
  const auto c = tiny_config();
  SUBCASE("deterministic per triple") {
    const auto a = run_condition(c, 5, 1), b = run_condition(c, 5, 1);
    CHECK(a == b);
    std::ostringstream sa, sb;
    write_summaries(sa, std::span<const ContestSummary>(&a, 1));
    write_summaries(sb, std::span<const ContestSummary>(&b, 1));
    CHECK(sa.str() == sb.str());
    CHECK_FALSE(run_condition(c, 5, 2) == a);
  }
  SUBCASE("summary invariants") {
    for (std::int32_t s : {1, 5, 10}) {
      const auto run = run_condition_full(c, s, 0);
      REQUIRE(run.summary.ok);
      const auto& sum = run.summary;
      CHECK(sum.distinct_annotations <= sum.total_annotations);
      CHECK(sum.active_at_checkpoint.size() == 21);
      for (std::size_t k = 1; k < sum.active_at_checkpoint.size(); ++k) {
        CHECK(sum.active_at_checkpoint[k] <= sum.active_at_checkpoint[k - 1]);
      }
      CHECK(sum.total_annotations == static_cast<std::int64_t>(run.log->events.size()));
      std::int64_t per_worker = 0;
      for (const auto& e : run.log->final_ranking.entries) per_worker += e.annotations;
      CHECK(per_worker == sum.total_annotations);
      std::int64_t qualified = 0;
      for (const auto& e : run.log->final_ranking.entries) {
        qualified += e.annotations >= c.contest.quality_constraint;
      }
      CHECK(sum.total_payout ==
            doctest::Approx(c.contest.prize_value * std::min<std::int64_t>(s, qualified)));
      CHECK(sum.winners.size() == sum.payouts.size());
      CHECK(sum.top1_annotations <= sum.top10_annotations);
    }
  }
  SUBCASE("spread equal to the worker count: nobody leaves") {
    auto big = c;
    big.exit_base_hazard = 50;
    big.spreads = {20};
    const auto run = run_condition_full(big, 20, 0);
    REQUIRE(run.summary.ok);
    CHECK(run.summary.exits == 0);
    for (const auto& e : run.log->events) CHECK(e.eligible_at_event);
  }
  SUBCASE("common random numbers across spreads") {
    CHECK(replication_profiles(c, 2) == replication_profiles(c, 2));
    CHECK(replication_corpus(c, 2) == replication_corpus(c, 2));
    CHECK(run_condition(c, 1, 2).seed == run_condition(c, 10, 2).seed);
  }
  SUBCASE("file corpus") {
    const auto dir = scratch("corpus");
    fs::create_directories(dir);
    auto posts = replication_corpus(c, 0);
    {
      std::ofstream out(dir / "corpus.jsonl");
      write_corpus(out, posts);
    }
    auto fc = c;
    fc.corpus = (dir / "corpus.jsonl").string();
    CHECK(replication_corpus(fc, 3) == posts);
    CHECK(run_condition(fc, 1, 0).ok);
    fc.contest.n_posts = 2000;
    fc.contest.window_size = 40;
    CHECK_THROWS_AS(run_condition(fc, 1, 0), ConfigError);
    fs::remove_all(dir);
  }
}

TEST_CASE("race trajectories are monotone") {
  const auto run = run_condition_full(tiny_config(), 5, 0);
  const auto traj = race_trajectories(*run.log);
  CHECK(traj.size() == 20);
  for (const auto& w : traj) {
    for (std::size_t i = 1; i < w.points.size(); ++i) {
      CHECK(w.points[i].time_ms >= w.points[i - 1].time_ms);
      CHECK(w.points[i].cumulative == w.points[i - 1].cumulative + 1);
    }
  }
}

TEST_CASE("trend verdict") {
  auto mk = [](std::int32_t spread, std::int32_t rep, std::int64_t total) {
    ContestSummary s;
    s.spread = spread;
    s.replication = rep;
    s.total_annotations = total;
    return s;
  };
  SUBCASE("single spread is not applicable") {
    const std::vector<ContestSummary> v{mk(5, 0, 10), mk(5, 1, 11), mk(5, 0, 10), mk(5, 1, 11)};
    CHECK(trend_verdict({5, 5}, v).verdict == "not applicable");
    CHECK_FALSE(trend_verdict({5, 5}, v).applicable);
  }
  SUBCASE("one replication is not applicable") {
    const std::vector<ContestSummary> v{mk(1, 0, 10), mk(5, 0, 20)};
    CHECK_FALSE(trend_verdict({1, 5}, v).applicable);
  }
  SUBCASE("consistent increase") {
    std::vector<ContestSummary> v;
    for (std::int32_t r = 0; r < 8; ++r) {
      v.push_back(mk(1, r, 100 + r));
      v.push_back(mk(5, r, 110 + r));
    }
    const auto t = trend_verdict({5, 1}, v);
    CHECK(t.significant);
    CHECK(t.verdict == "increasing");
    REQUIRE(t.pairs.size() == 1);
    CHECK(t.pairs[0].from_spread == 1);
    CHECK(t.pairs[0].test.p_value == doctest::Approx(1.0 / 256));
    REQUIRE(t.anova);
  }
  SUBCASE("failed replications are left out") {
    std::vector<ContestSummary> v;
    for (std::int32_t r = 0; r < 8; ++r) {
      v.push_back(mk(1, r, 100));
      v.push_back(mk(5, r, 120));
    }
    v[0].ok = false;
    const auto t = trend_verdict({1, 5}, v);
    CHECK(t.pairs[0].test.positive == 7);
  }
}

TEST_CASE("sweep and outputs") {
  auto c = tiny_config();
  const auto r1 = sweep(c, 1);
  const auto r2 = sweep(c, 3);
  CHECK(r1.summaries == r2.summaries);
  CHECK(r1.summaries.size() == 9);
  CHECK(r1.rows.size() == 3);
  CHECK_FALSE(r1.partial);

  const auto d1 = scratch("sweep1"), d2 = scratch("sweep2");
  const auto m1 = emit_outputs(r1, {}, d1);
  const auto m2 = emit_outputs(r2, {}, d2);
  CHECK(m1.tree_hash == m2.tree_hash);
  for (const auto& f : m1.files) {
    CHECK(slurp(d1 / f.file) == slurp(d2 / f.file));
    CHECK(hash_hex(fnv1a64(slurp(d1 / f.file))) == f.fnv1a64);
  }
  CHECK(fs::exists(d1 / "manifest.json"));

  std::ifstream in(d1 / "summaries.jsonl");
  CHECK(read_summaries(in) == r1.summaries);

  std::ifstream curves(d1 / "exit_curves.csv");
  std::string line;
  std::getline(curves, line);
  CHECK(line == "spread,checkpoint,time_fraction,mean_active,mean_active_fraction");
  int rows = 0;
  double prev = 1e9;
  std::int32_t prev_spread = -1;
  while (std::getline(curves, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const auto spread = std::stoi(cells[0]);
    const double active = std::stod(cells[3]);
    if (spread == prev_spread) CHECK(active <= prev);
    prev = active;
    prev_spread = spread;
  }
  CHECK(rows == 63);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("empty sweep writes header-only files") {
  SweepResult empty;
  empty.config = tiny_config();
  const auto dir = scratch("empty");
  const auto m = emit_outputs(empty, {}, dir);
  CHECK(slurp(dir / "sweep_table.csv").find('\n') == slurp(dir / "sweep_table.csv").size() - 1);
  CHECK(slurp(dir / "summaries.jsonl").empty());
  CHECK(m.files.size() == 6);
  fs::remove_all(dir);
}

TEST_CASE("emit_outputs cleans up after an I/O failure") {
  const auto dir = scratch("blocked");
  fs::create_directories(dir);
  // A directory where a file should go makes that write fail.
  fs::create_directories(dir / "trend.json");
  SweepResult r;
  r.config = tiny_config();
  CHECK_THROWS_AS(emit_outputs(r, {}, dir), IoError);
  CHECK_FALSE(fs::exists(dir / "sweep_table.csv"));
  CHECK_FALSE(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("null configuration shows no trend") {
  auto c = tiny_config();
  c.exit_base_hazard = 0;
  c.equal_rates = true;
  c.replications = 4;
  const auto r = sweep(c, 1);
  CHECK(r.trend.applicable);
  CHECK_FALSE(r.trend.significant);
  for (const auto& p : r.trend.pairs) CHECK(p.test.p_value >= 0.05);
}
