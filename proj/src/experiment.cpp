#include "crowdrace/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "crowdrace/error.hpp"
#include "crowdrace/io.hpp"
#include "json_codec.hpp"

namespace crowdrace {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ConfigError("config: bad value '" + text + "' for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config: bad boolean '" + text + "' for " + key);
}

std::vector<std::int32_t> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<std::int32_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::int32_t>(key, trim(item)));
  if (out.empty()) throw ConfigError("config: empty list for " + key);
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter number_setter(T ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.*field = parse_number<T>(k, v);
  };
}

template <typename T>
Setter contest_setter(T ContestConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.contest.*field = parse_number<T>(k, v);
  };
}

template <typename T>
Setter prior_setter(T BehaviorPrior::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.prior.*field = parse_number<T>(k, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"n_workers", contest_setter(&ContestConfig::n_workers)},
      {"n_posts", contest_setter(&ContestConfig::n_posts)},
      {"window_size", contest_setter(&ContestConfig::window_size)},
      {"task_unit_time_s", contest_setter(&ContestConfig::task_unit_time_s)},
      {"task_unit_size", contest_setter(&ContestConfig::task_unit_size)},
      {"arrival_rate", contest_setter(&ContestConfig::arrival_rate)},
      {"prize_value", contest_setter(&ContestConfig::prize_value)},
      {"base_points", contest_setter(&ContestConfig::base_points)},
      {"leaderboard_k", contest_setter(&ContestConfig::leaderboard_k)},
      {"quality_constraint", contest_setter(&ContestConfig::quality_constraint)},
      {"reduction_rate", contest_setter(&ContestConfig::reduction_rate)},
      {"gamma_shape", prior_setter(&BehaviorPrior::gamma_shape)},
      {"gamma_rate", prior_setter(&BehaviorPrior::gamma_rate)},
      {"halfnormal_sigma", prior_setter(&BehaviorPrior::halfnormal_sigma)},
      {"exit_base_hazard", number_setter(&ExperimentConfig::exit_base_hazard)},
      {"exit_checkpoints", number_setter(&ExperimentConfig::exit_checkpoints)},
      {"accuracy_floor", number_setter(&ExperimentConfig::accuracy_floor)},
      {"skill_min", number_setter(&ExperimentConfig::skill_min)},
      {"skill_max", number_setter(&ExperimentConfig::skill_max)},
      {"cost_per_effort", number_setter(&ExperimentConfig::cost_per_effort)},
      {"exit_threshold_min", number_setter(&ExperimentConfig::exit_threshold_min)},
      {"exit_threshold_max", number_setter(&ExperimentConfig::exit_threshold_max)},
      {"equal_rates",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.equal_rates = parse_bool(k, v);
       }},
      {"spreads",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.spreads = parse_int_list(k, v);
       }},
      {"replications", number_setter(&ExperimentConfig::replications)},
      {"master_seed", number_setter(&ExperimentConfig::master_seed)},
      {"output_dir",
       [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }},
      {"corpus", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.corpus = v; }},
      {"mean_entities", number_setter(&ExperimentConfig::mean_entities)},
  };
  return table;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("experiment config: " + what);
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  const auto res = std::to_chars(buf, buf + 16, h, 16);
  std::string s(buf, res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

SimulationOptions ExperimentConfig::simulation_options() const {
  SimulationOptions o;
  o.exit.base_hazard = exit_base_hazard;
  o.exit.checkpoint_count = exit_checkpoints;
  o.accuracy_floor = accuracy_floor;
  return o;
}

void ExperimentConfig::validate() const {
  contest.validate();
  prior.validate();
  require(std::isfinite(exit_base_hazard) && exit_base_hazard >= 0, "exit_base_hazard must be >= 0");
  require(exit_checkpoints >= 1, "exit_checkpoints must be >= 1");
  require(accuracy_floor >= 0 && accuracy_floor <= 1, "accuracy_floor must lie in [0, 1]");
  require(skill_min >= 0 && skill_min <= skill_max && skill_max <= 1,
          "need 0 <= skill_min <= skill_max <= 1");
  require(std::isfinite(cost_per_effort) && cost_per_effort >= 0, "cost_per_effort must be >= 0");
  require(exit_threshold_min >= 0 && exit_threshold_min <= exit_threshold_max &&
              exit_threshold_max <= 1,
          "need 0 <= exit_threshold_min <= exit_threshold_max <= 1");
  require(!spreads.empty(), "spreads must not be empty");
  for (auto s : spreads) {
    require(s >= 1 && s <= contest.n_workers, "every spread must lie in [1, n_workers]");
  }
  require(replications >= 1, "replications must be >= 1");
  require(!output_dir.empty(), "output_dir must not be empty");
  require(!corpus.empty(), "corpus must be 'generate' or a path");
  require(std::isfinite(mean_entities) && mean_entities > 0, "mean_entities must be > 0");
}

ExperimentConfig full_experiment_config() { return ExperimentConfig{}; }

ExperimentConfig scaled_experiment_config() {
  ExperimentConfig c;
  c.contest.n_workers = 20;
  c.contest.n_posts = 1520;
  c.contest.window_size = 40;
  c.contest.arrival_rate = 4.0;
  return c;
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second(config, key, value);
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  std::size_t line_no = 0;
  bool versioned = false;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    if (key == "format_version") {
      if (parse_number<int>(key, value) != kConfigFormatVersion) {
        throw ConfigError(where + "unsupported format_version " + value);
      }
      versioned = true;
      continue;
    }
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (!versioned) throw ConfigError("config: missing format_version");
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
  const auto d = format_double;
  out << "format_version = " << kConfigFormatVersion << '\n'
      << "n_workers = " << c.contest.n_workers << '\n'
      << "n_posts = " << c.contest.n_posts << '\n'
      << "window_size = " << c.contest.window_size << '\n'
      << "task_unit_time_s = " << d(c.contest.task_unit_time_s) << '\n'
      << "task_unit_size = " << c.contest.task_unit_size << '\n'
      << "arrival_rate = " << d(c.contest.arrival_rate) << '\n'
      << "prize_value = " << d(c.contest.prize_value) << '\n'
      << "base_points = " << c.contest.base_points << '\n'
      << "leaderboard_k = " << c.contest.leaderboard_k << '\n'
      << "quality_constraint = " << c.contest.quality_constraint << '\n'
      << "reduction_rate = " << d(c.contest.reduction_rate) << '\n'
      << "gamma_shape = " << d(c.prior.gamma_shape) << '\n'
      << "gamma_rate = " << d(c.prior.gamma_rate) << '\n'
      << "halfnormal_sigma = " << d(c.prior.halfnormal_sigma) << '\n'
      << "exit_base_hazard = " << d(c.exit_base_hazard) << '\n'
      << "exit_checkpoints = " << c.exit_checkpoints << '\n'
      << "accuracy_floor = " << d(c.accuracy_floor) << '\n'
      << "skill_min = " << d(c.skill_min) << '\n'
      << "skill_max = " << d(c.skill_max) << '\n'
      << "cost_per_effort = " << d(c.cost_per_effort) << '\n'
      << "exit_threshold_min = " << d(c.exit_threshold_min) << '\n'
      << "exit_threshold_max = " << d(c.exit_threshold_max) << '\n'
      << "equal_rates = " << (c.equal_rates ? "true" : "false") << '\n'
      << "spreads = ";
  for (std::size_t i = 0; i < c.spreads.size(); ++i) out << (i ? "," : "") << c.spreads[i];
  out << '\n'
      << "replications = " << c.replications << '\n'
      << "master_seed = " << c.master_seed << '\n'
      << "output_dir = " << c.output_dir << '\n'
      << "corpus = " << c.corpus << '\n'
      << "mean_entities = " << d(c.mean_entities) << '\n';
}

ContestSummary summarize(const EventLog& log) {
  ContestSummary s;
  s.spread = log.config.reward_spread;
  s.seed = log.seed;
  s.total_annotations = static_cast<std::int64_t>(log.events.size());

  std::set<PostId> posts;
  std::set<WorkerId> active;
  double holding_s = 0;
  std::int64_t entities = 0;
  for (const auto& e : log.events) {
    posts.insert(e.post_id);
    active.insert(e.worker_id);
    holding_s += static_cast<double>(e.holding_time_ms) / 1000.0;
    entities += e.annotated_count;
  }
  s.distinct_annotations = static_cast<std::int64_t>(posts.size());
  if (!active.empty()) {
    s.mean_annotations_per_active_worker =
        static_cast<double>(s.total_annotations) / static_cast<double>(active.size());
  }
  if (entities > 0) s.mean_annotation_time_s_per_entity = holding_s / static_cast<double>(entities);
  s.active_at_checkpoint = log.active_at_checkpoint;

  const auto& ranked = log.final_ranking.entries;
  if (!ranked.empty()) s.top1_annotations = ranked.front().annotations;
  for (std::size_t i = 0; i < ranked.size() && i < 10; ++i) s.top10_annotations += ranked[i].annotations;
  s.exits = static_cast<std::int64_t>(log.exits.size());

  s.winners = select_winners(log.final_ranking, log.config.reward_spread,
                             log.config.quality_constraint);
  s.payouts.assign(s.winners.size(), log.config.prize_value);
  s.total_payout = log.config.prize_value * static_cast<double>(s.winners.size());
  return s;
}

std::vector<WorkerTrajectory> race_trajectories(const EventLog& log) {
  std::vector<WorkerTrajectory> out(log.profiles.size());
  for (std::size_t w = 0; w < out.size(); ++w) {
    out[w].worker_id = log.profiles[w].id;
    out[w].points.push_back({0, 0});
  }
  for (const auto& e : log.events) {
    auto& pts = out.at(static_cast<std::size_t>(e.worker_id)).points;
    pts.push_back({e.event_time_ms, pts.back().cumulative + 1});
  }
  return out;
}

std::uint64_t replication_seed(const ExperimentConfig& config, std::int32_t replication) {
  return derive_seed(config.master_seed, "replication", static_cast<std::uint64_t>(replication));
}

std::vector<Post> replication_corpus(const ExperimentConfig& config, std::int32_t replication) {
  if (config.corpus != "generate") {
    std::ifstream in(config.corpus);
    if (!in) throw IoError("cannot open corpus " + config.corpus);
    auto posts = read_corpus(in);
    if (static_cast<std::int64_t>(posts.size()) < config.contest.n_posts) {
      throw ConfigError("corpus " + config.corpus + " has fewer than n_posts posts");
    }
    posts.resize(static_cast<std::size_t>(config.contest.n_posts));
    return posts;
  }
  RandomStream rng(derive_seed(replication_seed(config, replication), "corpus"));
  CorpusSpec spec;
  spec.mean_entities = config.mean_entities;
  return generate_corpus(config.contest.n_posts, rng, spec);
}

std::vector<WorkerProfile> replication_profiles(const ExperimentConfig& config,
                                                std::int32_t replication) {
  const auto base = replication_seed(config, replication);
  std::vector<WorkerProfile> profiles;
  profiles.reserve(static_cast<std::size_t>(config.contest.n_workers));
  for (WorkerId w = 0; w < config.contest.n_workers; ++w) {
    RandomStream rng(derive_seed(base, "profile", static_cast<std::uint64_t>(w)));
    WorkerProfile p;
    p.id = w;
    p.skill = config.skill_min + (config.skill_max - config.skill_min) * rng.uniform01();
    const auto draw = draw_behavior(config.prior, rng);
    p.lambda_in = draw.lambda_in;
    p.lambda_out = config.equal_rates ? draw.lambda_in : draw.lambda_out;
    p.exit_threshold = config.exit_threshold_min +
                       (config.exit_threshold_max - config.exit_threshold_min) * rng.uniform01();
    p.cost_per_effort = config.cost_per_effort;
    profiles.push_back(std::move(p));
  }
  return profiles;
}

ConditionRun run_condition_full(const ExperimentConfig& config, std::int32_t spread,
                                std::int32_t replication, const std::vector<Post>* corpus) {
  config.validate();
  if (replication < 0) throw ConfigError("replication index must be >= 0");
  ContestConfig contest = config.contest;
  contest.reward_spread = spread;
  contest.validate();

  std::vector<Post> own;
  if (corpus == nullptr) {
    own = replication_corpus(config, replication);
    corpus = &own;
  }
  const auto profiles = replication_profiles(config, replication);
  const auto seed = derive_seed(replication_seed(config, replication), "contest");

  ConditionRun run;
  run.summary.spread = spread;
  run.summary.replication = replication;
  run.summary.seed = seed;
  try {
    auto log = run_contest(contest, profiles, *corpus, seed, config.simulation_options());
    const auto check = verify_event_log(log, *corpus);
    if (!check.ok()) throw ContractError("log replay failed: " + check.violations.front());
    run.summary = summarize(log);
    run.summary.replication = replication;
    run.log = std::move(log);
  } catch (const std::exception& e) {
    run.summary.ok = false;
    run.summary.error = e.what();
  }
  return run;
}

ContestSummary run_condition(const ExperimentConfig& config, std::int32_t spread,
                             std::int32_t replication) {
  return run_condition_full(config, spread, replication).summary;
}

SpreadRow spread_row(std::int32_t spread, std::span<const ContestSummary> summaries) {
  SpreadRow row;
  row.spread = spread;
  std::vector<double> total, distinct, per_active, at90;
  for (const auto& s : summaries) {
    if (s.spread != spread) continue;
    if (!s.ok) {
      ++row.failed;
      continue;
    }
    ++row.completed;
    total.push_back(static_cast<double>(s.total_annotations));
    distinct.push_back(static_cast<double>(s.distinct_annotations));
    per_active.push_back(s.mean_annotations_per_active_worker);
    if (s.active_at_checkpoint.size() >= 2) {
      // 90% mark of an evenly spaced grid that includes both ends.
      const auto n = s.active_at_checkpoint.size() - 1;
      at90.push_back(static_cast<double>(s.active_at_checkpoint[(n * 9) / 10]));
    }
  }
  row.mean_total = mean(total);
  row.sd_total = sample_sd(total);
  row.mean_distinct = mean(distinct);
  row.mean_per_active = mean(per_active);
  row.mean_active_at_90 = mean(at90);
  return row;
}

TrendVerdict trend_verdict(const std::vector<std::int32_t>& spreads,
                           std::span<const ContestSummary> summaries, double alpha) {
  TrendVerdict v;
  v.alpha = alpha;
  std::vector<std::int32_t> distinct(spreads.begin(), spreads.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  // totals[spread][replication], first occurrence wins for repeated spreads
  std::map<std::int32_t, std::map<std::int32_t, double>> totals;
  std::int32_t max_reps = 0;
  for (const auto& s : summaries) {
    if (!s.ok) continue;
    totals[s.spread].emplace(s.replication, static_cast<double>(s.total_annotations));
    max_reps = std::max(max_reps, s.replication + 1);
  }
  if (distinct.size() < 2 || max_reps < 2) {
    v.verdict = "not applicable";
    return v;
  }
  v.applicable = true;

  std::vector<std::vector<double>> groups;
  std::vector<double> means;
  for (auto s : distinct) {
    std::vector<double> g;
    for (const auto& [rep, t] : totals[s]) g.push_back(t);
    means.push_back(mean(g));
    groups.push_back(std::move(g));
  }
  v.means_increasing = true;
  for (std::size_t i = 1; i < means.size(); ++i) {
    if (!(means[i] > means[i - 1])) v.means_increasing = false;
  }

  bool all_significant = true;
  for (std::size_t i = 1; i < distinct.size(); ++i) {
    std::vector<double> before, after;
    for (const auto& [rep, t] : totals[distinct[i - 1]]) {
      const auto& next = totals[distinct[i]];
      if (const auto it = next.find(rep); it != next.end()) {
        before.push_back(t);
        after.push_back(it->second);
      }
    }
    PairedTrend p{distinct[i - 1], distinct[i], sign_test_greater(before, after)};
    if (!(p.test.p_value < alpha)) all_significant = false;
    v.pairs.push_back(p);
  }
  v.significant = v.means_increasing && all_significant;

  try {
    v.anova = anova_f(groups);
  } catch (const ConfigError&) {
    v.anova.reset();
  }
  v.verdict = v.significant ? "increasing" : "no significant trend";
  return v;
}

SweepResult sweep(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  SweepResult result;
  result.config = config;

  std::optional<std::vector<Post>> shared_corpus;
  if (config.corpus != "generate") shared_corpus = replication_corpus(config, 0);

  const std::size_t n_spreads = config.spreads.size();
  const std::size_t reps = static_cast<std::size_t>(config.replications);
  const std::size_t n_tasks = n_spreads * reps;
  result.summaries.resize(n_tasks);
  result.trajectories.resize(n_spreads);

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n_tasks, 1)));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n_tasks; i = next++) {
      const std::size_t si = i / reps;
      const auto rep = static_cast<std::int32_t>(i % reps);
      auto run = run_condition_full(config, config.spreads[si], rep,
                                    shared_corpus ? &*shared_corpus : nullptr);
      if (rep == 0) {
        result.trajectories[si].first = config.spreads[si];
        if (run.log) result.trajectories[si].second = race_trajectories(*run.log);
      }
      result.summaries[i] = std::move(run.summary);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  // Per-block rows so a spread listed twice is not counted twice.
  for (std::size_t si = 0; si < n_spreads; ++si) {
    std::span<const ContestSummary> block(result.summaries.data() + si * reps, reps);
    result.rows.push_back(spread_row(config.spreads[si], block));
  }
  for (const auto& s : result.summaries) {
    if (!s.ok) result.partial = true;
  }
  result.trend = trend_verdict(config.spreads, result.summaries);
  return result;
}

namespace {

using codec::Json;

Json summary_json(const ContestSummary& s) {
  Json j;
  j["spread"] = s.spread;
  j["replication"] = s.replication;
  j["seed"] = s.seed;
  j["ok"] = s.ok;
  j["error"] = s.error;
  j["total_annotations"] = s.total_annotations;
  j["distinct_annotations"] = s.distinct_annotations;
  j["mean_annotations_per_active_worker"] = s.mean_annotations_per_active_worker;
  j["active_at_checkpoint"] = s.active_at_checkpoint;
  j["mean_annotation_time_s_per_entity"] = s.mean_annotation_time_s_per_entity;
  j["top1_annotations"] = s.top1_annotations;
  j["top10_annotations"] = s.top10_annotations;
  j["exits"] = s.exits;
  j["winners"] = s.winners;
  j["payouts"] = s.payouts;
  j["total_payout"] = s.total_payout;
  return j;
}

ContestSummary summary_from(const nlohmann::json& j) {
  ContestSummary s;
  j.at("spread").get_to(s.spread);
  j.at("replication").get_to(s.replication);
  j.at("seed").get_to(s.seed);
  j.at("ok").get_to(s.ok);
  j.at("error").get_to(s.error);
  j.at("total_annotations").get_to(s.total_annotations);
  j.at("distinct_annotations").get_to(s.distinct_annotations);
  j.at("mean_annotations_per_active_worker").get_to(s.mean_annotations_per_active_worker);
  j.at("active_at_checkpoint").get_to(s.active_at_checkpoint);
  j.at("mean_annotation_time_s_per_entity").get_to(s.mean_annotation_time_s_per_entity);
  j.at("top1_annotations").get_to(s.top1_annotations);
  j.at("top10_annotations").get_to(s.top10_annotations);
  j.at("exits").get_to(s.exits);
  j.at("winners").get_to(s.winners);
  j.at("payouts").get_to(s.payouts);
  j.at("total_payout").get_to(s.total_payout);
  return s;
}

// Non-finite values have no JSON number form.
Json json_number(double x) {
  if (std::isfinite(x)) return Json(x);
  return Json(format_double(x));
}

std::string anova_status_name(AnovaStatus s) {
  switch (s) {
    case AnovaStatus::ok: return "ok";
    case AnovaStatus::infinite: return "infinite";
    case AnovaStatus::undefined: return "undefined";
  }
  return "ok";
}

std::string sweep_table_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "spread,completed,failed,mean_total,sd_total,mean_distinct,mean_per_active,"
        "mean_active_at_90\n";
  for (const auto& row : r.rows) {
    os << row.spread << ',' << row.completed << ',' << row.failed << ','
       << format_double(row.mean_total) << ',' << format_double(row.sd_total) << ','
       << format_double(row.mean_distinct) << ',' << format_double(row.mean_per_active) << ','
       << format_double(row.mean_active_at_90) << '\n';
  }
  return os.str();
}

std::string exit_curves_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "spread,checkpoint,time_fraction,mean_active,mean_active_fraction\n";
  const std::size_t reps = static_cast<std::size_t>(r.config.replications);
  const double n_workers = r.config.contest.n_workers;
  for (std::size_t si = 0; si < r.config.spreads.size(); ++si) {
    if (r.summaries.size() < (si + 1) * reps) break;
    std::vector<double> sum;
    std::size_t n = 0;
    for (std::size_t k = 0; k < reps; ++k) {
      const auto& s = r.summaries[si * reps + k];
      if (!s.ok) continue;
      if (sum.empty()) sum.assign(s.active_at_checkpoint.size(), 0.0);
      for (std::size_t c = 0; c < sum.size() && c < s.active_at_checkpoint.size(); ++c) {
        sum[c] += s.active_at_checkpoint[c];
      }
      ++n;
    }
    if (n == 0) continue;
    const double marks = static_cast<double>(sum.size() - 1);
    for (std::size_t c = 0; c < sum.size(); ++c) {
      const double avg = sum[c] / static_cast<double>(n);
      os << r.config.spreads[si] << ',' << c << ',' << format_double(static_cast<double>(c) / marks)
         << ',' << format_double(avg) << ',' << format_double(avg / n_workers) << '\n';
    }
  }
  return os.str();
}

std::string trajectories_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "spread,replication,worker_id,time_ms,cumulative_annotations\n";
  for (const auto& [spread, workers] : r.trajectories) {
    for (const auto& w : workers) {
      for (const auto& p : w.points) {
        os << spread << ",0," << w.worker_id << ',' << p.time_ms << ',' << p.cumulative << '\n';
      }
    }
  }
  return os.str();
}

std::string trend_json(const SweepResult& r) {
  const auto& t = r.trend;
  Json j;
  j["applicable"] = t.applicable;
  j["verdict"] = t.verdict;
  j["means_increasing"] = t.means_increasing;
  j["significant"] = t.significant;
  j["alpha"] = t.alpha;
  j["partial"] = r.partial;
  Json means = Json::array();
  for (const auto& row : r.rows) {
    Json m;
    m["spread"] = row.spread;
    m["mean_total"] = row.mean_total;
    m["sd_total"] = row.sd_total;
    means.push_back(m);
  }
  j["means"] = means;
  Json pairs = Json::array();
  for (const auto& p : t.pairs) {
    Json q;
    q["from_spread"] = p.from_spread;
    q["to_spread"] = p.to_spread;
    q["positive"] = p.test.positive;
    q["negative"] = p.test.negative;
    q["ties"] = p.test.ties;
    q["p_value"] = p.test.p_value;
    pairs.push_back(q);
  }
  j["sign_tests"] = pairs;
  if (t.anova) {
    Json a;
    a["f"] = json_number(t.anova->f);
    a["df_between"] = t.anova->df_between;
    a["df_within"] = t.anova->df_within;
    a["status"] = anova_status_name(t.anova->status);
    j["anova"] = a;
  } else {
    j["anova"] = nullptr;
  }
  return j.dump(2) + "\n";
}

}  // namespace

void write_summaries(std::ostream& out, std::span<const ContestSummary> summaries) {
  for (const auto& s : summaries) out << summary_json(s).dump() << '\n';
}

std::vector<ContestSummary> read_summaries(std::istream& in) {
  std::vector<ContestSummary> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(summary_from(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError("summaries line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Manifest emit_outputs(const SweepResult& result, std::span<const FittedBehavior> fits,
                      const std::filesystem::path& output_dir) {
  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, std::string>> files;
  {
    std::ostringstream cfg;
    write_config(cfg, result.config);
    files.emplace_back("config.cfg", cfg.str());
  }
  files.emplace_back("sweep_table.csv", sweep_table_csv(result));
  {
    std::ostringstream os;
    write_summaries(os, result.summaries);
    files.emplace_back("summaries.jsonl", os.str());
  }
  files.emplace_back("exit_curves.csv", exit_curves_csv(result));
  files.emplace_back("trajectories.csv", trajectories_csv(result));
  files.emplace_back("trend.json", trend_json(result));
  if (!fits.empty()) {
    std::ostringstream os;
    write_fitted(os, fits);
    files.emplace_back("fitted.jsonl", os.str());
  }

  Manifest manifest;
  for (const auto& [name, body] : files) {
    manifest.files.push_back({name, body.size(), hash_hex(fnv1a64(body))});
  }
  std::sort(manifest.files.begin(), manifest.files.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.file < b.file; });
  std::string listing;
  for (const auto& e : manifest.files) listing += e.file + '\t' + e.fnv1a64 + '\n';
  manifest.tree_hash = hash_hex(fnv1a64(listing));

  Json mj;
  mj["format"] = "crowdrace-manifest";
  mj["version"] = 1;
  Json entries = Json::array();
  for (const auto& e : manifest.files) {
    Json f;
    f["file"] = e.file;
    f["bytes"] = e.bytes;
    f["fnv1a64"] = e.fnv1a64;
    entries.push_back(f);
  }
  mj["files"] = entries;
  mj["tree_hash"] = manifest.tree_hash;
  files.emplace_back("manifest.json", mj.dump(2) + "\n");

  std::vector<fs::path> written;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
  };
  try {
    fs::create_directories(output_dir);
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("cannot create output directory: ") + e.what());
  }
  for (const auto& [name, body] : files) {
    const auto path = output_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (out) {
      written.push_back(path);
      out << body;
      out.flush();
    }
    if (!out) {
      cleanup();
      throw IoError("cannot write " + path.string());
    }
  }
  return manifest;
}

}  // namespace crowdrace
