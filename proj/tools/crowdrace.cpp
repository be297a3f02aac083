// Command-line front end: simulate, sweep, fit, recover, gen-corpus.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "crowdrace/corpus.hpp"
#include "crowdrace/error.hpp"
#include "crowdrace/experiment.hpp"
#include "crowdrace/inference.hpp"
#include "crowdrace/io.hpp"

namespace fs = std::filesystem;
using namespace crowdrace;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
  bool scaled = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--config", c.config_path, "Experiment config file (key = value)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--set", c.overrides, "Override a config field, key=value (repeatable)");
  cmd->add_flag("--scaled", c.scaled, "Start from the 20-worker preset instead of the full contest");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty()
                             ? (c.scaled ? scaled_experiment_config() : full_experiment_config())
                             : load_config(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.master_seed = *c.seed;
  cfg.validate();
  return cfg;
}

// --out picks where files go without touching the recorded config, so runs
// written to different places stay byte-identical.
fs::path output_dir(const Common& c, const ExperimentConfig& cfg) {
  return c.out.empty() ? fs::path(cfg.output_dir) : fs::path(c.out);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void print_summary(const ContestSummary& s) {
  std::cout << "spread " << s.spread << " replication " << s.replication << ": total "
            << s.total_annotations << ", distinct " << s.distinct_annotations << ", exits "
            << s.exits << ", active at end "
            << (s.active_at_checkpoint.empty() ? 0 : s.active_at_checkpoint.back())
            << ", payout " << format_double(s.total_payout) << '\n';
}

int run_simulate(const Common& c, std::optional<std::int32_t> spread, std::int32_t replication) {
  const auto cfg = resolve(c);
  const std::int32_t s = spread.value_or(cfg.spreads.front());
  auto run = run_condition_full(cfg, s, replication);
  if (!run.summary.ok) throw std::runtime_error("simulation failed: " + run.summary.error);
  const fs::path dir = output_dir(c, cfg);
  {
    auto out = open_out(dir / "event_log.jsonl");
    write_event_log(out, *run.log);
  }
  {
    auto out = open_out(dir / "summary.jsonl");
    write_summaries(out, std::span<const ContestSummary>(&run.summary, 1));
  }
  print_summary(run.summary);
  return 0;
}

int run_sweep(const Common& c, std::optional<std::int32_t> reps,
              std::vector<std::int32_t> spreads, unsigned threads) {
  auto cfg = resolve(c);
  if (reps) cfg.replications = *reps;
  if (!spreads.empty()) cfg.spreads = spreads;
  cfg.validate();
  const auto result = sweep(cfg, threads);
  const auto manifest = emit_outputs(result, {}, output_dir(c, cfg));
  for (const auto& row : result.rows) {
    std::cout << "spread " << row.spread << ": mean total " << format_double(row.mean_total)
              << " (sd " << format_double(row.sd_total) << ", n " << row.completed;
    if (row.failed) std::cout << ", failed " << row.failed;
    std::cout << ")\n";
  }
  std::cout << "trend: " << result.trend.verdict << '\n'
            << "manifest " << manifest.tree_hash << '\n';
  if (result.partial) std::cerr << "crowdrace: warning: some replications failed\n";
  return 0;
}

int run_fit(const Common& c, const std::string& log_path, const std::string& model_name) {
  std::ifstream in(log_path);
  if (!in) throw IoError("cannot open event log " + log_path);
  const auto log = read_event_log(in);
  const auto fits = fit_event_log(log, rate_model_from_string(model_name));
  const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
  auto out = open_out(dir / "fitted.jsonl");
  write_fitted(out, fits);
  for (const auto& f : fits) {
    if (f.model_kind == RateModel::log_linear) {
      std::cout << "worker " << f.worker_id << ": theta";
      for (double t : f.theta_hat) std::cout << ' ' << format_double(t);
      std::cout << (f.converged ? "" : " (not converged)") << '\n';
      continue;
    }
    std::cout << "worker " << f.worker_id << ": in "
              << (f.lambda_in_hat ? format_double(*f.lambda_in_hat) : "n/a") << " ("
              << f.n_events_in << "), out "
              << (f.lambda_out_hat ? format_double(*f.lambda_out_hat) : "n/a") << " ("
              << f.n_events_out << ")\n";
  }
  return 0;
}

int run_recover(const Common& c, std::int64_t n_seeds, std::int64_t events) {
  if (n_seeds < 1) throw ConfigError("--seeds must be >= 1");
  auto options = recovery_fixture();
  options.n_events_target = events;
  const std::uint64_t base = c.seed.value_or(1);
  std::vector<std::uint64_t> seeds;
  for (std::int64_t i = 0; i < n_seeds; ++i) {
    seeds.push_back(derive_seed(base, "recover", static_cast<std::uint64_t>(i)));
  }
  const auto report = recovery_experiment(options, seeds);
  auto stats = [](const RateErrorStats& s) {
    nlohmann::ordered_json j;
    j["identified"] = s.identified;
    j["unidentified"] = s.unidentified;
    j["mean_rel_error"] = s.mean_rel_error;
    j["max_rel_error"] = s.max_rel_error;
    return j;
  };
  nlohmann::ordered_json j;
  j["seeds"] = n_seeds;
  j["n_events_target"] = events;
  j["worker0_lambda_in"] = stats(report.worker0_in);
  j["worker0_lambda_out"] = stats(report.worker0_out);
  j["lambda_in"] = stats(report.lambda_in);
  j["lambda_out"] = stats(report.lambda_out);
  const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
  auto out = open_out(dir / "recovery.json");
  out << j.dump(2) << '\n';
  std::cout << "worker 0 mean relative error: lambda_in "
            << format_double(report.worker0_in.mean_rel_error) << ", lambda_out "
            << format_double(report.worker0_out.mean_rel_error) << '\n';
  return 0;
}

int run_gen_corpus(const Common& c, std::optional<std::int64_t> n_posts) {
  const auto cfg = resolve(c);
  RandomStream rng(derive_seed(cfg.master_seed, "corpus-file"));
  CorpusSpec spec;
  spec.mean_entities = cfg.mean_entities;
  const auto posts = generate_corpus(n_posts.value_or(cfg.contest.n_posts), rng, spec);
  auto out = open_out(output_dir(c, cfg) / "corpus.jsonl");
  write_corpus(out, posts);
  std::cout << "wrote " << posts.size() << " posts\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowdsourcing contest simulator and reward-spread experiments"};
  app.require_subcommand(1);

  Common c_sim, c_sweep, c_fit, c_rec, c_gen;

  auto* sim = app.add_subcommand("simulate", "Run a single contest");
  add_common(sim, c_sim);
  std::optional<std::int32_t> sim_spread;
  std::int32_t sim_rep = 0;
  sim->add_option("--spread", sim_spread, "Reward spread (default: first configured)");
  sim->add_option("--replication", sim_rep, "Replication index")->check(CLI::NonNegativeNumber);

  auto* swp = app.add_subcommand("sweep", "Reward-spread sweep with replications");
  add_common(swp, c_sweep);
  std::optional<std::int32_t> swp_reps;
  std::vector<std::int32_t> swp_spreads;
  unsigned swp_threads = 0;
  swp->add_option("--replications", swp_reps, "Replications per spread");
  swp->add_option("--spreads", swp_spreads, "Spreads to sweep")->delimiter(',');
  swp->add_option("--threads", swp_threads, "Worker threads (0 = all cores)");

  auto* fit = app.add_subcommand("fit", "Fit rates to an event log");
  add_common(fit, c_fit);
  std::string fit_log, fit_model = "two_state";
  fit->add_option("--log", fit_log, "Event log file")->required()->check(CLI::ExistingFile);
  fit->add_option("--model", fit_model, "two_state or log_linear")
      ->check(CLI::IsMember({"two_state", "log_linear"}));

  auto* rec = app.add_subcommand("recover", "Simulate-then-fit recovery experiment");
  add_common(rec, c_rec);
  std::int64_t rec_seeds = 100, rec_events = 1000;
  rec->add_option("--seeds", rec_seeds, "Number of seeds");
  rec->add_option("--events", rec_events, "Target events per state for worker 0");

  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic corpus");
  add_common(gen, c_gen);
  std::optional<std::int64_t> gen_posts;
  gen->add_option("--posts", gen_posts, "Number of posts (default: n_posts)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*sim) return run_simulate(c_sim, sim_spread, sim_rep);
    if (*swp) return run_sweep(c_sweep, swp_reps, swp_spreads, swp_threads);
    if (*fit) return run_fit(c_fit, fit_log, fit_model);
    if (*rec) return run_recover(c_rec, rec_seeds, rec_events);
    if (*gen) return run_gen_corpus(c_gen, gen_posts);
  } catch (const ConfigError& e) {
    std::cerr << "crowdrace: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "crowdrace: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
