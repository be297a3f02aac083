#pragma once

// Reward-spread experiments: configuration, per-contest summaries, sweeps with
// replications, and the files a sweep leaves behind.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdrace/core.hpp"
#include "crowdrace/corpus.hpp"
#include "crowdrace/ctmc.hpp"
#include "crowdrace/inference.hpp"
#include "crowdrace/stats.hpp"

namespace crowdrace {

inline constexpr int kConfigFormatVersion = 1;

struct ExperimentConfig {
  ContestConfig contest;
  BehaviorPrior prior{36.0, 720.0, 0.0005};
  double exit_base_hazard = 0.06;
  std::int32_t exit_checkpoints = 20;
  double accuracy_floor = 0.0;
  double skill_min = 0.0;
  double skill_max = 1.0;
  double cost_per_effort = 0.01;
  double exit_threshold_min = 0.0;
  double exit_threshold_max = 0.0;
  // Forces lambda_out = lambda_in for every worker.
  bool equal_rates = false;
  std::vector<std::int32_t> spreads{1, 5, 10};
  std::int32_t replications = 10;
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
  // "generate" or a path to a corpus file.
  std::string corpus = "generate";
  double mean_entities = 1.2;

  SimulationOptions simulation_options() const;
  // Throws ConfigError on the first violated invariant.
  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// The full-size contest (100 workers, 7600 posts, 380 s).
ExperimentConfig full_experiment_config();
// The same 380 s contest with 20 workers and 1520 posts.
ExperimentConfig scaled_experiment_config();

// Sets one `key = value` field. Throws ConfigError for unknown keys or
// unparsable values.
void set_config_value(ExperimentConfig& config, const std::string& key,
                      const std::string& value);
// Flat key = value text with '#' comments. format_version must be present and
// supported; unknown keys are errors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& out, const ExperimentConfig& config);

struct ContestSummary {
  std::int32_t spread = 0;
  std::int32_t replication = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;  // diagnostic when !ok
  std::int64_t total_annotations = 0;
  std::int64_t distinct_annotations = 0;
  double mean_annotations_per_active_worker = 0;
  std::vector<std::int32_t> active_at_checkpoint;
  double mean_annotation_time_s_per_entity = 0;
  std::int64_t top1_annotations = 0;
  std::int64_t top10_annotations = 0;
  std::int64_t exits = 0;
  std::vector<WorkerId> winners;
  std::vector<double> payouts;
  double total_payout = 0;
  friend bool operator==(const ContestSummary&, const ContestSummary&) = default;
};

ContestSummary summarize(const EventLog& log);

// Cumulative annotation count after each of a worker's events.
struct TrajectoryPoint {
  Millis time_ms = 0;
  std::int64_t cumulative = 0;
};
struct WorkerTrajectory {
  WorkerId worker_id = 0;
  std::vector<TrajectoryPoint> points;
};
std::vector<WorkerTrajectory> race_trajectories(const EventLog& log);

// Seeds depend on (master_seed, replication) only, so every spread of a
// replication sees the same corpus, workers and random streams.
std::uint64_t replication_seed(const ExperimentConfig& config, std::int32_t replication);
std::vector<Post> replication_corpus(const ExperimentConfig& config, std::int32_t replication);
std::vector<WorkerProfile> replication_profiles(const ExperimentConfig& config,
                                                std::int32_t replication);

struct ConditionRun {
  ContestSummary summary;
  std::optional<EventLog> log;
};

// Runs one contest. Invalid configuration throws ConfigError; a failure inside
// the simulation (or a failed replay check) is reported in the summary.
// `corpus` overrides the configured corpus source when given.
ConditionRun run_condition_full(const ExperimentConfig& config, std::int32_t spread,
                                std::int32_t replication,
                                const std::vector<Post>* corpus = nullptr);
ContestSummary run_condition(const ExperimentConfig& config, std::int32_t spread,
                             std::int32_t replication);

struct SpreadRow {
  std::int32_t spread = 0;
  std::int64_t completed = 0;
  std::int64_t failed = 0;
  double mean_total = 0;
  double sd_total = 0;
  double mean_distinct = 0;
  double mean_per_active = 0;
  double mean_active_at_90 = 0;
};

struct PairedTrend {
  std::int32_t from_spread = 0;
  std::int32_t to_spread = 0;
  SignTest test;
};

struct TrendVerdict {
  bool applicable = false;
  bool means_increasing = false;
  bool significant = false;
  double alpha = 0.05;
  std::vector<PairedTrend> pairs;
  std::optional<AnovaResult> anova;
  std::string verdict;  // "increasing", "no significant trend", "not applicable"
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<ContestSummary> summaries;  // spread-major, replication-minor
  std::vector<SpreadRow> rows;
  TrendVerdict trend;
  // Replication 0 of each spread, for race plots.
  std::vector<std::pair<std::int32_t, std::vector<WorkerTrajectory>>> trajectories;
  bool partial = false;  // some replication failed
};

SpreadRow spread_row(std::int32_t spread, std::span<const ContestSummary> summaries);
TrendVerdict trend_verdict(const std::vector<std::int32_t>& spreads,
                           std::span<const ContestSummary> summaries, double alpha = 0.05);

// Replications run on `threads` workers (0 picks the hardware concurrency);
// the result does not depend on the thread count.
SweepResult sweep(const ExperimentConfig& config, unsigned threads = 0);

struct ManifestEntry {
  std::string file;
  std::uint64_t bytes = 0;
  std::string fnv1a64;
};

struct Manifest {
  std::vector<ManifestEntry> files;
  std::string tree_hash;  // over the sorted (file, hash) list
};

// Writes sweep_table.csv, summaries.jsonl, exit_curves.csv, trajectories.csv,
// trend.json, fitted.jsonl (when fits are given) and manifest.json. On an I/O
// failure the files written so far are removed and IoError is thrown.
Manifest emit_outputs(const SweepResult& result, std::span<const FittedBehavior> fits,
                      const std::filesystem::path& output_dir);

std::string format_double(double x);
std::string hash_hex(std::uint64_t h);

void write_summaries(std::ostream& out, std::span<const ContestSummary> summaries);
std::vector<ContestSummary> read_summaries(std::istream& in);

}  // namespace crowdrace
