#pragma once

#include "specplan/bench/config.hpp"
#include "specplan/metrics/metrics.hpp"

#include <filesystem>
#include <iosfwd>

namespace specplan::bench {

/// Writes traces/<task_id>.json and manifest.json with the workload
/// statistics; returns the statistics.
agents::OptimalKStats cmd_gen(const BenchConfig& cfg, const std::filesystem::path& out);

/// Per-policy outcome summary kept in memory for the caller.
struct PolicyRun {
  std::string policy;
  std::vector<metrics::TaskRun> tasks;
  /// Per 50-task window: mean and standard deviation of per-task accuracy,
  /// nullopt when no task in the window had a scored round.
  std::vector<std::optional<std::pair<double, double>>> accuracy;
};

/// Runs every policy over the workload in manifest order and writes
/// ledger-<p>.jsonl, rounds-<p>.jsonl, baseline.jsonl, accuracy.csv,
/// checkpoints/ and manifest.json into `out`. `log` gets progress lines.
std::vector<PolicyRun> cmd_run(const BenchConfig& cfg, const std::filesystem::path& out, std::ostream* log = nullptr);

/// Reads a run directory and writes report.csv (to `csv`), plus
/// breakdown.csv, scatter.csv and report.json next to it. Throws MissingRun.
std::vector<metrics::RunReport> cmd_report(const std::filesystem::path& run_dir, const std::string& reference,
                                           const std::filesystem::path& csv);

/// Same artifacts as cmd_run against a live endpoint, plus a target-only
/// pass for the sequential baseline.
void cmd_live(const BenchConfig& cfg, const std::filesystem::path& out, std::ostream* log = nullptr);

/// Loads traces in manifest order from a `gen` output directory.
std::vector<agents::TaskTrace> load_workload(const std::filesystem::path& dir);

/// The configured workload: traces directory if set, else generated.
std::vector<agents::TaskTrace> workload_of(const BenchConfig& cfg);

/// Exact-match accuracy of issued k against realized optimal k per task;
/// nullopt when no round of the task could be scored.
std::optional<double> task_accuracy(const engine::TaskResult& result);

/// Mean and population standard deviation over consecutive windows.
std::vector<std::optional<std::pair<double, double>>> windowed(const std::vector<std::optional<double>>& values,
                                                              std::size_t window);

}  // namespace specplan::bench
