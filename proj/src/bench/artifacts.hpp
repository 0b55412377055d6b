#pragma once

// Run-directory writers shared by the simulated and live drivers.

#include "specplan/bench/commands.hpp"

#include <fstream>

namespace specplan::bench::detail {

std::ofstream open_out(const std::filesystem::path& path);
void make_dirs(const std::filesystem::path& dir);

void write_baseline(const std::filesystem::path& path, const std::vector<metrics::TaskBaseline>& rows);

/// Streams one policy's ledger and round log while its tasks run.
class PolicyWriter {
 public:
  PolicyWriter(const std::filesystem::path& out, const std::string& policy);
  void add(const engine::TaskResult& result);
  /// Records of a task that failed part way.
  void add_partial(const std::vector<CallRecord>& records);
  PolicyRun finish();

 private:
  std::ofstream ledger_;
  std::ofstream rounds_;
  PolicyRun run_;
  std::vector<std::optional<double>> accuracy_;
};

/// Checkpoint and replay buffer of learned policies, arm table of bandits.
void save_policy_state(engine::KPolicy& policy, const std::string& name, const std::filesystem::path& out);

void write_accuracy(const std::filesystem::path& path, const std::vector<PolicyRun>& runs);

void write_manifest(const std::filesystem::path& out, const BenchConfig& cfg, nlohmann::json extra);

}  // namespace specplan::bench::detail
