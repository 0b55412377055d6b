#pragma once

#include "specplan/core/action.hpp"
#include "specplan/core/call_record.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace specplan::agents {

/// Ground truth for one planning step. Latencies are strictly positive.
struct StepScript {
  Action target_action = Action::normalize("noop");
  Action approx_action = Action::normalize("noop");
  Millis approx_latency_ms = 1;
  Millis target_latency_ms = 1;
  Millis exec_latency_ms = 1;
  std::int64_t approx_prompt_tokens = 0;
  std::int64_t approx_gen_tokens = 0;
  std::int64_t target_prompt_tokens = 0;
  std::int64_t target_gen_tokens = 0;
  std::string observation;
  std::string difficulty_tag;

  bool matches() const noexcept { return approx_action == target_action; }
};

struct TaskTrace {
  std::string task_id;
  std::string task_prompt;
  std::vector<StepScript> steps;

  /// Throws ConfigError when the trace breaks an invariant.
  void validate() const;
  int length() const noexcept { return static_cast<int>(steps.size()); }
  /// 1-based access; throws StepOutOfRange.
  const StepScript& step(int index) const;
};

void to_json(nlohmann::json& j, const StepScript& s);
void from_json(const nlohmann::json& j, StepScript& s);
void to_json(nlohmann::json& j, const TaskTrace& t);
void from_json(const nlohmann::json& j, TaskTrace& t);

TaskTrace load_trace(const std::filesystem::path& path);
void save_trace(const TaskTrace& trace, const std::filesystem::path& path);

/// Lengths of the maximal match runs of a trace, in order. Each run ends at a
/// mismatch (inclusive) or at the last step; `censored` marks the latter.
struct RunLength {
  int length;
  bool censored;
};
std::vector<RunLength> run_lengths(const TaskTrace& trace);

}  // namespace specplan::agents
