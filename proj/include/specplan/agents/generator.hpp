#pragma once

#include "specplan/agents/task_trace.hpp"
#include "specplan/core/prices.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace specplan::agents {

/// A stretch of steps with one draft quality. Phases follow each other
/// inside a task; the tag of the phase a step belongs to is visible in the
/// state the step is planned from.
struct Phase {
  std::string tag;
  double match_probability = 0.5;
  double mean_length = 4.0;  // steps; lengths are geometric with this mean
  double weight = 1.0;       // chance of being picked as the next phase
};

struct IntRange {
  std::int64_t lo = 1;
  std::int64_t hi = 1;
};

void to_json(nlohmann::json& j, const IntRange& r);

/// steady (0.95 match) and pivot (never matches) stretches of mean length 2.
std::vector<Phase> default_phases();

struct GeneratorConfig {
  std::uint64_t seed = 7;
  int n_tasks = 312;
  IntRange steps{6, 12};
  std::vector<Phase> phases = default_phases();
  IntRange approx_latency_ms{300, 600};
  IntRange target_latency_ms{2500, 4000};
  IntRange exec_latency_ms{100, 300};
  // prompt tokens of step i = base + per_step * (i - 1)
  std::int64_t approx_prompt_base = 1200;
  std::int64_t approx_prompt_per_step = 250;
  std::int64_t target_prompt_base = 1500;
  std::int64_t target_prompt_per_step = 300;
  IntRange approx_gen{30, 80};
  IntRange target_gen{150, 400};
  PriceTable prices;

  /// Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
/// Missing keys keep their defaults; the result is validated. An empty
/// phase list gets the default phase set.
void from_json(const nlohmann::json& j, GeneratorConfig& c);

/// Deterministic under cfg.seed.
std::vector<TaskTrace> generate_tasks(const GeneratorConfig& cfg);

/// Run-length statistics of a workload. Per task, the longest and shortest
/// match run that ends in a mismatch (a task without one falls back to its
/// censored run).
struct OptimalKStats {
  double mean_max = 0;
  double mean_min = 0;
  double mean_steps = 0;
  double match_rate = 0;
  std::size_t tasks = 0;
};

OptimalKStats optimal_k_stats(const std::vector<TaskTrace>& traces);
void to_json(nlohmann::json& j, const OptimalKStats& s);

}  // namespace specplan::agents
