#pragma once

#include "specplan/agents/generator.hpp"
#include "specplan/baselines/policies.hpp"
#include "specplan/core/prices.hpp"
#include "specplan/predictor/value_model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace specplan::bench {

enum class PolicyKind { sequential, fixed, dynamic, dynamic_offset, sft, bo };

PolicyKind parse_policy_kind(std::string_view text);

struct PolicySpec {
  std::string name;
  PolicyKind kind = PolicyKind::fixed;
  int k = 2;                          // fixed
  predictor::Hyperparams hyper;       // dynamic, dynamic_offset, sft
  int k_max = 6;                      // bo
  double epsilon = 0.1;               // bo
};

struct LiveConfig {
  std::string base_url;               // e.g. http://127.0.0.1:8080
  std::string api_key_env = "SPECPLAN_API_KEY";
  std::string approx_model;
  std::string target_model;
  std::filesystem::path approx_template;  // files with {{task}} and {{history}}
  std::filesystem::path target_template;
  std::string stop_marker = "FINISH";
  int max_steps = 12;
  Millis exec_latency_ms = 0;
  double timeout_s = 120;
  std::vector<std::pair<std::string, std::string>> tasks;  // (id, prompt)
};

struct BenchConfig {
  std::string mode = "sim";
  std::uint64_t seed = 1;
  std::optional<agents::GeneratorConfig> generator;
  std::filesystem::path traces;  // directory written by `gen`; wins over generator
  std::vector<PolicySpec> policies;
  PriceTable prices;
  Millis predictor_latency_ms = 0;
  std::string reference = "fixed-k2";
  std::optional<LiveConfig> live;
  nlohmann::json raw;  // the merged document, echoed into manifests

  /// Throws ConfigError.
  void validate() const;
};

/// Applies `key=value` overrides (dotted keys, numeric parts index arrays;
/// the value is parsed as JSON when it parses, else taken as a string).
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

BenchConfig parse_config(const nlohmann::json& doc);
BenchConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Fresh policy instance; learned policies train inline unless `background`.
std::unique_ptr<engine::KPolicy> make_policy(const PolicySpec& spec, std::uint64_t seed, bool background = false);

}  // namespace specplan::bench
