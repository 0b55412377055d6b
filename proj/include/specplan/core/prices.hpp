#pragma once

#include "specplan/core/call_record.hpp"

#include <nlohmann/json_fwd.hpp>

namespace specplan {

/// Currency per million tokens, per role and token kind.
struct PriceTable {
  double approx_prompt = 0.40;
  double approx_gen = 1.60;
  double target_prompt = 0.40;
  double target_gen = 1.60;

  /// GPT-4.1-mini for both agents.
  static PriceTable gpt41_mini() noexcept { return {}; }
  /// deepseek-chat drafting, deepseek-reasoner verifying.
  static PriceTable deepseek() noexcept { return {0.27, 1.10, 0.55, 2.19}; }

  /// Throws ConfigError on negative prices.
  void validate() const;

  friend bool operator==(const PriceTable&, const PriceTable&) = default;
};

double call_cost(const CallRecord& record, const PriceTable& prices) noexcept;
double usage_cost(const TokenUsage& usage, const PriceTable& prices) noexcept;

void to_json(nlohmann::json& j, const PriceTable& prices);
void from_json(const nlohmann::json& j, PriceTable& prices);

}  // namespace specplan
