#include "specplan/core/prices.hpp"

#include "specplan/core/errors.hpp"

#include <nlohmann/json.hpp>

namespace specplan {

namespace {
constexpr double kPerMillion = 1e6;
}

void PriceTable::validate() const {
  if (approx_prompt < 0 || approx_gen < 0 || target_prompt < 0 || target_gen < 0) {
    throw ConfigError("prices must be non-negative");
  }
}

double call_cost(const CallRecord& r, const PriceTable& prices) noexcept {
  const bool approx = r.role == Role::approx;
  const double p = approx ? prices.approx_prompt : prices.target_prompt;
  const double g = approx ? prices.approx_gen : prices.target_gen;
  return static_cast<double>(r.prompt_tokens) / kPerMillion * p +
         static_cast<double>(r.gen_tokens) / kPerMillion * g;
}

double usage_cost(const TokenUsage& u, const PriceTable& prices) noexcept {
  return (static_cast<double>(u.approx_prompt) * prices.approx_prompt +
          static_cast<double>(u.target_prompt) * prices.target_prompt +
          static_cast<double>(u.approx_gen) * prices.approx_gen +
          static_cast<double>(u.target_gen) * prices.target_gen) /
         kPerMillion;
}

void to_json(nlohmann::json& j, const PriceTable& p) {
  j = {{"approx_prompt", p.approx_prompt},
       {"approx_gen", p.approx_gen},
       {"target_prompt", p.target_prompt},
       {"target_gen", p.target_gen}};
}

void from_json(const nlohmann::json& j, PriceTable& p) {
  PriceTable out;
  out.approx_prompt = j.value("approx_prompt", out.approx_prompt);
  out.approx_gen = j.value("approx_gen", out.approx_gen);
  out.target_prompt = j.value("target_prompt", out.target_prompt);
  out.target_gen = j.value("target_gen", out.target_gen);
  out.validate();
  p = out;
}

}  // namespace specplan
