#include "specplan/core/plan_state.hpp"

#include "specplan/core/errors.hpp"

#include <nlohmann/json.hpp>

namespace specplan {

PlanState append_action(const PlanState& state, Action action, std::string observation) {
  PlanState next = state;
  next.committed_.push_back({std::move(action), std::move(observation)});
  return next;
}

void to_json(nlohmann::json& j, const PlanState& state) {
  auto steps = nlohmann::json::array();
  for (const auto& step : state.committed()) {
    steps.push_back({{"action", step.action.text()}, {"observation", step.observation}});
  }
  j = {{"task_prompt", state.task_prompt()}, {"committed", std::move(steps)}};
}

void from_json(const nlohmann::json& j, PlanState& state) {
  PlanState out(j.at("task_prompt").get<std::string>());
  for (const auto& step : j.at("committed")) {
    out = append_action(out, Action::normalize(step.at("action").get<std::string>()),
                        step.at("observation").get<std::string>());
  }
  state = std::move(out);
}

std::string serialize(const PlanState& state) { return nlohmann::json(state).dump(); }

PlanState parse_plan_state(std::string_view text) {
  try {
    return nlohmann::json::parse(text).get<PlanState>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed plan state: ") + e.what());
  }
}

}  // namespace specplan
