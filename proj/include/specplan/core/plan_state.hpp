#pragma once

#include "specplan/core/action.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace specplan {

struct CommittedStep {
  Action action;
  std::string observation;

  friend bool operator==(const CommittedStep&, const CommittedStep&) = default;
};

/// Task prompt plus the committed (action, observation) history.
/// Immutable from the outside; append_action returns a new state.
class PlanState {
 public:
  PlanState() = default;
  explicit PlanState(std::string task_prompt) : task_prompt_(std::move(task_prompt)) {}

  const std::string& task_prompt() const noexcept { return task_prompt_; }
  std::span<const CommittedStep> committed() const noexcept { return committed_; }
  std::size_t step_index() const noexcept { return committed_.size(); }

  friend bool operator==(const PlanState&, const PlanState&) = default;

 private:
  friend PlanState append_action(const PlanState&, Action, std::string);

  std::string task_prompt_;
  std::vector<CommittedStep> committed_;
};

PlanState append_action(const PlanState& state, Action action, std::string observation);

/// Compact JSON text; injective because JSON string escaping is.
std::string serialize(const PlanState& state);
PlanState parse_plan_state(std::string_view text);

void to_json(nlohmann::json& j, const PlanState& state);
void from_json(const nlohmann::json& j, PlanState& state);

}  // namespace specplan
