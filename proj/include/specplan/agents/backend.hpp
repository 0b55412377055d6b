#pragma once

#include "specplan/core/action.hpp"
#include "specplan/core/call_record.hpp"
#include "specplan/core/plan_state.hpp"
#include "specplan/core/scheduler.hpp"

#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>

namespace specplan::agents {

using CallId = std::uint64_t;

struct CallRequest {
  Role role = Role::approx;
  int step = 1;  // 1-based step the call plans
  int round_id = 0;
  PlanState prefix;  // state the agent conditions on; step_index == step - 1
};

/// Token usage as reported by the backend. Missing flags mean "not reported",
/// never zero.
struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t gen_tokens = 0;
  bool prompt_missing = false;
  bool gen_missing = false;
};

struct CallOutcome {
  std::optional<Action> action;  // empty on failure
  Usage usage;
  std::exception_ptr error;
};

using CallDone = std::function<void(CallOutcome)>;

/// What the engine needs from an agent pair. Every `done` callback must be
/// delivered through the scheduler passed to launch, so it runs on the
/// coordinator.
class AgentBackend {
 public:
  virtual ~AgentBackend() = default;

  virtual std::string task_prompt() const = 0;

  virtual CallId launch(CallRequest request, Scheduler& sched, CallDone done) = 0;

  /// Stops an in-flight call; returns what it consumed so far. A completion
  /// for a canceled call is never delivered.
  virtual Usage cancel(CallId id, Millis now) = 0;

  /// Duration of executing `action` as step `step`.
  virtual Millis exec_latency(int step, const Action& action) const = 0;
  virtual std::string observe(int step, const Action& action) const = 0;

  /// Known number of steps (simulation) or nullopt (live).
  virtual std::optional<int> step_limit() const = 0;

  /// True when committing `action` at `step` finishes the task.
  virtual bool is_final(int step, const Action& action) const = 0;

  /// The engine reports every committed step.
  virtual void on_commit(int /*step*/) {}
};

}  // namespace specplan::agents
