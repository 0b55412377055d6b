#pragma once

#include "specplan/agents/backend.hpp"
#include "specplan/agents/task_trace.hpp"
#include "specplan/core/action.hpp"
#include "specplan/core/call_record.hpp"
#include "specplan/core/errors.hpp"
#include "specplan/core/plan_state.hpp"
#include "specplan/core/prices.hpp"
#include "specplan/core/scheduler.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace specplan::engine {

using MatchPredicate = std::function<bool(const Action& approx, const Action& target)>;

/// Exact normalized-text equality unless `pred` is set.
bool verify(const Action& approx, const Action& target, const MatchPredicate& pred = {});

struct RoundPlan {
  int round_id = 0;
  PlanState start_state;
  int k = 1;  // 0 runs one target-only step
  std::string policy_name;
};

struct StepOutcome {
  int step = 0;
  std::optional<Action> approx_action;  // absent for target-only steps
  Action target_action = Action::normalize("noop");
  bool matched = false;
  Action committed_action = Action::normalize("noop");
  Millis resolved_ms = 0;
};

enum class RunTerminal : std::uint8_t { mismatch, task_end };
enum class RoundTerminal : std::uint8_t { mismatch, exhausted, task_end };

std::string_view to_string(RunTerminal t) noexcept;
std::string_view to_string(RoundTerminal t) noexcept;
RoundTerminal parse_round_terminal(std::string_view text);

/// A maximal sequence of verified matches ending at a mismatch (inclusive)
/// or at task end. `states[i]` is the committed state the i-th step of the
/// run was planned from.
struct MatchRun {
  std::vector<PlanState> states;
  RunTerminal terminal = RunTerminal::mismatch;
  int first_step = 1;

  std::size_t length() const noexcept { return states.size(); }
};

struct RoundLog {
  std::string task_id;
  int round_id = 0;
  int start_step = 0;  // steps committed before the round
  int k = 0;           // as issued by the policy
  int matched_count = 0;
  RoundTerminal terminal = RoundTerminal::exhausted;
  Millis start_ms = 0;
  Millis end_ms = 0;
};

void to_json(nlohmann::json& j, const RoundLog& r);
void from_json(const nlohmann::json& j, RoundLog& r);

struct RoundResult {
  std::vector<StepOutcome> outcomes;
  std::vector<CallRecord> records;   // every call of the round, in launch order
  std::vector<CallRecord> canceled;  // the subset stopped on mismatch
  RoundLog log;
  PlanState end_state;
};

struct TaskResult {
  std::string task_id;
  std::vector<Action> committed;
  Millis total_time = 0;
  std::vector<CallRecord> ledger;
  std::vector<MatchRun> runs;
  std::vector<RoundLog> rounds;
  std::vector<StepOutcome> steps;
  std::vector<PlanState> states;  // states[i] = committed state before step i+1
};

/// Raised when an agent call fails; carries everything recorded so far.
class BackendFailure : public Error {
 public:
  BackendFailure(const std::string& what, std::vector<CallRecord> partial, std::exception_ptr cause = nullptr)
      : Error(what), partial_ledger(std::move(partial)), cause(std::move(cause)) {}
  std::vector<CallRecord> partial_ledger;
  std::exception_ptr cause;  // the backend's own error
};

/// Chooses the speculation step for each round and learns from outcomes.
class KPolicy {
 public:
  virtual ~KPolicy() = default;
  virtual std::string name() const = 0;
  /// k >= 1, or 0 for a target-only step.
  virtual int choose_k(const PlanState& state) = 0;
  /// True when choose_k stands for a predictor call that takes time.
  virtual bool uses_predictor() const { return false; }
  /// Called as soon as a match run closes.
  virtual void on_run_closed(const MatchRun& /*run*/) {}
  virtual void on_task_end(const TaskResult& /*result*/) {}
};

struct EngineOptions {
  MatchPredicate match;
  /// Time a predictor call takes; speculation beyond step 1 waits for it.
  Millis predictor_latency_ms = 0;
  std::string task_id;
  int first_round_id = 0;
};

/// One draft-and-verify round starting at sched.now(). Returns once the
/// round's last committed step is verified and executed.
RoundResult run_round(const RoundPlan& plan, agents::AgentBackend& backend, Scheduler& sched,
                      const MatchPredicate& match = {}, Millis predictor_latency_ms = 0);

/// Runs a task to completion. Task time starts at sched.now().
TaskResult run_task(agents::AgentBackend& backend, KPolicy& policy, Scheduler& sched,
                    const EngineOptions& options = {});

struct InflightCall {
  agents::CallId id = 0;
  Role role = Role::approx;
  int step = 0;
  Millis start_ms = 0;
  bool done = false;
};

/// Cancels every unfinished call planning a step after `from_step`, stamping
/// it canceled at `now`. Finished calls are left alone.
std::vector<CallRecord> cancel_inflight(std::vector<InflightCall>& calls, int from_step, int round_id,
                                        agents::AgentBackend& backend, Millis now);

/// Splits the committed steps into match runs. Target-only steps close any
/// open run as censored and belong to none.
std::vector<MatchRun> extract_runs(const TaskResult& result);

/// Optimal k of the state each round started from: the length of the rest of
/// its match run. nullopt for target-only rounds and for runs cut off by task
/// end.
std::vector<std::optional<int>> realized_optimal_k(const TaskResult& result);

/// Cost of planning the task without speculation. Time is target-only
/// (target latency plus execution per step); tokens are what the approx and
/// target agents each spend planning every step once.
struct BaselineCosts {
  Millis time_ms = 0;
  TokenUsage usage;
  double prompt_cost = 0;
  double gen_cost = 0;
};

BaselineCosts sequential_baseline(const agents::TaskTrace& trace, const PriceTable& prices = {});

}  // namespace specplan::engine
