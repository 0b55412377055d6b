#pragma once

#include "specplan/agents/backend.hpp"
#include "specplan/agents/task_trace.hpp"

#include <map>

namespace specplan::agents {

/// Serves scripted calls from a TaskTrace over a virtual clock. Latency and
/// tokens of step i come from the script regardless of the speculation path.
/// Canceled calls keep their full prompt and a pro-rated share of generation
/// tokens: floor(gen * elapsed / duration).
class SimBackend final : public AgentBackend {
 public:
  explicit SimBackend(TaskTrace trace);

  std::string task_prompt() const override { return trace_.task_prompt; }
  CallId launch(CallRequest request, Scheduler& sched, CallDone done) override;
  Usage cancel(CallId id, Millis now) override;
  Millis exec_latency(int step, const Action& action) const override;
  std::string observe(int step, const Action& action) const override;
  std::optional<int> step_limit() const override { return trace_.length(); }
  bool is_final(int step, const Action&) const override { return step >= trace_.length(); }
  void on_commit(int step) override;

  std::size_t inflight() const noexcept { return calls_.size(); }

 private:
  struct Inflight {
    Role role;
    Millis start;
    Millis end;
    std::int64_t prompt;
    std::int64_t gen;
  };

  TaskTrace trace_;
  CallId next_id_ = 1;
  int committed_through_ = 0;
  std::map<CallId, Inflight> calls_;
};

/// Pro-rata generation tokens for a call stopped `elapsed` ms into a
/// `duration` ms run.
std::int64_t prorated_tokens(std::int64_t full, Millis elapsed, Millis duration) noexcept;

}  // namespace specplan::agents
