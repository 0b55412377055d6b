#include "specplan/agents/sim_backend.hpp"

#include "specplan/core/errors.hpp"

#include <algorithm>

namespace specplan::agents {

std::int64_t prorated_tokens(std::int64_t full, Millis elapsed, Millis duration) noexcept {
  if (duration <= 0 || elapsed >= duration) return full;
  if (elapsed <= 0) return 0;
  return full * elapsed / duration;
}

SimBackend::SimBackend(TaskTrace trace) : trace_(std::move(trace)) { trace_.validate(); }

CallId SimBackend::launch(CallRequest request, Scheduler& sched, CallDone done) {
  const StepScript& s = trace_.step(request.step);
  if (request.step <= committed_through_) {
    throw StepOutOfRange("step " + std::to_string(request.step) + " is already committed");
  }
  if (request.prefix.step_index() + 1 != static_cast<std::size_t>(request.step)) {
    throw StepOutOfRange("prefix of length " + std::to_string(request.prefix.step_index()) +
                         " cannot plan step " + std::to_string(request.step));
  }

  const bool approx = request.role == Role::approx;
  const Millis start = sched.now();
  const Millis end = start + (approx ? s.approx_latency_ms : s.target_latency_ms);
  const CallId id = next_id_++;
  calls_.emplace(id, Inflight{request.role, start, end,
                              approx ? s.approx_prompt_tokens : s.target_prompt_tokens,
                              approx ? s.approx_gen_tokens : s.target_gen_tokens});

  Action action = approx ? s.approx_action : s.target_action;
  sched.post_at(end, Lane::completion, [this, id, action = std::move(action), done = std::move(done)] {
    auto it = calls_.find(id);
    if (it == calls_.end()) return;  // canceled
    CallOutcome outcome;
    outcome.action = action;
    outcome.usage = Usage{it->second.prompt, it->second.gen, false, false};
    calls_.erase(it);
    done(std::move(outcome));
  });
  return id;
}

Usage SimBackend::cancel(CallId id, Millis now) {
  auto it = calls_.find(id);
  if (it == calls_.end()) return {};
  const Inflight c = it->second;
  calls_.erase(it);
  return Usage{c.prompt, prorated_tokens(c.gen, now - c.start, c.end - c.start), false, false};
}

Millis SimBackend::exec_latency(int step, const Action&) const { return trace_.step(step).exec_latency_ms; }

std::string SimBackend::observe(int step, const Action& action) const {
  const StepScript& s = trace_.step(step);
  if (action == s.target_action) return s.observation;
  return "unverified result of " + action.text();
}

void SimBackend::on_commit(int step) { committed_through_ = std::max(committed_through_, step); }

}  // namespace specplan::agents
