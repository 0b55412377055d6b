#include "specplan/engine/engine.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <memory>
#include <stdexcept>

namespace specplan::engine {

bool verify(const Action& approx, const Action& target, const MatchPredicate& pred) {
  return pred ? pred(approx, target) : approx == target;
}

std::string_view to_string(RunTerminal t) noexcept {
  return t == RunTerminal::mismatch ? "mismatch" : "task_end";
}

std::string_view to_string(RoundTerminal t) noexcept {
  switch (t) {
    case RoundTerminal::mismatch: return "mismatch";
    case RoundTerminal::exhausted: return "exhausted";
    case RoundTerminal::task_end: return "task_end";
  }
  return "?";
}

RoundTerminal parse_round_terminal(std::string_view text) {
  if (text == "mismatch") return RoundTerminal::mismatch;
  if (text == "exhausted") return RoundTerminal::exhausted;
  if (text == "task_end") return RoundTerminal::task_end;
  throw ParseError("unknown round terminal '" + std::string(text) + "'");
}

void to_json(nlohmann::json& j, const RoundLog& r) {
  j = {{"task_id", r.task_id},         {"round_id", r.round_id},
       {"start_step", r.start_step},   {"k", r.k},
       {"matched_count", r.matched_count}, {"terminal", to_string(r.terminal)},
       {"start_ms", r.start_ms},       {"end_ms", r.end_ms}};
}

void from_json(const nlohmann::json& j, RoundLog& r) {
  r.task_id = j.value("task_id", "");
  r.round_id = j.at("round_id").get<int>();
  r.start_step = j.at("start_step").get<int>();
  r.k = j.at("k").get<int>();
  r.matched_count = j.at("matched_count").get<int>();
  r.terminal = parse_round_terminal(j.at("terminal").get<std::string>());
  r.start_ms = j.value("start_ms", Millis{0});
  r.end_ms = j.value("end_ms", Millis{0});
}

std::vector<CallRecord> cancel_inflight(std::vector<InflightCall>& calls, int from_step, int round_id,
                                        agents::AgentBackend& backend, Millis now) {
  std::vector<CallRecord> out;
  for (auto& c : calls) {
    if (c.done || c.step <= from_step) continue;
    const agents::Usage used = backend.cancel(c.id, now);
    c.done = true;
    out.push_back(CallRecord{c.role, c.step, c.start_ms, now, used.prompt_tokens, used.gen_tokens,
                             CallStatus::canceled, round_id, used.prompt_missing, used.gen_missing});
  }
  return out;
}

namespace {

struct StepSlot {
  std::optional<Action> approx;
  std::optional<Action> target;
  Millis exec_end = 0;
};

// Shared with every scheduled callback; stale callbacks from a finished or
// aborted round see `aborted` and do nothing.
struct RoundContext {
  const RoundPlan* plan = nullptr;
  agents::AgentBackend* backend = nullptr;
  Scheduler* sched = nullptr;
  const MatchPredicate* match = nullptr;
  int base = 0;
  int span = 0;
  Millis t0 = 0;
  Millis gate = 0;

  std::vector<StepSlot> slots;        // 1-based
  std::vector<PlanState> spec_states;  // spec_states[i] = prefix after i speculated steps
  std::vector<InflightCall> calls;
  std::vector<std::optional<CallRecord>> records;  // parallel to calls
  std::vector<CallRecord> canceled;
  std::vector<StepOutcome> outcomes;
  int resolved = 0;

  bool aborted = false;
  bool finished = false;
  Millis end_time = 0;
  RoundTerminal terminal = RoundTerminal::exhausted;
  std::exception_ptr failure;
};

using Ctx = std::shared_ptr<RoundContext>;

void finish_at(const Ctx& ctx, Millis when, RoundTerminal terminal) {
  ctx->aborted = true;
  ctx->end_time = when;
  ctx->terminal = terminal;
  ctx->sched->post_at(when, Lane::launch, [ctx] { ctx->finished = true; });
}

void cancel_after(const Ctx& ctx, int step) {
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < ctx->calls.size(); ++i) {
    if (!ctx->calls[i].done && ctx->calls[i].step > step) open.push_back(i);
  }
  auto recs = cancel_inflight(ctx->calls, step, ctx->plan->round_id, *ctx->backend, ctx->sched->now());
  for (std::size_t n = 0; n < open.size(); ++n) ctx->records[open[n]] = recs[n];
  ctx->canceled.insert(ctx->canceled.end(), recs.begin(), recs.end());
}

void fail(const Ctx& ctx, std::exception_ptr error) {
  if (ctx->failure) return;
  ctx->failure = error;
  cancel_after(ctx, ctx->base);
  ctx->aborted = true;
  ctx->finished = true;
}

void try_resolve(const Ctx& ctx) {
  auto& c = *ctx;
  while (c.resolved < c.span) {
    const int j = c.resolved + 1;
    const StepSlot& slot = c.slots[static_cast<std::size_t>(j)];
    if (!slot.approx || !slot.target) return;
    const int step = c.base + j;
    const bool matched = verify(*slot.approx, *slot.target, *c.match);
    c.outcomes.push_back(StepOutcome{step, slot.approx, *slot.target, matched, *slot.target, c.sched->now()});
    c.resolved = j;
    if (!matched) {
      cancel_after(ctx, step);
      finish_at(ctx, c.sched->now() + c.backend->exec_latency(step, *slot.target), RoundTerminal::mismatch);
      return;
    }
    if (c.backend->is_final(step, *slot.target)) {
      cancel_after(ctx, step);
      finish_at(ctx, std::max(c.sched->now(), slot.exec_end), RoundTerminal::task_end);
      return;
    }
  }
  // Every speculated step verified; the last one was already executed
  // optimistically after its approx call.
  const auto& last = c.slots[static_cast<std::size_t>(c.span)];
  const auto limit = c.backend->step_limit();
  const bool at_end = limit && c.base + c.span >= *limit;
  finish_at(ctx, std::max(c.sched->now(), last.exec_end),
            at_end ? RoundTerminal::task_end : RoundTerminal::exhausted);
}

// Verification runs behind every completion already queued for this instant,
// so a call finishing exactly when a mismatch is found still counts as
// completed. Launches due at the same instant come after it.
void schedule_resolve(const Ctx& ctx) {
  ctx->sched->post_at(ctx->sched->now(), Lane::completion, [ctx] {
    if (!ctx->aborted) try_resolve(ctx);
  });
}

void record_completion(const Ctx& ctx, std::size_t call_index, const agents::Usage& usage) {
  auto& call = ctx->calls[call_index];
  call.done = true;
  ctx->records[call_index] =
      CallRecord{call.role,         call.step,         call.start_ms,         ctx->sched->now(),
                 usage.prompt_tokens, usage.gen_tokens, CallStatus::completed, ctx->plan->round_id,
                 usage.prompt_missing, usage.gen_missing};
}

std::size_t launch_call(const Ctx& ctx, Role role, int i, agents::CallDone done) {
  auto& c = *ctx;
  agents::CallRequest req{role, c.base + i, c.plan->round_id, c.spec_states[static_cast<std::size_t>(i - 1)]};
  const Millis now = c.sched->now();
  const agents::CallId id = c.backend->launch(std::move(req), *c.sched, std::move(done));
  c.calls.push_back(InflightCall{id, role, c.base + i, now, false});
  c.records.emplace_back();
  return c.calls.size() - 1;
}

void launch_step(const Ctx& ctx, int i);

void on_approx_done(const Ctx& ctx, int i, std::size_t call_index, agents::CallOutcome outcome) {
  auto& c = *ctx;
  if (c.finished || c.calls[call_index].done) return;
  if (outcome.error) return fail(ctx, outcome.error);
  record_completion(ctx, call_index, outcome.usage);
  const int step = c.base + i;
  auto& slot = c.slots[static_cast<std::size_t>(i)];
  slot.approx = *outcome.action;
  const Millis exec = c.backend->exec_latency(step, *slot.approx);
  slot.exec_end = c.sched->now() + exec;
  c.spec_states[static_cast<std::size_t>(i)] =
      append_action(c.spec_states[static_cast<std::size_t>(i - 1)], *slot.approx,
                    c.backend->observe(step, *slot.approx));
  if (i < c.span && !c.aborted) {
    const Millis next = std::max(slot.exec_end, c.gate);
    c.sched->post_at(next, Lane::launch, [ctx, i] { launch_step(ctx, i + 1); });
  }
  schedule_resolve(ctx);
}

void on_target_done(const Ctx& ctx, int i, std::size_t call_index, agents::CallOutcome outcome) {
  auto& c = *ctx;
  if (c.finished || c.calls[call_index].done) return;
  if (outcome.error) return fail(ctx, outcome.error);
  record_completion(ctx, call_index, outcome.usage);
  c.slots[static_cast<std::size_t>(i)].target = *outcome.action;
  schedule_resolve(ctx);
}

void launch_step(const Ctx& ctx, int i) {
  if (ctx->aborted) return;
  try {
    // Indices are known before launch: approx at size(), target right after.
    const std::size_t approx_index = ctx->calls.size();
    launch_call(ctx, Role::approx, i, [ctx, i, approx_index](agents::CallOutcome o) {
      on_approx_done(ctx, i, approx_index, std::move(o));
    });
    const std::size_t target_index = ctx->calls.size();
    launch_call(ctx, Role::target, i, [ctx, i, target_index](agents::CallOutcome o) {
      on_target_done(ctx, i, target_index, std::move(o));
    });
  } catch (...) {
    fail(ctx, std::current_exception());
  }
}

std::vector<CallRecord> collect_records(const RoundContext& c) {
  std::vector<CallRecord> out;
  out.reserve(c.records.size());
  for (const auto& r : c.records) {
    if (r) out.push_back(*r);
  }
  return out;
}

void drive(const Ctx& ctx) {
  while (!ctx->finished) {
    if (!ctx->sched->run_one()) throw std::logic_error("round stalled with no pending events");
  }
}

RoundResult target_only_round(const RoundPlan& plan, agents::AgentBackend& backend, Scheduler& sched,
                              const MatchPredicate& match) {
  auto ctx = std::make_shared<RoundContext>();
  ctx->plan = &plan;
  ctx->backend = &backend;
  ctx->sched = &sched;
  ctx->match = &match;
  ctx->base = static_cast<int>(plan.start_state.step_index());
  ctx->t0 = sched.now();
  ctx->spec_states.push_back(plan.start_state);

  const int step = ctx->base + 1;
  try {
    const std::size_t index = ctx->calls.size();
    launch_call(ctx, Role::target, 1, [ctx, step, index](agents::CallOutcome o) {
      auto& c = *ctx;
      if (c.finished || c.calls[index].done) return;
      if (o.error) return fail(ctx, o.error);
      record_completion(ctx, index, o.usage);
      c.outcomes.push_back(StepOutcome{step, std::nullopt, *o.action, false, *o.action, c.sched->now()});
      c.resolved = 1;
      const bool at_end = c.backend->is_final(step, *o.action);
      finish_at(ctx, c.sched->now() + c.backend->exec_latency(step, *o.action),
                at_end ? RoundTerminal::task_end : RoundTerminal::exhausted);
    });
  } catch (...) {
    fail(ctx, std::current_exception());
  }
  drive(ctx);

  RoundResult out;
  out.records = collect_records(*ctx);
  if (ctx->failure) {
    try {
      std::rethrow_exception(ctx->failure);
    } catch (const std::exception& e) {
      throw BackendFailure(e.what(), out.records, ctx->failure);
    }
  }
  out.outcomes = std::move(ctx->outcomes);
  out.log = RoundLog{"", plan.round_id, ctx->base, 0, 0, ctx->terminal, ctx->t0, ctx->end_time};
  out.end_state = append_action(plan.start_state, out.outcomes.front().committed_action,
                                backend.observe(step, out.outcomes.front().committed_action));
  return out;
}

}  // namespace

RoundResult run_round(const RoundPlan& plan, agents::AgentBackend& backend, Scheduler& sched,
                      const MatchPredicate& match, Millis predictor_latency_ms) {
  if (plan.k < 0) throw PolicyFailure("speculation step must be >= 0, got " + std::to_string(plan.k));
  if (plan.k == 0) return target_only_round(plan, backend, sched, match);

  const int base = static_cast<int>(plan.start_state.step_index());
  int span = plan.k;
  if (const auto limit = backend.step_limit()) span = std::min(span, *limit - base);
  if (span <= 0) throw StepOutOfRange("round starts after the last step");

  auto ctx = std::make_shared<RoundContext>();
  ctx->plan = &plan;
  ctx->backend = &backend;
  ctx->sched = &sched;
  ctx->match = &match;
  ctx->base = base;
  ctx->span = span;
  ctx->t0 = sched.now();
  ctx->gate = ctx->t0 + predictor_latency_ms;
  ctx->slots.resize(static_cast<std::size_t>(span) + 1);
  ctx->spec_states.resize(static_cast<std::size_t>(span) + 1);
  ctx->spec_states[0] = plan.start_state;

  launch_step(ctx, 1);
  drive(ctx);

  RoundResult out;
  out.records = collect_records(*ctx);
  if (ctx->failure) {
    try {
      std::rethrow_exception(ctx->failure);
    } catch (const std::exception& e) {
      throw BackendFailure(e.what(), out.records, ctx->failure);
    }
  }
  out.canceled = std::move(ctx->canceled);
  out.outcomes = std::move(ctx->outcomes);
  const int matched = static_cast<int>(
      std::count_if(out.outcomes.begin(), out.outcomes.end(), [](const StepOutcome& o) { return o.matched; }));
  out.log = RoundLog{"", plan.round_id, base, plan.k, matched, ctx->terminal, ctx->t0, ctx->end_time};
  PlanState state = plan.start_state;
  for (const auto& o : out.outcomes) {
    state = append_action(state, o.committed_action, backend.observe(o.step, o.committed_action));
  }
  out.end_state = std::move(state);
  return out;
}

namespace {

// Incremental run builder shared by run_task and extract_runs.
class RunTracker {
 public:
  template <class OnClose>
  void add(const StepOutcome& o, const PlanState& before, OnClose&& on_close) {
    if (!o.approx_action) {
      close(RunTerminal::task_end, on_close);
      return;
    }
    if (open_.states.empty()) open_.first_step = o.step;
    open_.states.push_back(before);
    if (!o.matched) close(RunTerminal::mismatch, on_close);
  }

  template <class OnClose>
  void close(RunTerminal terminal, OnClose&& on_close) {
    if (open_.states.empty()) return;
    open_.terminal = terminal;
    on_close(std::move(open_));
    open_ = MatchRun{};
  }

 private:
  MatchRun open_;
};

}  // namespace

TaskResult run_task(agents::AgentBackend& backend, KPolicy& policy, Scheduler& sched,
                    const EngineOptions& options) {
  TaskResult res;
  res.task_id = options.task_id;
  PlanState state(backend.task_prompt());
  res.states.push_back(state);
  const Millis t_start = sched.now();
  Millis t_end = t_start;
  int round_id = options.first_round_id;
  const auto limit = backend.step_limit();
  RunTracker tracker;
  auto close_run = [&](MatchRun run) {
    res.runs.push_back(run);
    policy.on_run_closed(res.runs.back());
  };

  bool done = limit && *limit <= 0;
  while (!done) {
    int k = 0;
    try {
      k = policy.choose_k(state);
    } catch (const std::exception& e) {
      throw PolicyFailure(std::string("policy '") + policy.name() + "' failed: " + e.what());
    }
    if (k < 0) throw PolicyFailure("policy '" + policy.name() + "' returned k=" + std::to_string(k));

    RoundPlan plan{round_id++, state, k, policy.name()};
    RoundResult rr;
    try {
      rr = run_round(plan, backend, sched, options.match, policy.uses_predictor() ? options.predictor_latency_ms : 0);
    } catch (BackendFailure& e) {
      std::vector<CallRecord> partial = res.ledger;
      partial.insert(partial.end(), e.partial_ledger.begin(), e.partial_ledger.end());
      throw BackendFailure(e.what(), std::move(partial), e.cause);
    }
    res.ledger.insert(res.ledger.end(), rr.records.begin(), rr.records.end());
    rr.log.task_id = options.task_id;
    res.rounds.push_back(rr.log);
    t_end = rr.log.end_ms;

    for (const auto& o : rr.outcomes) {
      tracker.add(o, state, close_run);
      state = append_action(state, o.committed_action, backend.observe(o.step, o.committed_action));
      backend.on_commit(o.step);
      res.committed.push_back(o.committed_action);
      res.steps.push_back(o);
      res.states.push_back(state);
    }
    const auto& last = rr.outcomes.back();
    done = backend.is_final(last.step, last.committed_action) || (limit && last.step >= *limit);
  }
  tracker.close(RunTerminal::task_end, close_run);
  res.total_time = t_end - t_start;
  policy.on_task_end(res);
  return res;
}

std::vector<MatchRun> extract_runs(const TaskResult& result) {
  std::vector<MatchRun> runs;
  RunTracker tracker;
  auto sink = [&](MatchRun run) { runs.push_back(std::move(run)); };
  for (std::size_t i = 0; i < result.steps.size(); ++i) tracker.add(result.steps[i], result.states[i], sink);
  tracker.close(RunTerminal::task_end, sink);
  return runs;
}

std::vector<std::optional<int>> realized_optimal_k(const TaskResult& result) {
  const auto runs = extract_runs(result);
  // step -> (run index, position within run)
  std::map<int, std::pair<std::size_t, std::size_t>> where;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (std::size_t p = 0; p < runs[r].length(); ++p) where[runs[r].first_step + static_cast<int>(p)] = {r, p};
  }
  std::vector<std::optional<int>> out;
  out.reserve(result.rounds.size());
  for (const auto& round : result.rounds) {
    std::optional<int> k_star;
    auto it = where.find(round.start_step + 1);
    if (round.k > 0 && it != where.end()) {
      const auto& run = runs[it->second.first];
      if (run.terminal == RunTerminal::mismatch) k_star = static_cast<int>(run.length() - it->second.second);
    }
    out.push_back(k_star);
  }
  return out;
}

BaselineCosts sequential_baseline(const agents::TaskTrace& trace, const PriceTable& prices) {
  BaselineCosts out;
  for (const auto& s : trace.steps) {
    out.time_ms += s.target_latency_ms + s.exec_latency_ms;
    out.usage.approx_prompt += s.approx_prompt_tokens;
    out.usage.approx_gen += s.approx_gen_tokens;
    out.usage.target_prompt += s.target_prompt_tokens;
    out.usage.target_gen += s.target_gen_tokens;
  }
  out.prompt_cost = (static_cast<double>(out.usage.approx_prompt) * prices.approx_prompt +
                     static_cast<double>(out.usage.target_prompt) * prices.target_prompt) /
                    1e6;
  out.gen_cost = (static_cast<double>(out.usage.approx_gen) * prices.approx_gen +
                  static_cast<double>(out.usage.target_gen) * prices.target_gen) /
                 1e6;
  return out;
}

}  // namespace specplan::engine
