#include "specplan/agents/sim_backend.hpp"
#include "specplan/engine/engine.hpp"

#include "support/timeline_oracle.hpp"
#include "support/traces.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace specplan;
using namespace specplan::engine;
using agents::SimBackend;
using agents::TaskTrace;

namespace {

class ScriptedK final : public KPolicy {
 public:
  explicit ScriptedK(std::vector<int> ks, bool predictor = false) : ks_(std::move(ks)), predictor_(predictor) {}
  std::string name() const override { return "scripted"; }
  bool uses_predictor() const override { return predictor_; }
  int choose_k(const PlanState&) override { return ks_[calls_++ % ks_.size()]; }
  std::vector<MatchRun> closed;
  void on_run_closed(const MatchRun& run) override { closed.push_back(run); }

 private:
  std::vector<int> ks_;
  std::size_t calls_ = 0;
  bool predictor_;
};

TaskResult simulate(const TaskTrace& trace, std::vector<int> ks, Millis predictor_latency = 0) {
  SimBackend backend(trace);
  VirtualClock clock;
  ScriptedK policy(std::move(ks), predictor_latency > 0);
  EngineOptions opt;
  opt.task_id = trace.task_id;
  opt.predictor_latency_ms = predictor_latency;
  return run_task(backend, policy, clock, opt);
}

std::vector<Action> sequential_actions(const TaskTrace& trace) {
  std::vector<Action> out;
  for (const auto& s : trace.steps) out.push_back(s.target_action);
  return out;
}

auto key(const CallRecord& r) {
  return std::tuple(r.round_id, r.step, int(r.role), r.start_ms, r.end_ms, r.prompt_tokens, r.gen_tokens,
                    int(r.status));
}

std::vector<CallRecord> sorted(std::vector<CallRecord> v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return key(a) < key(b); });
  return v;
}

}  // namespace

TEST_CASE("verify uses exact text unless a predicate is given") {
  const auto a = Action::normalize("use tool");
  CHECK(verify(a, Action::normalize("use tool")));
  CHECK_FALSE(verify(a, Action::normalize("use other")));
  MatchPredicate unordered = [](const Action& x, const Action& y) {
    auto words = [](std::string s) {
      std::sort(s.begin(), s.end());
      return s;
    };
    return words(x.text()) == words(y.text());
  };
  CHECK(verify(Action::normalize("f(a, b)"), Action::normalize("f(b, a)"), unordered));
}

TEST_CASE("all-match round: targets finish at 5, 7, 9 and the round ends at 9") {
  const TaskTrace trace = testutil::all_match(3);
  SimBackend backend(trace);
  VirtualClock clock;
  RoundPlan plan{0, PlanState(trace.task_prompt), 3, "fixed"};
  const RoundResult r = run_round(plan, backend, clock);
  std::vector<Millis> target_ends;
  for (const auto& rec : r.records) {
    if (rec.role == Role::target) target_ends.push_back(rec.end_ms);
  }
  CHECK(target_ends == std::vector<Millis>{5, 7, 9});
  CHECK(r.log.end_ms == 9);
  CHECK(r.log.terminal == RoundTerminal::task_end);
  CHECK(r.canceled.empty());
  CHECK(r.outcomes.size() == 3);
}

TEST_CASE("k=1 round issues exactly one draft and one target call") {
  const TaskTrace trace = testutil::uniform_trace({false, true});
  SimBackend backend(trace);
  VirtualClock clock;
  const RoundResult r = run_round(RoundPlan{0, PlanState(trace.task_prompt), 1, "f"}, backend, clock);
  CHECK(r.records.size() == 2);
  CHECK(r.canceled.empty());
  CHECK(r.log.terminal == RoundTerminal::mismatch);
  CHECK(r.outcomes.front().committed_action == trace.steps[0].target_action);
}

TEST_CASE("mismatch at step 1 with k=2 cancels step 2 with pro-rated tokens") {
  // draft 1 takes 1 ms and executes for 1 ms, so step 2 starts at 2; target 1
  // finishes at 5 and reveals the mismatch. Step 2's target is 3/5 through.
  TaskTrace trace = testutil::uniform_trace({false, true});
  trace.steps[1].target_gen_tokens = 100;
  trace.steps[1].approx_latency_ms = 10;
  trace.steps[1].approx_gen_tokens = 50;
  SimBackend backend(trace);
  VirtualClock clock;
  const RoundResult r = run_round(RoundPlan{0, PlanState(trace.task_prompt), 2, "f"}, backend, clock);
  REQUIRE(r.canceled.size() == 2);
  for (const auto& c : r.canceled) {
    CHECK(c.step == 2);
    CHECK(c.start_ms == 2);
    CHECK(c.end_ms == 5);
    CHECK(c.status == CallStatus::canceled);
    if (c.role == Role::target) {
      CHECK(c.prompt_tokens == 100);
      CHECK(c.gen_tokens == 60);
    } else {
      CHECK(c.prompt_tokens == 60);
      CHECK(c.gen_tokens == 15);
    }
  }
  CHECK(r.log.end_ms == 6);
  CHECK(backend.inflight() == 0);
}

TEST_CASE("pro-rata boundaries") {
  CHECK(agents::prorated_tokens(100, 40, 100) == 40);
  CHECK(agents::prorated_tokens(100, 0, 100) == 0);
  CHECK(agents::prorated_tokens(100, 100, 100) == 100);
  CHECK(agents::prorated_tokens(7, 1, 3) == 2);
}

TEST_CASE("mismatch at step 1 with k=4 keeps the target's action and never drafts past it") {
  const TaskTrace trace = testutil::uniform_trace({false, true, true, true, true});
  const TaskResult res = simulate(trace, {4});
  CHECK(res.committed == sequential_actions(trace));
  // Drafts 2 and 3 start at 2 and 4; target 1 reveals the mismatch at 5.
  int launched = 0;
  for (const auto& rec : res.ledger) {
    if (rec.round_id != 0) continue;
    ++launched;
    CHECK(rec.step <= 3);
    if (rec.step > 1 && rec.role == Role::target) CHECK(rec.status == CallStatus::canceled);
  }
  CHECK(launched == 6);
}

TEST_CASE("perfect speculation cancels nothing and beats sequential time") {
  const TaskTrace trace = testutil::all_match(3);
  const TaskResult res = simulate(trace, {3});
  CHECK(std::none_of(res.ledger.begin(), res.ledger.end(),
                     [](const CallRecord& r) { return r.status == CallStatus::canceled; }));
  CHECK(res.total_time < sequential_baseline(trace).time_ms);
  CHECK(res.total_time == 9);
}

TEST_CASE("figure-one scenario yields runs of three and two") {
  // A, B match; C mismatches; D, E match to the end.
  const TaskTrace trace = testutil::uniform_trace({true, true, false, true, true});
  const TaskResult res = simulate(trace, {2});
  REQUIRE(res.runs.size() == 2);
  CHECK(res.runs[0].length() == 3);
  CHECK(res.runs[0].terminal == RunTerminal::mismatch);
  CHECK(res.runs[0].states[0] == PlanState(trace.task_prompt));
  CHECK(res.runs[0].states[2].step_index() == 2);
  CHECK(res.runs[1].length() == 2);
  CHECK(res.runs[1].terminal == RunTerminal::task_end);
  CHECK(res.runs[1].first_step == 4);

  const auto runs = extract_runs(res);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].states == res.runs[0].states);
  CHECK(runs[1].states == res.runs[1].states);
}

TEST_CASE("extract_runs edge cases") {
  const TaskResult all = simulate(testutil::all_match(4), {2});
  REQUIRE(all.runs.size() == 1);
  CHECK(all.runs[0].length() == 4);
  CHECK(all.runs[0].terminal == RunTerminal::task_end);

  const TaskResult none = simulate(testutil::uniform_trace({false, false, false}), {3});
  REQUIRE(none.runs.size() == 3);
  for (const auto& r : none.runs) {
    CHECK(r.length() == 1);
    CHECK(r.terminal == RunTerminal::mismatch);
  }
}

TEST_CASE("target-only rounds commit without runs") {
  const TaskTrace trace = testutil::uniform_trace({true, false, true});
  const TaskResult res = simulate(trace, {0});
  CHECK(res.committed == sequential_actions(trace));
  CHECK(res.runs.empty());
  CHECK(res.total_time == sequential_baseline(trace).time_ms);
  CHECK(std::all_of(res.ledger.begin(), res.ledger.end(), [](const CallRecord& r) { return r.role == Role::target; }));
}

TEST_CASE("sequential baseline sums") {
  const TaskTrace trace = testutil::all_match(3, 1, 5, 1);
  const BaselineCosts b = sequential_baseline(trace);
  CHECK(b.time_ms == 18);
  CHECK(b.usage.prompt() == 480);
  CHECK(b.usage.gen() == 75);
  TaskTrace empty;
  CHECK(sequential_baseline(empty).time_ms == 0);
  CHECK(sequential_baseline(empty).usage.total() == 0);
}

TEST_CASE("engine matches the brute-force timeline on random traces") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> kd(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const TaskTrace trace = testutil::random_trace(rng);
    std::vector<int> ks{kd(rng), kd(rng), kd(rng)};
    const auto expect = oracle::enumerate(trace, ks);
    const auto got = simulate(trace, ks);
    CAPTURE(trial);
    REQUIRE(got.total_time == expect.total_time);
    REQUIRE(sorted(got.ledger) == sorted(expect.records));
  }
}

TEST_CASE("predictor latency delays drafts after the first") {
  const TaskTrace trace = testutil::all_match(3);
  const TaskResult fast = simulate(trace, {3}, 0);
  const TaskResult slow = simulate(trace, {3}, 4);
  CHECK(slow.total_time == fast.total_time + 2);
  const TaskResult hidden = simulate(trace, {3}, 2);
  CHECK(hidden.total_time == fast.total_time);
}

TEST_CASE("realized optimal k per round") {
  const TaskTrace trace = testutil::uniform_trace({true, true, false, true, true});
  const TaskResult res = simulate(trace, {2});
  const auto ks = realized_optimal_k(res);
  REQUIRE(ks.size() == res.rounds.size());
  CHECK(ks[0] == 3);
  CHECK(ks[1] == 1);
  CHECK_FALSE(ks[2].has_value());
}

TEST_CASE("policy errors") {
  const TaskTrace trace = testutil::all_match(2);
  CHECK_THROWS_AS(simulate(trace, {-1}), PolicyFailure);
}
