#include "specplan/agents/sim_backend.hpp"
#include "specplan/baselines/policies.hpp"
#include "specplan/core/errors.hpp"
#include "specplan/metrics/metrics.hpp"

#include "support/timeline_oracle.hpp"
#include "support/traces.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace specplan;
using namespace specplan::metrics;

namespace {

engine::TaskResult run_fixed(const agents::TaskTrace& trace, int k, int first_round = 0) {
  agents::SimBackend backend(trace);
  VirtualClock clock;
  baselines::FixedKPolicy policy(k);
  engine::EngineOptions opt;
  opt.task_id = trace.task_id;
  opt.first_round_id = first_round;
  return engine::run_task(backend, policy, clock, opt);
}

TaskRun as_run(const engine::TaskResult& r) { return TaskRun{r.task_id, r.total_time, r.ledger, r.rounds}; }

TaskBaseline baseline_of(const agents::TaskTrace& t) {
  const auto b = engine::sequential_baseline(t);
  return {t.task_id, b.time_ms, b.usage};
}

}  // namespace

TEST_CASE("delta formulas") {
  CHECK(delta_time(std::vector<double>{80}, std::vector<double>{100}) == doctest::Approx(20.0));
  CHECK(delta_time(std::vector<double>{7, 9}, std::vector<double>{7, 9}) == 0.0);
  CHECK(delta_time(std::vector<double>{50, 90}, std::vector<double>{100, 100}) == doctest::Approx(30.0));
  CHECK(delta_tokens(std::vector<double>{5, 6}, std::vector<double>{5, 6}) == 0.0);
  CHECK(delta_tokens(std::vector<double>{15, 30}, std::vector<double>{10, 20}) == doctest::Approx(50.0));
  CHECK_THROWS_AS(delta_time(std::vector<double>{1}, std::vector<double>{1, 2}), LengthMismatch);
  CHECK_THROWS_AS(delta_tokens(std::vector<double>{1}, std::vector<double>{}), LengthMismatch);
}

TEST_CASE("delta cost") {
  const TokenUsage base{1000, 200, 3000, 400};
  CHECK(delta_cost(std::vector<TokenUsage>{base}, std::vector<TokenUsage>{base}, {}) == 0.0);
  CHECK(delta_cost(std::vector<TokenUsage>{base + base}, std::vector<TokenUsage>{base}, {}) == doctest::Approx(100.0));

  // mixed prices: sp = {2M ap, 0.5M ag, 1M tp, 0.2M tg}, seq = {1M, 0.2M, 1M, 0.1M}
  // sp cost = 0.54 + 0.55 + 0.55 + 0.438 = 2.078; seq = 0.27 + 0.22 + 0.55 + 0.219 = 1.259
  const TokenUsage sp{2'000'000, 500'000, 1'000'000, 200'000};
  const TokenUsage seq{1'000'000, 200'000, 1'000'000, 100'000};
  CHECK(delta_cost(std::vector<TokenUsage>{sp}, std::vector<TokenUsage>{seq}, PriceTable::deepseek()) ==
        doctest::Approx((2.078 / 1.259 - 1) * 100).epsilon(1e-12));
}

TEST_CASE("ratios") {
  const Totals t{100, 50, 10, 2};
  const Ratios self = ratios(t, t);
  CHECK(self.time == 1.0);
  CHECK(self.prompt == 1.0);
  CHECK(self.gen == 1.0);
  CHECK(self.cost == 1.0);
  CHECK(ratios(Totals{50, 50, 10, 2}, t).time == 0.5);
}

TEST_CASE("peak concurrency sweep equals grid sampling") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto trace = testutil::random_trace(rng);
    const auto res = run_fixed(trace, 1 + trial % 4);
    CHECK(peak_concurrency(res.ledger) == oracle::grid_peak(res.ledger));
  }
  CHECK(peak_concurrency(std::vector<CallRecord>{}) == 0);
}

TEST_CASE("fixed k=2 on all-match tasks: MC 3 and K 2") {
  std::vector<TaskRun> runs;
  std::vector<TaskBaseline> base;
  int round = 0;
  for (int n : {10, 12, 14}) {
    auto trace = testutil::all_match(n);
    trace.task_id = "t" + std::to_string(n);
    const auto res = run_fixed(trace, 2, round);
    round += static_cast<int>(res.rounds.size());
    runs.push_back(as_run(res));
    base.push_back(baseline_of(trace));
  }
  const RunReport rep = summarize("fixed-k2", runs, base, {});
  CHECK(rep.concurrency.mc_bar == 3.0);
  CHECK(rep.concurrency.k_bar == 2.0);
}

TEST_CASE("peak is k+1 on all-match tasks with at least k+2 steps") {
  // Targets slow enough that k drafts fit inside the first target call.
  for (int k = 1; k <= 6; ++k) {
    const auto res = run_fixed(testutil::all_match(k + 2, 1, 20, 1), k);
    CHECK(peak_concurrency(res.ledger) == k + 1);
  }
  // sequential is one call at a time
  agents::SimBackend backend(testutil::all_match(4));
  VirtualClock clock;
  baselines::SequentialPolicy seq;
  CHECK(peak_concurrency(engine::run_task(backend, seq, clock).ledger) == 1);
}

TEST_CASE("k bar averages issued k") {
  TaskRun t{"a", 10, {}, {}};
  t.rounds.push_back({"a", 0, 0, 2, 2, engine::RoundTerminal::exhausted, 0, 5});
  t.rounds.push_back({"a", 1, 2, 3, 1, engine::RoundTerminal::task_end, 5, 10});
  const RunReport rep = summarize("x", std::vector<TaskRun>{t}, std::vector<TaskBaseline>{{"a", 10, {1, 1, 1, 1}}}, {});
  CHECK(rep.concurrency.k_bar == 2.5);
}

TEST_CASE("breakdown conservation against a recount") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto trace = testutil::random_trace(rng);
    const auto res = run_fixed(trace, 1 + trial % 4);
    const auto b = cost_breakdown(res.ledger, engine::sequential_baseline(trace).usage);
    CHECK(b.actual == b.normal + b.redundant);
    CHECK(b.delta() == b.redundant);
    CHECK(b.redundant.approx_prompt + b.redundant.approx_gen + b.redundant.target_prompt + b.redundant.target_gen ==
          b.redundant.total());
  }
}

TEST_CASE("perfect speculation has no redundant tokens") {
  // runs of exactly k: mismatch at every third step, k = 3
  const auto trace = testutil::uniform_trace({true, true, false, true, true, false});
  const auto res = run_fixed(trace, 3);
  const auto b = cost_breakdown(res.ledger, engine::sequential_baseline(trace).usage);
  CHECK(b.redundant.total() == 0);
  CHECK(b.delta().total() == 0);
}

TEST_CASE("forced mismatch at step 1: delta equals the canceled census") {
  auto trace = testutil::uniform_trace({false, true, true, true});
  const auto res = run_fixed(trace, 4);
  const auto b = cost_breakdown(res.ledger, engine::sequential_baseline(trace).usage);
  // Round 0: draft 2 [2,3) completed, drafts 3 [4,5) completed at the
  // detection instant, targets 2 and 3 canceled at 5 (3 of 5 ms and 1 of 5 ms).
  TokenUsage want;
  want.approx_prompt = 60 + 60;
  want.approx_gen = 5 + 5;
  want.target_prompt = 100 + 100;
  want.target_gen = 20 * 3 / 5 + 20 * 1 / 5;
  CHECK(b.redundant == want);
  CHECK(b.delta() == want);
}

TEST_CASE("group_by_task and summarize against a hand count") {
  const auto a = testutil::all_match(3);
  auto b = testutil::uniform_trace({false, true});
  b.task_id = "b";
  const auto ra = run_fixed(a, 3, 0);
  const auto rb = run_fixed(b, 1, static_cast<int>(ra.rounds.size()));
  std::vector<CallRecord> ledger = ra.ledger;
  ledger.insert(ledger.end(), rb.ledger.begin(), rb.ledger.end());
  std::vector<engine::RoundLog> rounds = ra.rounds;
  rounds.insert(rounds.end(), rb.rounds.begin(), rb.rounds.end());
  const auto tasks = group_by_task(ledger, rounds);
  REQUIRE(tasks.size() == 2);
  CHECK(tasks[0].time_ms == ra.total_time);
  CHECK(tasks[1].time_ms == rb.total_time);
  CHECK(tasks[1].ledger == rb.ledger);

  const RunReport rep = summarize("p", tasks, std::vector<TaskBaseline>{baseline_of(a), baseline_of(b)}, {});
  // a: 9 vs 18 -> 50%; b: step 1 ends at 6, step 2's execution overlaps
  // its verification, so 11 vs 12
  CHECK(rep.delta_t == doctest::Approx((50.0 + 100.0 / 12) / 2));
  CHECK(rep.delta_p == doctest::Approx(0.0));
  CHECK_THROWS_AS(summarize("p", tasks, std::vector<TaskBaseline>{baseline_of(a)}, {}), LengthMismatch);
}

TEST_CASE("report csv") {
  RunReport r;
  r.policy = "fixed-k2";
  r.concurrency = {3.0, 2.0};
  std::vector<RunReport> reps{r};
  set_reference(reps, r);
  std::ostringstream out;
  r.totals = {1, 1, 1, 1};
  reps[0].totals = r.totals;
  set_reference(reps, reps[0]);
  write_report_csv(out, reps);
  CHECK(out.str() ==
        "mode,delta_t_pct,delta_p_pct,delta_g_pct,delta_cost_pct,t_ratio,p_ratio,g_ratio,cost_ratio,mc_bar,k_bar\n"
        "fixed-k2,0.0000,0.0000,0.0000,0.0000,1.0000,1.0000,1.0000,1.0000,3.0000,2.0000\n");
  CHECK(fixed(-0.00001) == "0.0000");
  CHECK(fixed(-1.5, 1) == "-1.5");
}
