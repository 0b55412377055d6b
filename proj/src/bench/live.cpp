#include "specplan/agents/live_backend.hpp"
#include "specplan/bench/commands.hpp"
#include "specplan/core/errors.hpp"

#include "artifacts.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace specplan::bench {

namespace fs = std::filesystem;
using namespace detail;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The backend's own error (AuthError, HttpError, ParseError) is what the
// caller should see.
[[noreturn]] void rethrow_cause(const engine::BackendFailure& e) {
  if (e.cause) std::rethrow_exception(e.cause);
  throw e;
}

// One approx call on `prefix`, waited for outside any round.
agents::Usage approx_usage(agents::AgentBackend& backend, Scheduler& sched, const PlanState& prefix) {
  std::optional<agents::CallOutcome> got;
  const int step = static_cast<int>(prefix.step_index()) + 1;
  backend.launch({Role::approx, step, -1, prefix}, sched, [&](agents::CallOutcome o) { got = std::move(o); });
  while (!got) sched.run_one();
  if (got->error) std::rethrow_exception(got->error);
  return got->usage;
}

// Target-only pass for time and target tokens, plus the approx agent asked
// once per committed state for the approx share of the sequential cost.
metrics::TaskBaseline live_baseline(const agents::LiveSettings& settings, const std::string& id,
                                    const std::string& prompt) {
  WallClockScheduler sched;
  agents::LiveBackend backend(settings, prompt);
  baselines::SequentialPolicy sequential;
  engine::EngineOptions opt;
  opt.task_id = id;
  engine::TaskResult res;
  try {
    res = engine::run_task(backend, sequential, sched, opt);
  } catch (const engine::BackendFailure& e) {
    rethrow_cause(e);
  }
  metrics::TaskBaseline row{id, res.total_time, usage_of(res.ledger)};
  for (std::size_t i = 0; i < res.committed.size(); ++i) {
    const auto u = approx_usage(backend, sched, res.states[i]);
    row.usage.approx_prompt += u.prompt_tokens;
    row.usage.approx_gen += u.gen_tokens;
  }
  return row;
}

}  // namespace

void cmd_live(const BenchConfig& cfg, const fs::path& out, std::ostream* log) {
  if (!cfg.live) throw ConfigError("live needs a live section");
  const LiveConfig& live = *cfg.live;
  agents::LiveSettings settings;
  settings.api_key = agents::api_key_from_env(live.api_key_env);  // before any request
  settings.base_url = live.base_url;
  settings.approx_model = live.approx_model;
  settings.target_model = live.target_model;
  settings.approx_template = read_text(live.approx_template);
  settings.target_template = read_text(live.target_template);
  settings.stop_marker = live.stop_marker;
  settings.max_steps = live.max_steps;
  settings.exec_latency_ms = live.exec_latency_ms;
  settings.timeout_s = live.timeout_s;
  if (live.tasks.empty()) throw ConfigError("live needs at least one task");
  make_dirs(out / "checkpoints");

  std::vector<metrics::TaskBaseline> baseline;
  for (const auto& [id, prompt] : live.tasks) {
    if (log) *log << "baseline " << id << '\n';
    baseline.push_back(live_baseline(settings, id, prompt));
  }
  write_baseline(out / "baseline.jsonl", baseline);

  std::vector<PolicyRun> runs;
  for (const auto& spec : cfg.policies) {
    if (log) *log << "running " << spec.name << " over " << live.tasks.size() << " tasks\n";
    auto policy = make_policy(spec, cfg.seed, /*background=*/true);
    PolicyWriter writer(out, spec.name);
    int round_id = 0;
    for (const auto& [id, prompt] : live.tasks) {
      WallClockScheduler sched;  // outlives the backend's call threads
      agents::LiveBackend backend(settings, prompt);
      engine::EngineOptions opt;
      opt.task_id = id;
      opt.first_round_id = round_id;
      opt.predictor_latency_ms = cfg.predictor_latency_ms;
      engine::TaskResult res;
      try {
        res = engine::run_task(backend, *policy, sched, opt);
      } catch (const engine::BackendFailure& e) {
        writer.add_partial(e.partial_ledger);
        rethrow_cause(e);
      }
      round_id += static_cast<int>(res.rounds.size());
      writer.add(res);
    }
    save_policy_state(*policy, spec.name, out);
    runs.push_back(writer.finish());
  }
  write_accuracy(out / "accuracy.csv", runs);
  write_manifest(out, cfg, {{"tasks", live.tasks.size()}});
}

}  // namespace specplan::bench
