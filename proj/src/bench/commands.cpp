#include "specplan/bench/commands.hpp"

#include "artifacts.hpp"

#include "specplan/agents/sim_backend.hpp"
#include "specplan/core/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <ostream>

namespace specplan::bench {

namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

nlohmann::json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

template <class T>
std::vector<T> read_jsonl(const fs::path& path) {
  auto in = open_in(path);
  std::vector<T> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<T>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<metrics::TaskBaseline> read_baseline(const fs::path& path) {
  auto in = open_in(path);
  std::vector<metrics::TaskBaseline> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    rows.push_back({j.at("task_id").get<std::string>(), j.at("time_ms").get<Millis>(), j.at("usage").get<TokenUsage>()});
  }
  return rows;
}

constexpr std::size_t kAccuracyWindow = 50;

}  // namespace

namespace detail {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_baseline(const fs::path& path, const std::vector<metrics::TaskBaseline>& rows) {
  auto out = open_out(path);
  for (const auto& b : rows) {
    out << nlohmann::json{{"task_id", b.task_id}, {"time_ms", b.time_ms}, {"usage", b.usage}}.dump() << '\n';
  }
}

PolicyWriter::PolicyWriter(const fs::path& out, const std::string& policy)
    : ledger_(open_out(out / ("ledger-" + policy + ".jsonl"))), rounds_(open_out(out / ("rounds-" + policy + ".jsonl"))) {
  run_.policy = policy;
}

void PolicyWriter::add(const engine::TaskResult& res) {
  write_ledger(ledger_, res.ledger);
  for (const auto& r : res.rounds) rounds_ << nlohmann::json(r).dump() << '\n';
  ledger_.flush();
  rounds_.flush();
  accuracy_.push_back(task_accuracy(res));
  run_.tasks.push_back({res.task_id, res.total_time, res.ledger, res.rounds});
}

void PolicyWriter::add_partial(const std::vector<CallRecord>& records) {
  write_ledger(ledger_, records);
  ledger_.flush();
}

PolicyRun PolicyWriter::finish() {
  run_.accuracy = windowed(accuracy_, kAccuracyWindow);
  return std::move(run_);
}

void save_policy_state(engine::KPolicy& policy, const std::string& name, const fs::path& out) {
  if (auto* dyn = dynamic_cast<baselines::DynamicPolicy*>(&policy)) {
    dyn->settle();
    predictor::save_checkpoint(*dyn->checkpoint(), out / "checkpoints" / (name + ".json"));
    if (dyn->learner()) {
      auto buf = open_out(out / "checkpoints" / (name + "-buffer.jsonl"));
      dyn->learner()->buffer().dump_jsonl(buf);
    }
  } else if (auto* bo = dynamic_cast<baselines::BoPolicy*>(&policy)) {
    open_out(out / ("bo-" + name + ".json")) << nlohmann::json(*bo).dump(2) << '\n';
  }
}

void write_accuracy(const fs::path& path, const std::vector<PolicyRun>& runs) {
  auto out = open_out(path);
  out << "mode,window,first_task,last_task,mean,sd\n";
  for (const auto& r : runs) {
    for (std::size_t w = 0; w < r.accuracy.size(); ++w) {
      if (!r.accuracy[w]) continue;
      out << r.policy << ',' << w + 1 << ',' << w * kAccuracyWindow + 1 << ','
          << std::min(r.tasks.size(), (w + 1) * kAccuracyWindow) << ',' << metrics::fixed(r.accuracy[w]->first) << ','
          << metrics::fixed(r.accuracy[w]->second) << '\n';
    }
  }
}

void write_manifest(const fs::path& out, const BenchConfig& cfg, nlohmann::json extra) {
  nlohmann::json names = nlohmann::json::array();
  for (const auto& s : cfg.policies) names.push_back(s.name);
  nlohmann::json raw = cfg.raw;
  raw.erase("config_dir");
  nlohmann::json manifest = {{"mode", cfg.mode},
                             {"policies", std::move(names)},
                             {"reference", cfg.reference},
                             {"prices", cfg.prices},
                             {"config", std::move(raw)}};
  manifest.update(extra);
  open_out(out / "manifest.json") << manifest.dump(2) << '\n';
}

}  // namespace detail

using namespace detail;

std::vector<agents::TaskTrace> load_workload(const fs::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  std::vector<agents::TaskTrace> out;
  for (const auto& id : manifest.at("tasks")) {
    out.push_back(agents::load_trace(dir / "traces" / (id.get<std::string>() + ".json")));
  }
  return out;
}

std::vector<agents::TaskTrace> workload_of(const BenchConfig& cfg) {
  if (!cfg.traces.empty()) return load_workload(cfg.traces);
  if (!cfg.generator) throw ConfigError("no workload configured");
  return agents::generate_tasks(*cfg.generator);
}

agents::OptimalKStats cmd_gen(const BenchConfig& cfg, const fs::path& out) {
  if (!cfg.generator) throw ConfigError("gen needs workload.generator");
  const auto traces = agents::generate_tasks(*cfg.generator);
  make_dirs(out / "traces");
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& t : traces) {
    agents::save_trace(t, out / "traces" / (t.task_id + ".json"));
    ids.push_back(t.task_id);
  }
  const auto stats = agents::optimal_k_stats(traces);
  nlohmann::json manifest = {{"tasks", std::move(ids)}, {"stats", stats}, {"generator", *cfg.generator}};
  open_out(out / "manifest.json") << manifest.dump(2) << '\n';
  return stats;
}

std::optional<double> task_accuracy(const engine::TaskResult& result) {
  const auto k_star = engine::realized_optimal_k(result);
  int scored = 0, hits = 0;
  for (std::size_t i = 0; i < k_star.size(); ++i) {
    if (!k_star[i]) continue;
    ++scored;
    if (result.rounds[i].k == *k_star[i]) ++hits;
  }
  if (scored == 0) return std::nullopt;
  return static_cast<double>(hits) / scored;
}

std::vector<std::optional<std::pair<double, double>>> windowed(const std::vector<std::optional<double>>& values,
                                                              std::size_t window) {
  std::vector<std::optional<std::pair<double, double>>> out;
  for (std::size_t lo = 0; lo < values.size(); lo += window) {
    double sum = 0, sq = 0;
    int n = 0;
    for (std::size_t i = lo; i < std::min(values.size(), lo + window); ++i) {
      if (!values[i]) continue;
      sum += *values[i];
      sq += *values[i] * *values[i];
      ++n;
    }
    if (n == 0) {
      out.emplace_back();
      continue;
    }
    const double mean = sum / n;
    out.emplace_back(std::pair(mean, std::sqrt(std::max(0.0, sq / n - mean * mean))));
  }
  return out;
}

std::vector<PolicyRun> cmd_run(const BenchConfig& cfg, const fs::path& out, std::ostream* log) {
  if (cfg.mode != "sim") throw ConfigError("run needs mode sim; use live for endpoints");
  const auto workload = workload_of(cfg);
  make_dirs(out / "checkpoints");

  std::vector<metrics::TaskBaseline> baseline;
  for (const auto& t : workload) {
    const auto b = engine::sequential_baseline(t, cfg.prices);
    baseline.push_back({t.task_id, b.time_ms, b.usage});
  }
  write_baseline(out / "baseline.jsonl", baseline);

  std::vector<PolicyRun> runs;
  for (const auto& spec : cfg.policies) {
    if (log) *log << "running " << spec.name << " over " << workload.size() << " tasks\n";
    auto policy = make_policy(spec, cfg.seed);
    PolicyWriter writer(out, spec.name);
    int round_id = 0;
    for (const auto& trace : workload) {
      agents::SimBackend backend(trace);
      VirtualClock clock;
      engine::EngineOptions opt;
      opt.task_id = trace.task_id;
      opt.first_round_id = round_id;
      opt.predictor_latency_ms = cfg.predictor_latency_ms;
      const auto res = engine::run_task(backend, *policy, clock, opt);
      round_id += static_cast<int>(res.rounds.size());
      writer.add(res);
    }
    save_policy_state(*policy, spec.name, out);
    runs.push_back(writer.finish());
  }
  write_accuracy(out / "accuracy.csv", runs);
  write_manifest(out, cfg, {{"tasks", workload.size()}, {"workload", agents::optimal_k_stats(workload)}});
  return runs;
}

std::vector<metrics::RunReport> cmd_report(const fs::path& run_dir, const std::string& reference, const fs::path& csv) {
  if (!fs::exists(run_dir / "manifest.json")) throw MissingRun("no run manifest in " + run_dir.string());
  const auto manifest = read_json(run_dir / "manifest.json");
  const auto prices = manifest.at("prices").get<PriceTable>();
  const auto baseline = read_baseline(run_dir / "baseline.jsonl");

  std::vector<metrics::RunReport> reports;
  for (const auto& name_j : manifest.at("policies")) {
    const auto name = name_j.get<std::string>();
    const auto ledger_path = run_dir / ("ledger-" + name + ".jsonl");
    const auto rounds_path = run_dir / ("rounds-" + name + ".jsonl");
    if (!fs::exists(ledger_path) || !fs::exists(rounds_path)) throw MissingRun("missing ledger or rounds for " + name);
    const auto ledger = read_jsonl<CallRecord>(ledger_path);
    const auto rounds = read_jsonl<engine::RoundLog>(rounds_path);
    const auto tasks = metrics::group_by_task(ledger, rounds);
    reports.push_back(metrics::summarize(name, tasks, baseline, prices));
  }
  const auto ref = std::find_if(reports.begin(), reports.end(), [&](const auto& r) { return r.policy == reference; });
  if (ref == reports.end()) throw MissingRun("reference policy '" + reference + "' is not in " + run_dir.string());
  metrics::set_reference(reports, *ref);

  const fs::path dir = csv.parent_path().empty() ? fs::path(".") : csv.parent_path();
  make_dirs(dir);
  {
    auto out = open_out(csv);
    metrics::write_report_csv(out, reports);
  }
  {
    auto out = open_out(dir / "breakdown.csv");
    metrics::write_breakdown_csv(out, reports);
  }
  {
    auto out = open_out(dir / "scatter.csv");
    metrics::write_scatter_csv(out, reports);
  }
  nlohmann::json j = {{"reference", reference}, {"reports", reports}};
  open_out(dir / "report.json") << j.dump(2) << '\n';
  return reports;
}

}  // namespace specplan::bench
