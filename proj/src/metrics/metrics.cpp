#include "specplan/metrics/metrics.hpp"

#include "specplan/core/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <utility>

namespace specplan::metrics {

namespace {

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) throw LengthMismatch("got " + std::to_string(a) + " values against " + std::to_string(b));
}

double mean_percent(std::span<const double> sp, std::span<const double> seq, bool saving) {
  require_same_length(sp.size(), seq.size());
  if (sp.empty()) return 0.0;
  double acc = 0;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    const double r = sp[i] / seq[i];
    acc += saving ? 1.0 - r : r - 1.0;
  }
  return acc / static_cast<double>(sp.size()) * 100.0;
}

}  // namespace

double delta_time(std::span<const double> sp, std::span<const double> seq) { return mean_percent(sp, seq, true); }

double delta_tokens(std::span<const double> sp, std::span<const double> seq) { return mean_percent(sp, seq, false); }

double delta_cost(std::span<const TokenUsage> sp, std::span<const TokenUsage> seq, const PriceTable& prices) {
  require_same_length(sp.size(), seq.size());
  std::vector<double> a, b;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    a.push_back(usage_cost(sp[i], prices));
    b.push_back(usage_cost(seq[i], prices));
  }
  return mean_percent(a, b, false);
}

Ratios ratios(const Totals& run, const Totals& ref) {
  return {run.time_ms / ref.time_ms, run.prompt / ref.prompt, run.gen / ref.gen, run.cost / ref.cost};
}

int peak_concurrency(std::span<const CallRecord> ledger) {
  // Ends sort before starts at the same instant: [start, end) intervals.
  std::vector<std::pair<Millis, int>> events;
  events.reserve(ledger.size() * 2);
  for (const auto& r : ledger) {
    if (r.end_ms <= r.start_ms) continue;
    events.emplace_back(r.start_ms, +1);
    events.emplace_back(r.end_ms, -1);
  }
  std::sort(events.begin(), events.end());
  int live = 0, peak = 0;
  for (const auto& [t, d] : events) {
    live += d;
    peak = std::max(peak, live);
  }
  return peak;
}

std::vector<bool> redundant_mask(std::span<const CallRecord> ledger) {
  std::map<std::pair<int, int>, int> last_round;
  for (const auto& r : ledger) {
    auto& slot = last_round.try_emplace({int(r.role), r.step}, r.round_id).first->second;
    slot = std::max(slot, r.round_id);
  }
  std::vector<bool> out;
  out.reserve(ledger.size());
  for (const auto& r : ledger) out.push_back(r.round_id != last_round.at({int(r.role), r.step}));
  return out;
}

Breakdown cost_breakdown(std::span<const CallRecord> ledger, const TokenUsage& normal) {
  Breakdown b;
  b.normal = normal;
  const auto mask = redundant_mask(ledger);
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    b.actual.add(ledger[i]);
    if (mask[i]) b.redundant.add(ledger[i]);
  }
  return b;
}

std::vector<TaskRun> group_by_task(std::span<const CallRecord> ledger, std::span<const engine::RoundLog> rounds) {
  std::vector<TaskRun> tasks;
  std::map<std::string, std::size_t> index;
  std::map<int, std::size_t> round_task;
  for (const auto& r : rounds) {
    auto [it, fresh] = index.try_emplace(r.task_id, tasks.size());
    if (fresh) tasks.push_back(TaskRun{r.task_id, 0, {}, {}});
    if (!round_task.emplace(r.round_id, it->second).second) {
      throw ParseError("round id " + std::to_string(r.round_id) + " appears twice");
    }
    tasks[it->second].rounds.push_back(r);
  }
  for (const auto& rec : ledger) {
    auto it = round_task.find(rec.round_id);
    if (it == round_task.end()) throw ParseError("ledger record for unknown round " + std::to_string(rec.round_id));
    tasks[it->second].ledger.push_back(rec);
  }
  for (auto& t : tasks) {
    Millis lo = t.rounds.front().start_ms, hi = t.rounds.front().end_ms;
    for (const auto& r : t.rounds) {
      lo = std::min(lo, r.start_ms);
      hi = std::max(hi, r.end_ms);
    }
    t.time_ms = hi - lo;
  }
  return tasks;
}

RunReport summarize(const std::string& policy, std::span<const TaskRun> tasks, std::span<const TaskBaseline> baseline,
                    const PriceTable& prices) {
  require_same_length(tasks.size(), baseline.size());
  RunReport rep;
  rep.policy = policy;
  rep.tasks = tasks.size();
  std::vector<double> t_sp, t_seq, p_sp, p_seq, g_sp, g_seq;
  std::vector<TokenUsage> u_sp, u_seq;
  double peaks = 0, ks = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    const auto& b = baseline[i];
    if (t.task_id != b.task_id) throw LengthMismatch("task " + t.task_id + " lines up with baseline " + b.task_id);
    const TokenUsage used = usage_of(t.ledger);
    t_sp.push_back(static_cast<double>(t.time_ms));
    t_seq.push_back(static_cast<double>(b.time_ms));
    p_sp.push_back(static_cast<double>(used.prompt()));
    p_seq.push_back(static_cast<double>(b.usage.prompt()));
    g_sp.push_back(static_cast<double>(used.gen()));
    g_seq.push_back(static_cast<double>(b.usage.gen()));
    u_sp.push_back(used);
    u_seq.push_back(b.usage);

    rep.totals.time_ms += static_cast<double>(t.time_ms);
    rep.totals.prompt += static_cast<double>(used.prompt());
    rep.totals.gen += static_cast<double>(used.gen());
    rep.totals.cost += usage_cost(used, prices);

    peaks += peak_concurrency(t.ledger);
    for (const auto& r : t.rounds) ks += r.k;
    rep.rounds += t.rounds.size();

    const Breakdown bd = cost_breakdown(t.ledger, b.usage);
    rep.summed.normal += bd.normal;
    rep.summed.actual += bd.actual;
    rep.summed.redundant += bd.redundant;
  }
  rep.delta_t = delta_time(t_sp, t_seq);
  rep.delta_p = delta_tokens(p_sp, p_seq);
  rep.delta_g = delta_tokens(g_sp, g_seq);
  rep.delta_cost = delta_cost(u_sp, u_seq, prices);
  if (!tasks.empty()) rep.concurrency.mc_bar = peaks / static_cast<double>(tasks.size());
  if (rep.rounds > 0) rep.concurrency.k_bar = ks / static_cast<double>(rep.rounds);
  return rep;
}

void set_reference(std::vector<RunReport>& reports, const RunReport& reference) {
  const Totals ref = reference.totals;
  for (auto& r : reports) r.vs_reference = ratios(r.totals, ref);
}

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  std::string s(buf);
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);  // no "-0.0000"
  return s;
}

void write_report_csv(std::ostream& out, std::span<const RunReport> reports) {
  out << "mode,delta_t_pct,delta_p_pct,delta_g_pct,delta_cost_pct,t_ratio,p_ratio,g_ratio,cost_ratio,mc_bar,k_bar\n";
  for (const auto& r : reports) {
    out << r.policy << ',' << fixed(r.delta_t) << ',' << fixed(r.delta_p) << ',' << fixed(r.delta_g) << ','
        << fixed(r.delta_cost) << ',' << fixed(r.vs_reference.time) << ',' << fixed(r.vs_reference.prompt) << ','
        << fixed(r.vs_reference.gen) << ',' << fixed(r.vs_reference.cost) << ',' << fixed(r.concurrency.mc_bar)
        << ',' << fixed(r.concurrency.k_bar) << '\n';
  }
}

namespace {

void usage_row(std::ostream& out, const std::string& policy, const char* plan, const TokenUsage& u, double n) {
  auto avg = [n](std::int64_t v) { return fixed(n > 0 ? static_cast<double>(v) / n : 0.0, 2); };
  out << policy << ',' << plan << ',' << avg(u.approx_prompt) << ',' << avg(u.approx_gen) << ','
      << avg(u.target_prompt) << ',' << avg(u.target_gen) << ',' << avg(u.prompt()) << ',' << avg(u.gen()) << ','
      << avg(u.total()) << '\n';
}

}  // namespace

void write_breakdown_csv(std::ostream& out, std::span<const RunReport> reports) {
  out << "mode,plan,approx_prompt,approx_gen,target_prompt,target_gen,total_prompt,total_gen,total\n";
  for (const auto& r : reports) {
    const double n = static_cast<double>(r.tasks);
    usage_row(out, r.policy, "normal", r.summed.normal, n);
    usage_row(out, r.policy, "actual", r.summed.actual, n);
    usage_row(out, r.policy, "delta", r.summed.delta(), n);
    usage_row(out, r.policy, "redundant", r.summed.redundant, n);
  }
}

void write_scatter_csv(std::ostream& out, std::span<const RunReport> reports) {
  out << "mode,delta_t_pct,delta_p_pct,delta_g_pct\n";
  for (const auto& r : reports) {
    out << r.policy << ',' << fixed(r.delta_t) << ',' << fixed(r.delta_p) << ',' << fixed(r.delta_g) << '\n';
  }
}

void to_json(nlohmann::json& j, const RunReport& r) {
  j = {{"policy", r.policy},
       {"delta_t_pct", r.delta_t},
       {"delta_p_pct", r.delta_p},
       {"delta_g_pct", r.delta_g},
       {"delta_cost_pct", r.delta_cost},
       {"totals",
        {{"time_ms", r.totals.time_ms}, {"prompt", r.totals.prompt}, {"gen", r.totals.gen}, {"cost", r.totals.cost}}},
       {"vs_reference",
        {{"time", r.vs_reference.time},
         {"prompt", r.vs_reference.prompt},
         {"gen", r.vs_reference.gen},
         {"cost", r.vs_reference.cost}}},
       {"mc_bar", r.concurrency.mc_bar},
       {"k_bar", r.concurrency.k_bar},
       {"tasks", r.tasks},
       {"rounds", r.rounds},
       {"breakdown_sum",
        {{"normal", r.summed.normal}, {"actual", r.summed.actual}, {"redundant", r.summed.redundant}}}};
}

}  // namespace specplan::metrics
