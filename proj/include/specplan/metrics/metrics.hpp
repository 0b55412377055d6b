#pragma once

#include "specplan/core/call_record.hpp"
#include "specplan/core/prices.hpp"
#include "specplan/engine/engine.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace specplan::metrics {

/// mean over tasks of (1 - sp/seq) * 100. Throws LengthMismatch.
double delta_time(std::span<const double> sp, std::span<const double> seq);

/// mean over tasks of (sp/seq - 1) * 100; used for prompt and generation
/// tokens separately. Throws LengthMismatch.
double delta_tokens(std::span<const double> sp, std::span<const double> seq);

/// mean over tasks of ((PC+GC)_sp / (PC+GC)_seq - 1) * 100 with
/// price-weighted role splits. Throws LengthMismatch.
double delta_cost(std::span<const TokenUsage> sp, std::span<const TokenUsage> seq, const PriceTable& prices);

/// Aggregate totals of one policy over all tasks.
struct Totals {
  double time_ms = 0;
  double prompt = 0;
  double gen = 0;
  double cost = 0;
};

struct Ratios {
  double time = 1;
  double prompt = 1;
  double gen = 1;
  double cost = 1;
};

/// Elementwise run / reference on aggregate totals.
Ratios ratios(const Totals& run, const Totals& reference);

/// Peak number of overlapping calls; intervals are [start, end).
int peak_concurrency(std::span<const CallRecord> ledger);

struct Concurrency {
  double mc_bar = 0;  // mean over tasks of the peak
  double k_bar = 0;   // mean issued k over all rounds
};

/// Per-(role, step) the record of the last round that touched the step is
/// the useful one; every other record is redundant.
std::vector<bool> redundant_mask(std::span<const CallRecord> ledger);

struct Breakdown {
  TokenUsage normal;     // sequential approx + target tokens
  TokenUsage actual;     // everything the run spent
  TokenUsage redundant;  // census of redundant records
  TokenUsage delta() const { return actual - normal; }
};

/// Breakdown of one task's ledger against its normal plan.
Breakdown cost_breakdown(std::span<const CallRecord> ledger, const TokenUsage& normal);

/// One task as recorded by a run.
struct TaskRun {
  std::string task_id;
  Millis time_ms = 0;
  std::vector<CallRecord> ledger;
  std::vector<engine::RoundLog> rounds;
};

/// Splits a policy-wide ledger into tasks using the round log (round ids are
/// unique across a run). Task time is last round end minus first round start.
std::vector<TaskRun> group_by_task(std::span<const CallRecord> ledger, std::span<const engine::RoundLog> rounds);

struct TaskBaseline {
  std::string task_id;
  Millis time_ms = 0;
  TokenUsage usage;
};

struct RunReport {
  std::string policy;
  double delta_t = 0;
  double delta_p = 0;
  double delta_g = 0;
  double delta_cost = 0;
  Totals totals;
  Ratios vs_reference;
  Concurrency concurrency;
  std::size_t tasks = 0;
  std::size_t rounds = 0;
  Breakdown summed;  // over tasks; reported as per-task averages
};

/// Every metric except the reference ratios. Throws LengthMismatch when the
/// tasks do not line up with the baseline.
RunReport summarize(const std::string& policy, std::span<const TaskRun> tasks, std::span<const TaskBaseline> baseline,
                    const PriceTable& prices);

void set_reference(std::vector<RunReport>& reports, const RunReport& reference);

/// Table-style CSV, one row per policy.
void write_report_csv(std::ostream& out, std::span<const RunReport> reports);
/// Per-policy normal / actual / delta rows with the seven token columns.
void write_breakdown_csv(std::ostream& out, std::span<const RunReport> reports);
/// (delta_t, delta_p) and (delta_t, delta_g) points per policy.
void write_scatter_csv(std::ostream& out, std::span<const RunReport> reports);

void to_json(nlohmann::json& j, const RunReport& r);

/// Fixed-point with `digits` decimals, locale independent.
std::string fixed(double value, int digits = 4);

}  // namespace specplan::metrics
