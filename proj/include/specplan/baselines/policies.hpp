#pragma once

#include "specplan/engine/engine.hpp"
#include "specplan/predictor/trainer.hpp"

#include <nlohmann/json_fwd.hpp>

#include <memory>
#include <random>
#include <vector>

namespace specplan::baselines {

/// Target-only execution: every round is k=0.
class SequentialPolicy final : public engine::KPolicy {
 public:
  std::string name() const override { return "sequential"; }
  int choose_k(const PlanState&) override { return 0; }
};

class FixedKPolicy final : public engine::KPolicy {
 public:
  /// Throws ConfigError for k < 1.
  explicit FixedKPolicy(int k);
  std::string name() const override { return "fixed-k" + std::to_string(k_); }
  int choose_k(const PlanState&) override { return k_; }
  int k() const noexcept { return k_; }

 private:
  int k_;
};

/// When the learner trains relative to the engine.
enum class TrainMode {
  inline_task_end,  // simulation: a pass at each task end, zero virtual time
  background,       // live: worker thread, never waited on
};

/// The learned policy: predicts k from the state with the current
/// checkpoint and trains online on every closed match run.
class DynamicPolicy final : public engine::KPolicy {
 public:
  DynamicPolicy(std::string name, predictor::Hyperparams hyper, TrainMode mode = TrainMode::inline_task_end,
                predictor::AsyncTrainer::TrainFn train_fn = {});

  std::string name() const override { return name_; }
  int choose_k(const PlanState& state) override;
  bool uses_predictor() const override { return true; }
  void on_run_closed(const engine::MatchRun& run) override;
  void on_task_end(const engine::TaskResult& result) override;

  std::shared_ptr<const predictor::ValueModel> checkpoint() const { return slot_->load(); }
  const predictor::Hyperparams& hyper() const noexcept { return hyper_; }
  /// Waits for background training; a no-op in inline mode.
  void settle();
  /// The inline learner (null in background mode), for buffer dumps.
  const predictor::Learner* learner() const noexcept { return learner_.get(); }

 private:
  std::string name_;
  predictor::Hyperparams hyper_;
  TrainMode mode_;
  std::shared_ptr<predictor::CheckpointSlot> slot_;
  std::unique_ptr<predictor::Learner> learner_;
  std::unique_ptr<predictor::AsyncTrainer> async_;
};

/// Dynamic policy trained on Monte-Carlo labels: lambda = gamma = 1.
std::unique_ptr<DynamicPolicy> make_sft_policy(std::string name, predictor::Hyperparams hyper,
                                               TrainMode mode = TrainMode::inline_task_end);

struct ArmStats {
  double sum = 0;
  int count = 0;
  double mean() const noexcept { return count > 0 ? sum / count : 0.0; }
};

/// 1 / (|k - k*| + 1).
double bo_reward(int k, int k_star);

/// Epsilon-greedy over arms 1..arms.size(): unexplored arms first, then
/// best mean with ties to the smaller k.
int bo_select(const std::vector<ArmStats>& arms, double epsilon, std::mt19937_64& rng);

void bo_update(std::vector<ArmStats>& arms, int k, int k_star);

/// Non-contextual comparator. k* of a round is the remaining length of the
/// match run containing the round's start state, known once that run closes
/// with a mismatch; rounds whose run is cut off by task end teach nothing.
class BoPolicy final : public engine::KPolicy {
 public:
  BoPolicy(std::string name, int k_max = 6, double epsilon = 0.1, std::uint64_t seed = 1);

  std::string name() const override { return name_; }
  int choose_k(const PlanState& state) override;
  void on_run_closed(const engine::MatchRun& run) override;
  void on_task_end(const engine::TaskResult& result) override;

  const std::vector<ArmStats>& arms() const noexcept { return arms_; }

 private:
  struct Pending {
    int start_step;  // steps committed when the round began
    int k;
  };

  std::string name_;
  double epsilon_;
  std::mt19937_64 rng_;
  std::vector<ArmStats> arms_;
  std::vector<Pending> pending_;
};

void to_json(nlohmann::json& j, const BoPolicy& p);

}  // namespace specplan::baselines
