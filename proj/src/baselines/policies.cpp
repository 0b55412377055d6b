#include "specplan/baselines/policies.hpp"

#include "specplan/core/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>

namespace specplan::baselines {

FixedKPolicy::FixedKPolicy(int k) : k_(k) {
  if (k < 1) throw ConfigError("fixed k must be >= 1, got " + std::to_string(k));
}

DynamicPolicy::DynamicPolicy(std::string name, predictor::Hyperparams hyper, TrainMode mode,
                             predictor::AsyncTrainer::TrainFn train_fn)
    : name_(std::move(name)),
      hyper_(hyper),
      mode_(mode),
      slot_(std::make_shared<predictor::CheckpointSlot>(std::make_shared<const predictor::ValueModel>(hyper))) {
  hyper_.validate();
  if (mode_ == TrainMode::inline_task_end) {
    learner_ = std::make_unique<predictor::Learner>(hyper_);
  } else {
    async_ = std::make_unique<predictor::AsyncTrainer>(hyper_, slot_, std::move(train_fn));
  }
}

int DynamicPolicy::choose_k(const PlanState& state) { return predictor::predict_k(*slot_->load(), state); }

void DynamicPolicy::on_run_closed(const engine::MatchRun& run) {
  if (learner_) {
    learner_->add_run(run);
  } else {
    async_->submit(run);
  }
}

void DynamicPolicy::on_task_end(const engine::TaskResult&) {
  if (learner_ && learner_->ready()) slot_->swap(learner_->train());
}

void DynamicPolicy::settle() {
  if (async_) async_->drain();
}

std::unique_ptr<DynamicPolicy> make_sft_policy(std::string name, predictor::Hyperparams hyper, TrainMode mode) {
  hyper.lambda = 1.0;
  hyper.gamma = 1.0;
  return std::make_unique<DynamicPolicy>(std::move(name), hyper, mode);
}

double bo_reward(int k, int k_star) {
  if (k < 1 || k_star < 1) throw ConfigError("bo_reward needs k, k* >= 1");
  return 1.0 / (std::abs(k - k_star) + 1);
}

int bo_select(const std::vector<ArmStats>& arms, double epsilon, std::mt19937_64& rng) {
  if (arms.empty()) throw ConfigError("no arms");
  if (epsilon < 0 || epsilon > 1) throw ConfigError("epsilon must lie in [0, 1]");
  // Draw the exploration coin every time so the RNG stream does not depend
  // on the branch taken.
  const double coin = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const int pick = std::uniform_int_distribution<int>(1, static_cast<int>(arms.size()))(rng);
  if (coin < epsilon) return pick;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (arms[i].count == 0) return static_cast<int>(i) + 1;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < arms.size(); ++i) {
    if (arms[i].mean() > arms[best].mean()) best = i;
  }
  return static_cast<int>(best) + 1;
}

void bo_update(std::vector<ArmStats>& arms, int k, int k_star) {
  if (k < 1 || k > static_cast<int>(arms.size())) throw ConfigError("arm " + std::to_string(k) + " out of range");
  auto& a = arms[static_cast<std::size_t>(k - 1)];
  a.sum += bo_reward(k, k_star);
  ++a.count;
}

BoPolicy::BoPolicy(std::string name, int k_max, double epsilon, std::uint64_t seed)
    : name_(std::move(name)), epsilon_(epsilon), rng_(seed) {
  if (k_max < 1) throw ConfigError("k_max must be >= 1");
  if (epsilon < 0 || epsilon > 1) throw ConfigError("epsilon must lie in [0, 1]");
  arms_.resize(static_cast<std::size_t>(k_max));
}

int BoPolicy::choose_k(const PlanState& state) {
  const int k = bo_select(arms_, epsilon_, rng_);
  pending_.push_back({static_cast<int>(state.step_index()), k});
  return k;
}

void BoPolicy::on_run_closed(const engine::MatchRun& run) {
  const int first = run.first_step;
  const int last = first + static_cast<int>(run.length()) - 1;
  std::vector<Pending> keep;
  for (const auto& p : pending_) {
    const int step = p.start_step + 1;  // first step the round planned
    if (step < first || step > last) {
      keep.push_back(p);
      continue;
    }
    if (run.terminal == engine::RunTerminal::mismatch) bo_update(arms_, p.k, last - step + 1);
  }
  pending_ = std::move(keep);
}

void BoPolicy::on_task_end(const engine::TaskResult&) { pending_.clear(); }

void to_json(nlohmann::json& j, const BoPolicy& p) {
  auto arms = nlohmann::json::array();
  for (std::size_t i = 0; i < p.arms().size(); ++i) {
    const auto& a = p.arms()[i];
    arms.push_back({{"k", i + 1}, {"count", a.count}, {"sum", a.sum}, {"mean", a.mean()}});
  }
  j = {{"policy", p.name()}, {"arms", std::move(arms)}};
}

}  // namespace specplan::baselines
