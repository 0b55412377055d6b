#pragma once

#include "specplan/engine/engine.hpp"
#include "specplan/predictor/value_model.hpp"

#include <deque>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>

namespace specplan::predictor {

struct ExpectileTerm {
  double loss = 0;
  double grad = 0;  // d loss / d prediction, with u = target - prediction
};

/// |tau - 1(u<0)| * u^2 and its derivative with respect to the prediction.
ExpectileTerm expectile_loss(double u, double tau) noexcept;

/// A featurized match run; the unit labels are computed from.
struct RunFeatures {
  std::vector<FeatureVector> states;
  bool censored = false;
};

struct LabeledState {
  PlanState state;
  double label = 0;
};

/// Monte-Carlo labels: state i of a run of length T (1-based) gets T-i+1.
/// Runs cut off by task end are skipped unless include_censored.
std::vector<LabeledState> label_runs(std::span<const engine::MatchRun> runs, bool include_censored = false);

/// Lambda-return of every state in the run, bootstrapping on `model`. One
/// reward per speculated step, terminal after the last state.
std::vector<double> lambda_returns(const RunFeatures& run, const ValueModel& model, double gamma, double lambda);

struct Sample {
  const FeatureVector* x = nullptr;
  double target = 0;
};

/// One gradient step on the mean expectile loss of the batch.
void sgd_step(ValueModel& model, std::span<const Sample> batch, double tau, double lr);

struct TrainingExample {
  std::shared_ptr<const RunFeatures> run;
  std::size_t position = 0;
};

/// FIFO replay buffer of per-state examples.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 2500) : capacity_(capacity) {}

  void insert(const TrainingExample& example);
  /// Every state of the run becomes one example.
  void insert_run(std::shared_ptr<const RunFeatures> run);

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const TrainingExample& operator[](std::size_t i) const { return items_[i]; }

  /// One JSON object per example: position, length, censored, features.
  void dump_jsonl(std::ostream& out) const;

 private:
  std::size_t capacity_;
  std::deque<TrainingExample> items_;
};

RunFeatures featurize_run(const engine::MatchRun& run, const FeatureOptions& options);

/// epochs x ceil(size / batch) minibatches, each epoch a fresh permutation
/// (sampling without replacement). Lambda-returns are recomputed with the
/// current weights for every minibatch. Returns the updated model with its
/// version bumped.
ValueModel train_pass(ValueModel model, const ReplayBuffer& buffer, const Hyperparams& hyper, std::mt19937_64& rng);

}  // namespace specplan::predictor
