#pragma once

#include "specplan/predictor/training.hpp"

#include <atomic>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>

namespace specplan::predictor {

/// The one shared mutable point between training and inference. Readers get
/// a complete immutable model; a swap replaces the pointer under a lock.
class CheckpointSlot {
 public:
  explicit CheckpointSlot(std::shared_ptr<const ValueModel> initial);

  std::shared_ptr<const ValueModel> load() const;
  /// Throws std::logic_error unless the version increases.
  void swap(std::shared_ptr<const ValueModel> next);

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const ValueModel> current_;
};

/// Training-side state: buffer, RNG and the model being trained.
class Learner {
 public:
  explicit Learner(Hyperparams hyper);

  const Hyperparams& hyper() const noexcept { return hyper_; }
  /// Featurizes and buffers a closed run; returns false if it was skipped
  /// (censored and not included).
  bool add_run(const engine::MatchRun& run);
  bool ready() const noexcept;
  /// A full pass over the buffer; returns the new checkpoint.
  std::shared_ptr<const ValueModel> train();

  const ReplayBuffer& buffer() const noexcept { return buffer_; }
  std::size_t fresh() const noexcept { return fresh_; }

 private:
  Hyperparams hyper_;
  ReplayBuffer buffer_;
  std::mt19937_64 rng_;
  ValueModel model_;
  std::size_t fresh_ = 0;  // examples added since the last pass
};

/// Trains on a worker thread. submit() never blocks on training; the worker
/// drains queued runs, trains, and swaps the slot. `train_fn` replaces the
/// pass for instrumentation.
class AsyncTrainer {
 public:
  using TrainFn = std::function<std::shared_ptr<const ValueModel>(Learner&)>;

  AsyncTrainer(Hyperparams hyper, std::shared_ptr<CheckpointSlot> slot, TrainFn train_fn = {});
  ~AsyncTrainer();
  AsyncTrainer(const AsyncTrainer&) = delete;
  AsyncTrainer& operator=(const AsyncTrainer&) = delete;

  void submit(engine::MatchRun run);
  /// Blocks until queued work is trained; for shutdown and tests.
  void drain();
  std::uint64_t passes() const noexcept { return passes_.load(); }

 private:
  void loop();

  Learner learner_;
  std::shared_ptr<CheckpointSlot> slot_;
  TrainFn train_fn_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::vector<engine::MatchRun> queue_;
  bool busy_ = false;
  bool stop_ = false;
  std::atomic<std::uint64_t> passes_{0};
  std::thread worker_;
};

}  // namespace specplan::predictor
