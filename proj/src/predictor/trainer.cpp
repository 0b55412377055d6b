#include "specplan/predictor/trainer.hpp"

#include <stdexcept>

namespace specplan::predictor {

CheckpointSlot::CheckpointSlot(std::shared_ptr<const ValueModel> initial) : current_(std::move(initial)) {}

std::shared_ptr<const ValueModel> CheckpointSlot::load() const {
  std::lock_guard lock(mutex_);
  return current_;
}

void CheckpointSlot::swap(std::shared_ptr<const ValueModel> next) {
  std::lock_guard lock(mutex_);
  if (current_ && next->version() <= current_->version()) {
    throw std::logic_error("checkpoint version must increase");
  }
  current_ = std::move(next);
}

Learner::Learner(Hyperparams hyper)
    : hyper_(hyper), buffer_(static_cast<std::size_t>(hyper.buffer_capacity)), rng_(hyper.seed), model_(hyper) {
  hyper_.validate();
}

bool Learner::add_run(const engine::MatchRun& run) {
  if (run.terminal != engine::RunTerminal::mismatch && !hyper_.include_censored) return false;
  buffer_.insert_run(std::make_shared<const RunFeatures>(featurize_run(run, hyper_.features())));
  fresh_ += run.length();
  return true;
}

bool Learner::ready() const noexcept {
  return fresh_ > 0 && buffer_.size() >= static_cast<std::size_t>(hyper_.batch);
}

std::shared_ptr<const ValueModel> Learner::train() {
  model_ = train_pass(std::move(model_), buffer_, hyper_, rng_);
  fresh_ = 0;
  return std::make_shared<const ValueModel>(model_);
}

AsyncTrainer::AsyncTrainer(Hyperparams hyper, std::shared_ptr<CheckpointSlot> slot, TrainFn train_fn)
    : learner_(hyper), slot_(std::move(slot)), train_fn_(std::move(train_fn)) {
  if (!train_fn_) train_fn_ = [](Learner& l) { return l.train(); };
  worker_ = std::thread([this] { loop(); });
}

AsyncTrainer::~AsyncTrainer() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  worker_.join();
}

void AsyncTrainer::submit(engine::MatchRun run) {
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(run));
  }
  wake_.notify_one();
}

void AsyncTrainer::drain() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

void AsyncTrainer::loop() {
  std::unique_lock lock(mutex_);
  for (;;) {
    wake_.wait(lock, [this] { return stop_ || !queue_.empty(); });
    if (stop_) return;
    auto runs = std::move(queue_);
    queue_.clear();
    busy_ = true;
    lock.unlock();

    for (const auto& r : runs) learner_.add_run(r);
    if (learner_.ready()) {
      slot_->swap(train_fn_(learner_));
      ++passes_;
    }

    lock.lock();
    busy_ = false;
    if (queue_.empty()) idle_.notify_all();
  }
}

}  // namespace specplan::predictor
