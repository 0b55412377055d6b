#include "specplan/core/scheduler.hpp"

#include <stdexcept>
#include <string>

namespace specplan {

void VirtualClock::post_at(Millis when, Lane lane, std::function<void()> fn) {
  if (when < now_) {
    throw std::logic_error("event scheduled in the past: " + std::to_string(when) + " < " +
                           std::to_string(now_));
  }
  queue_.push(Event{when, lane, next_sequence_++, std::move(fn)});
}

bool VirtualClock::run_one() {
  if (queue_.empty()) return false;
  // priority_queue::top is const; the event is popped before running so the
  // callback may post more work.
  Event ev = std::move(const_cast<Event&>(queue_.top()));
  queue_.pop();
  now_ = ev.time;
  if (hook_) hook_(ev.time, ev.lane, ev.sequence);
  ev.fn();
  return true;
}

void VirtualClock::run_until(Millis until) {
  while (!queue_.empty() && queue_.top().time <= until) run_one();
  if (until > now_) now_ = until;
}

void VirtualClock::advance_to(Millis when) {
  if (!queue_.empty() && queue_.top().time < when) {
    throw std::logic_error("advance_to would skip pending events");
  }
  if (when > now_) now_ = when;
}

WallClockScheduler::WallClockScheduler() : origin_(std::chrono::steady_clock::now()) {}

Millis WallClockScheduler::now() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                               origin_)
      .count();
}

void WallClockScheduler::post_at(Millis when, Lane lane, std::function<void()> fn) {
  {
    std::lock_guard lock(mutex_);
    queue_.push(Event{when, lane, next_sequence_++, std::move(fn)});
  }
  wake_.notify_one();
}

bool WallClockScheduler::run_one() {
  std::unique_lock lock(mutex_);
  for (;;) {
    if (queue_.empty()) {
      wake_.wait(lock);
      continue;
    }
    const Millis due = queue_.top().time;
    const Millis t = now();
    if (due <= t) break;
    wake_.wait_until(lock, origin_ + std::chrono::milliseconds(due));
  }
  Event ev = std::move(const_cast<Event&>(queue_.top()));
  queue_.pop();
  lock.unlock();
  ev.fn();
  return true;
}

}  // namespace specplan
