#pragma once

#include "specplan/core/call_record.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <queue>
#include <vector>

namespace specplan {

/// Events due at the same instant are drained lane by lane: every call
/// completion at time t is seen before anything that would launch new work at
/// t. Inside a lane, insertion order decides.
enum class Lane : std::uint8_t { completion = 0, launch = 1 };

/// The engine's only view of time. Implementations are either a
/// deterministic virtual clock or a wall-clock event loop.
class Scheduler {
 public:
  virtual ~Scheduler() = default;

  virtual Millis now() const = 0;

  /// Queue `fn` to run on the coordinator at `when`. Must be safe to call
  /// from any thread for wall-clock implementations.
  virtual void post_at(Millis when, Lane lane, std::function<void()> fn) = 0;

  /// Run the next due event. A virtual clock returns false when its queue is
  /// empty; a wall clock blocks until something is posted.
  virtual bool run_one() = 0;
};

/// Single-owner discrete-event clock ordered by (time, lane, sequence).
class VirtualClock final : public Scheduler {
 public:
  using FireHook = std::function<void(Millis time, Lane lane, std::uint64_t sequence)>;

  explicit VirtualClock(Millis start = 0) : now_(start) {}

  Millis now() const override { return now_; }
  void post_at(Millis when, Lane lane, std::function<void()> fn) override;
  bool run_one() override;

  /// Fires everything due at or before `until`, then parks the clock there.
  void run_until(Millis until);

  /// Moves time forward with nothing pending in between.
  void advance_to(Millis when);

  std::size_t pending() const noexcept { return queue_.size(); }

  /// Observes every firing; used to check replay determinism.
  void set_fire_hook(FireHook hook) { hook_ = std::move(hook); }

 private:
  struct Event {
    Millis time;
    Lane lane;
    std::uint64_t sequence;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      if (a.time != b.time) return a.time > b.time;
      if (a.lane != b.lane) return a.lane > b.lane;
      return a.sequence > b.sequence;
    }
  };

  Millis now_;
  std::uint64_t next_sequence_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  FireHook hook_;
};

/// Real-time event loop. Timers and cross-thread posts share one queue;
/// run_one sleeps until the earliest event is due.
class WallClockScheduler final : public Scheduler {
 public:
  WallClockScheduler();

  Millis now() const override;
  void post_at(Millis when, Lane lane, std::function<void()> fn) override;
  bool run_one() override;

 private:
  struct Event {
    Millis time;
    Lane lane;
    std::uint64_t sequence;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      if (a.time != b.time) return a.time > b.time;
      if (a.lane != b.lane) return a.lane > b.lane;
      return a.sequence > b.sequence;
    }
  };

  std::chrono::steady_clock::time_point origin_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::uint64_t next_sequence_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

}  // namespace specplan
