#pragma once

// Test-only reference for the speculative timeline. Walks virtual time one
// millisecond at a time instead of reacting to events, so it shares no code
// path with the engine.

#include "specplan/agents/task_trace.hpp"
#include "specplan/core/call_record.hpp"

#include <vector>

namespace oracle {

struct Timeline {
  specplan::Millis total_time = 0;
  std::vector<specplan::CallRecord> records;
  std::vector<int> round_k;
};

/// ks[r % ks.size()] is the k of round r; every k must be >= 1.
Timeline enumerate(const specplan::agents::TaskTrace& trace, const std::vector<int>& ks);

/// Peak number of calls alive at any 1 ms sample point, intervals half-open.
int grid_peak(const std::vector<specplan::CallRecord>& records);

}  // namespace oracle
