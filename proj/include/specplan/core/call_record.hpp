#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace specplan {

/// Virtual or wall-clock time in integer milliseconds.
using Millis = std::int64_t;

enum class Role : std::uint8_t { approx, target };
enum class CallStatus : std::uint8_t { completed, canceled };

std::string_view to_string(Role role) noexcept;
std::string_view to_string(CallStatus status) noexcept;
Role parse_role(std::string_view text);
CallStatus parse_status(std::string_view text);

/// One agent invocation in the call ledger.
///
/// Token counts are whatever the backend reported. When a live endpoint did
/// not report usage for a field, the matching `*_missing` flag is set and the
/// field serializes as JSON null instead of a fabricated zero.
struct CallRecord {
  Role role = Role::approx;
  int step = 0;
  Millis start_ms = 0;
  Millis end_ms = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t gen_tokens = 0;
  CallStatus status = CallStatus::completed;
  int round_id = 0;
  bool prompt_missing = false;
  bool gen_missing = false;

  friend bool operator==(const CallRecord&, const CallRecord&) = default;
};

void to_json(nlohmann::json& j, const CallRecord& record);
void from_json(const nlohmann::json& j, CallRecord& record);

void write_ledger(std::ostream& out, std::span<const CallRecord> records);
std::vector<CallRecord> read_ledger(std::istream& in);

/// Token totals split by role and kind; the unit every cost formula works on.
struct TokenUsage {
  std::int64_t approx_prompt = 0;
  std::int64_t approx_gen = 0;
  std::int64_t target_prompt = 0;
  std::int64_t target_gen = 0;

  std::int64_t prompt() const noexcept { return approx_prompt + target_prompt; }
  std::int64_t gen() const noexcept { return approx_gen + target_gen; }
  std::int64_t total() const noexcept { return prompt() + gen(); }

  void add(const CallRecord& record) noexcept;

  TokenUsage& operator+=(const TokenUsage& other) noexcept;
  friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) noexcept { return a += b; }
  friend TokenUsage operator-(const TokenUsage& a, const TokenUsage& b) noexcept {
    return {a.approx_prompt - b.approx_prompt, a.approx_gen - b.approx_gen,
            a.target_prompt - b.target_prompt, a.target_gen - b.target_gen};
  }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

TokenUsage usage_of(std::span<const CallRecord> records) noexcept;

void to_json(nlohmann::json& j, const TokenUsage& usage);
void from_json(const nlohmann::json& j, TokenUsage& usage);

}  // namespace specplan
