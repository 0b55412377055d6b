#include "specplan/core/call_record.hpp"

#include "specplan/core/errors.hpp"

#include <nlohmann/json.hpp>

#include <istream>
#include <ostream>
#include <string>

namespace specplan {

std::string_view to_string(Role role) noexcept { return role == Role::approx ? "approx" : "target"; }

std::string_view to_string(CallStatus status) noexcept {
  return status == CallStatus::completed ? "completed" : "canceled";
}

Role parse_role(std::string_view text) {
  if (text == "approx") return Role::approx;
  if (text == "target") return Role::target;
  throw ParseError("unknown role '" + std::string(text) + "'");
}

CallStatus parse_status(std::string_view text) {
  if (text == "completed") return CallStatus::completed;
  if (text == "canceled") return CallStatus::canceled;
  throw ParseError("unknown call status '" + std::string(text) + "'");
}

void to_json(nlohmann::json& j, const CallRecord& r) {
  j = {{"role", to_string(r.role)},
       {"step", r.step},
       {"start_ms", r.start_ms},
       {"end_ms", r.end_ms},
       {"prompt_tokens", r.prompt_missing ? nlohmann::json(nullptr) : nlohmann::json(r.prompt_tokens)},
       {"gen_tokens", r.gen_missing ? nlohmann::json(nullptr) : nlohmann::json(r.gen_tokens)},
       {"status", to_string(r.status)},
       {"round_id", r.round_id}};
}

void from_json(const nlohmann::json& j, CallRecord& r) {
  r.role = parse_role(j.at("role").get<std::string>());
  r.step = j.at("step").get<int>();
  r.start_ms = j.at("start_ms").get<Millis>();
  r.end_ms = j.at("end_ms").get<Millis>();
  const auto& p = j.at("prompt_tokens");
  r.prompt_missing = p.is_null();
  r.prompt_tokens = r.prompt_missing ? 0 : p.get<std::int64_t>();
  const auto& g = j.at("gen_tokens");
  r.gen_missing = g.is_null();
  r.gen_tokens = r.gen_missing ? 0 : g.get<std::int64_t>();
  r.status = parse_status(j.at("status").get<std::string>());
  r.round_id = j.at("round_id").get<int>();
}

namespace {

// JSONL lines keep the documented field order.
nlohmann::ordered_json ordered(const CallRecord& r) {
  nlohmann::ordered_json o;
  o["role"] = to_string(r.role);
  o["step"] = r.step;
  o["start_ms"] = r.start_ms;
  o["end_ms"] = r.end_ms;
  o["prompt_tokens"] = r.prompt_missing ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.prompt_tokens);
  o["gen_tokens"] = r.gen_missing ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.gen_tokens);
  o["status"] = to_string(r.status);
  o["round_id"] = r.round_id;
  return o;
}

}  // namespace

void write_ledger(std::ostream& out, std::span<const CallRecord> records) {
  for (const auto& r : records) out << ordered(r).dump() << '\n';
}

std::vector<CallRecord> read_ledger(std::istream& in) {
  std::vector<CallRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<CallRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("ledger line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void TokenUsage::add(const CallRecord& r) noexcept {
  if (r.role == Role::approx) {
    approx_prompt += r.prompt_tokens;
    approx_gen += r.gen_tokens;
  } else {
    target_prompt += r.prompt_tokens;
    target_gen += r.gen_tokens;
  }
}

TokenUsage& TokenUsage::operator+=(const TokenUsage& o) noexcept {
  approx_prompt += o.approx_prompt;
  approx_gen += o.approx_gen;
  target_prompt += o.target_prompt;
  target_gen += o.target_gen;
  return *this;
}

TokenUsage usage_of(std::span<const CallRecord> records) noexcept {
  TokenUsage u;
  for (const auto& r : records) u.add(r);
  return u;
}

void to_json(nlohmann::json& j, const TokenUsage& u) {
  j = {{"approx_prompt", u.approx_prompt},
       {"approx_gen", u.approx_gen},
       {"target_prompt", u.target_prompt},
       {"target_gen", u.target_gen}};
}

void from_json(const nlohmann::json& j, TokenUsage& u) {
  u.approx_prompt = j.at("approx_prompt").get<std::int64_t>();
  u.approx_gen = j.at("approx_gen").get<std::int64_t>();
  u.target_prompt = j.at("target_prompt").get<std::int64_t>();
  u.target_gen = j.at("target_gen").get<std::int64_t>();
}

}  // namespace specplan
