#pragma once

#include "specplan/agents/backend.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

namespace specplan::agents {

struct LiveSettings {
  std::string base_url;  // scheme://host[:port]; the path is fixed
  std::string api_key;
  std::string approx_model;
  std::string target_model;
  std::string approx_template;  // text with {{task}}, {{history}}, {{step}}
  std::string target_template;
  std::string stop_marker = "FINISH";
  int max_steps = 12;
  Millis exec_latency_ms = 0;
  double timeout_s = 120;
};

/// AuthError when the variable is unset or empty.
std::string api_key_from_env(const std::string& variable);

std::string render_history(const PlanState& state);
std::string render_prompt(std::string_view tmpl, const PlanState& prefix, int step);

/// One decoded server-sent event of a streamed chat completion.
struct StreamEvent {
  bool done = false;  // the [DONE] sentinel
  std::string content;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
};

/// Splits a byte stream into `data:` payloads and decodes them. Throws
/// ParseError on a payload that is not a chat completion chunk.
class SseDecoder {
 public:
  std::vector<StreamEvent> feed(std::string_view bytes);

 private:
  std::string pending_;
};

StreamEvent decode_chunk(std::string_view payload);

/// OpenAI-compatible chat completions over streaming HTTP. Each call runs on
/// its own thread and is aborted by closing its connection.
class LiveBackend final : public AgentBackend {
 public:
  LiveBackend(LiveSettings settings, std::string task_prompt);
  ~LiveBackend() override;
  LiveBackend(const LiveBackend&) = delete;
  LiveBackend& operator=(const LiveBackend&) = delete;

  std::string task_prompt() const override { return task_prompt_; }
  CallId launch(CallRequest request, Scheduler& sched, CallDone done) override;
  Usage cancel(CallId id, Millis now) override;
  Millis exec_latency(int step, const Action& action) const override;
  std::string observe(int step, const Action& action) const override;
  std::optional<int> step_limit() const override { return std::nullopt; }
  bool is_final(int step, const Action& action) const override;

  struct Call;

 private:
  void reap();

  LiveSettings settings_;
  std::string task_prompt_;
  std::mutex mutex_;
  std::unordered_map<CallId, std::shared_ptr<Call>> calls_;
  CallId next_id_ = 1;
};

}  // namespace specplan::agents
