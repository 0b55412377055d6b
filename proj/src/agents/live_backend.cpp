#include "specplan/agents/live_backend.hpp"

#include "specplan/core/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

namespace specplan::agents {

std::string api_key_from_env(const std::string& variable) {
  const char* value = std::getenv(variable.c_str());
  if (value == nullptr || *value == '\0') throw AuthError("environment variable " + variable + " is not set");
  return value;
}

std::string render_history(const PlanState& state) {
  std::string out;
  int i = 0;
  for (const auto& c : state.committed()) {
    out += "Step " + std::to_string(++i) + ": " + c.action.text() + "\n";
    out += "Result: " + c.observation + "\n";
  }
  return out.empty() ? "(none)\n" : out;
}

std::string render_prompt(std::string_view tmpl, const PlanState& prefix, int step) {
  const std::pair<std::string_view, std::string> vars[] = {
      {"{{task}}", prefix.task_prompt()}, {"{{history}}", render_history(prefix)}, {"{{step}}", std::to_string(step)}};
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool hit = false;
    for (const auto& [key, value] : vars) {
      if (tmpl.substr(i, key.size()) == key) {
        out += value;
        i += key.size();
        hit = true;
        break;
      }
    }
    if (!hit) out += tmpl[i++];
  }
  return out;
}

StreamEvent decode_chunk(std::string_view payload) {
  StreamEvent ev;
  if (payload == "[DONE]") {
    ev.done = true;
    return ev;
  }
  try {
    const auto j = nlohmann::json::parse(payload);
    if (j.contains("error")) throw ParseError("server error in stream: " + j.at("error").dump());
    for (const auto& choice : j.value("choices", nlohmann::json::array())) {
      if (!choice.contains("delta")) continue;
      const auto& delta = choice.at("delta");
      if (delta.contains("content") && delta.at("content").is_string()) ev.content += delta.at("content").get<std::string>();
    }
    if (j.contains("usage") && j.at("usage").is_object()) {
      const auto& u = j.at("usage");
      if (u.contains("prompt_tokens")) ev.prompt_tokens = u.at("prompt_tokens").get<std::int64_t>();
      if (u.contains("completion_tokens")) ev.completion_tokens = u.at("completion_tokens").get<std::int64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed completion chunk: ") + e.what());
  }
  return ev;
}

std::vector<StreamEvent> SseDecoder::feed(std::string_view bytes) {
  pending_.append(bytes);
  std::vector<StreamEvent> out;
  std::size_t start = 0;
  for (;;) {
    const auto nl = pending_.find('\n', start);
    if (nl == std::string::npos) break;
    std::string_view line(pending_.data() + start, nl - start);
    start = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.substr(0, 5) != "data:") continue;  // blank separators, comments, other fields
    line.remove_prefix(5);
    if (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    out.push_back(decode_chunk(line));
  }
  pending_.erase(0, start);
  return out;
}

struct LiveBackend::Call {
  std::unique_ptr<httplib::Client> client;
  std::thread thread;
  std::atomic<bool> abort{false};
  std::atomic<bool> finished{false};
  bool canceled = false;  // coordinator only
  std::mutex mutex;
  std::int64_t chunks = 0;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
};

namespace {

CallOutcome run_call(LiveBackend::Call& call, const std::string& model, const std::string& prompt,
                     const std::string& api_key) {
  nlohmann::json body = {{"model", model},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                         {"stream", true},
                         {"stream_options", {{"include_usage", true}}}};
  httplib::Request req;
  req.method = "POST";
  req.path = "/v1/chat/completions";
  req.headers = {{"Authorization", "Bearer " + api_key}, {"Accept", "text/event-stream"}};
  req.set_header("Content-Type", "application/json");
  req.body = body.dump();

  int status = 0;
  std::string error_body;
  std::string content;
  bool saw_done = false;
  SseDecoder decoder;
  std::exception_ptr parse_error;
  req.response_handler = [&](const httplib::Response& res) {
    status = res.status;
    return !call.abort;
  };
  req.content_receiver = [&](const char* data, std::size_t n, std::uint64_t, std::uint64_t) {
    if (call.abort) return false;
    if (status != 200) {
      error_body.append(data, n);
      return true;
    }
    try {
      for (auto& ev : decoder.feed(std::string_view(data, n))) {
        if (ev.done) {
          saw_done = true;
          continue;
        }
        std::lock_guard lock(call.mutex);
        if (!ev.content.empty()) {
          content += ev.content;
          ++call.chunks;
        }
        if (ev.prompt_tokens) call.prompt_tokens = ev.prompt_tokens;
        if (ev.completion_tokens) call.completion_tokens = ev.completion_tokens;
      }
    } catch (...) {
      parse_error = std::current_exception();
      return false;
    }
    return !call.abort;
  };

  CallOutcome out;
  httplib::Response res;
  httplib::Error err = httplib::Error::Success;
  const bool ok = call.client->send(req, res, err);
  try {
    if (parse_error) std::rethrow_exception(parse_error);
    if (!ok && status == 0) throw HttpError("request to " + model + " failed: " + httplib::to_string(err));
    if (status == 401 || status == 403) throw AuthError("endpoint rejected the credentials (" + std::to_string(status) + ")");
    if (status != 200) throw HttpError("endpoint returned " + std::to_string(status) + ": " + error_body.substr(0, 300));
    if (!ok) throw HttpError("stream from " + model + " broke: " + httplib::to_string(err));
    (void)saw_done;
    try {
      out.action = Action::normalize(content);
    } catch (const EmptyAction&) {
      throw ParseError("completion from " + model + " has no content");
    }
    std::lock_guard lock(call.mutex);
    out.usage.prompt_missing = !call.prompt_tokens;
    out.usage.gen_missing = !call.completion_tokens;
    out.usage.prompt_tokens = call.prompt_tokens.value_or(0);
    out.usage.gen_tokens = call.completion_tokens.value_or(0);
  } catch (...) {
    out.action.reset();
    out.error = std::current_exception();
  }
  return out;
}

}  // namespace

LiveBackend::LiveBackend(LiveSettings settings, std::string task_prompt)
    : settings_(std::move(settings)), task_prompt_(std::move(task_prompt)) {
  if (settings_.api_key.empty()) throw AuthError("no API key");
  if (settings_.base_url.empty()) throw ConfigError("live backend needs a base URL");
  if (settings_.max_steps < 1) throw ConfigError("max_steps must be >= 1");
}

LiveBackend::~LiveBackend() {
  std::lock_guard lock(mutex_);
  for (auto& [id, call] : calls_) {
    call->abort = true;
    call->client->stop();
  }
  for (auto& [id, call] : calls_) {
    if (call->thread.joinable()) call->thread.join();
  }
}

void LiveBackend::reap() {
  for (auto it = calls_.begin(); it != calls_.end();) {
    if (it->second->finished && it->second->thread.joinable()) it->second->thread.join();
    it = it->second->finished ? calls_.erase(it) : std::next(it);
  }
}

CallId LiveBackend::launch(CallRequest request, Scheduler& sched, CallDone done) {
  const bool approx = request.role == Role::approx;
  const std::string prompt =
      render_prompt(approx ? settings_.approx_template : settings_.target_template, request.prefix, request.step);
  const std::string model = approx ? settings_.approx_model : settings_.target_model;

  auto call = std::make_shared<Call>();
  call->client = std::make_unique<httplib::Client>(settings_.base_url);
  const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(settings_.timeout_s * 1000));
  call->client->set_connection_timeout(timeout);
  call->client->set_read_timeout(timeout);
  call->client->set_write_timeout(timeout);

  std::lock_guard lock(mutex_);
  reap();
  const CallId id = next_id_++;
  calls_.emplace(id, call);
  call->thread = std::thread([call, model, prompt, key = settings_.api_key, &sched, done = std::move(done)]() mutable {
    CallOutcome outcome = run_call(*call, model, prompt, key);
    if (!call->abort) {
      sched.post_at(sched.now(), Lane::completion,
                    [call, done = std::move(done), outcome = std::move(outcome)]() mutable {
                      if (!call->canceled) done(std::move(outcome));
                    });
    }
    call->finished = true;
  });
  return id;
}

Usage LiveBackend::cancel(CallId id, Millis) {
  std::shared_ptr<Call> call;
  {
    std::lock_guard lock(mutex_);
    auto it = calls_.find(id);
    if (it == calls_.end()) return {};
    call = it->second;
  }
  call->canceled = true;
  call->abort = true;
  call->client->stop();
  std::lock_guard lock(call->mutex);
  Usage u;
  u.prompt_missing = !call->prompt_tokens;
  u.prompt_tokens = call->prompt_tokens.value_or(0);
  u.gen_tokens = call->completion_tokens.value_or(call->chunks);
  return u;
}

Millis LiveBackend::exec_latency(int, const Action&) const { return settings_.exec_latency_ms; }

std::string LiveBackend::observe(int step, const Action&) const { return "executed step " + std::to_string(step); }

bool LiveBackend::is_final(int step, const Action& action) const {
  return step >= settings_.max_steps || action.text().find(settings_.stop_marker) != std::string::npos;
}

}  // namespace specplan::agents
