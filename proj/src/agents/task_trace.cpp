#include "specplan/agents/task_trace.hpp"

#include "specplan/core/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace specplan::agents {

void TaskTrace::validate() const {
  if (steps.empty()) throw ConfigError("trace '" + task_id + "' has no steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    const auto where = "trace '" + task_id + "' step " + std::to_string(i + 1);
    if (s.approx_latency_ms <= 0 || s.target_latency_ms <= 0 || s.exec_latency_ms <= 0) {
      throw ConfigError(where + ": latencies must be positive");
    }
    if (s.approx_prompt_tokens < 0 || s.approx_gen_tokens < 0 || s.target_prompt_tokens < 0 ||
        s.target_gen_tokens < 0) {
      throw ConfigError(where + ": token counts must be non-negative");
    }
  }
}

const StepScript& TaskTrace::step(int index) const {
  if (index < 1 || index > length()) {
    throw StepOutOfRange("step " + std::to_string(index) + " outside 1.." + std::to_string(length()) +
                         " in trace '" + task_id + "'");
  }
  return steps[static_cast<std::size_t>(index - 1)];
}

void to_json(nlohmann::json& j, const StepScript& s) {
  j = {{"target_action", s.target_action.text()},
       {"approx_action", s.approx_action.text()},
       {"approx_latency_ms", s.approx_latency_ms},
       {"target_latency_ms", s.target_latency_ms},
       {"exec_latency_ms", s.exec_latency_ms},
       {"approx_prompt_tokens", s.approx_prompt_tokens},
       {"approx_gen_tokens", s.approx_gen_tokens},
       {"target_prompt_tokens", s.target_prompt_tokens},
       {"target_gen_tokens", s.target_gen_tokens},
       {"observation", s.observation},
       {"difficulty_tag", s.difficulty_tag}};
}

void from_json(const nlohmann::json& j, StepScript& s) {
  s.target_action = Action::normalize(j.at("target_action").get<std::string>());
  s.approx_action = Action::normalize(j.at("approx_action").get<std::string>());
  s.approx_latency_ms = j.at("approx_latency_ms").get<Millis>();
  s.target_latency_ms = j.at("target_latency_ms").get<Millis>();
  s.exec_latency_ms = j.at("exec_latency_ms").get<Millis>();
  s.approx_prompt_tokens = j.at("approx_prompt_tokens").get<std::int64_t>();
  s.approx_gen_tokens = j.at("approx_gen_tokens").get<std::int64_t>();
  s.target_prompt_tokens = j.at("target_prompt_tokens").get<std::int64_t>();
  s.target_gen_tokens = j.at("target_gen_tokens").get<std::int64_t>();
  s.observation = j.value("observation", "");
  s.difficulty_tag = j.value("difficulty_tag", "");
}

void to_json(nlohmann::json& j, const TaskTrace& t) {
  j = {{"task_id", t.task_id}, {"task_prompt", t.task_prompt}, {"steps", t.steps}};
}

void from_json(const nlohmann::json& j, TaskTrace& t) {
  t.task_id = j.at("task_id").get<std::string>();
  t.task_prompt = j.at("task_prompt").get<std::string>();
  t.steps = j.at("steps").get<std::vector<StepScript>>();
}

TaskTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path.string());
  TaskTrace trace;
  try {
    trace = nlohmann::json::parse(in).get<TaskTrace>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("trace " + path.string() + ": " + e.what());
  }
  trace.validate();
  return trace;
}

void save_trace(const TaskTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace " + path.string());
  out << nlohmann::json(trace).dump(1) << '\n';
}

std::vector<RunLength> run_lengths(const TaskTrace& trace) {
  std::vector<RunLength> out;
  int current = 0;
  for (const auto& s : trace.steps) {
    ++current;
    if (!s.matches()) {
      out.push_back({current, false});
      current = 0;
    }
  }
  if (current > 0) out.push_back({current, true});
  return out;
}

}  // namespace specplan::agents
