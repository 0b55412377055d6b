#pragma once

#include "specplan/agents/task_trace.hpp"

#include <random>
#include <string>
#include <vector>

namespace testutil {

using specplan::Action;
using specplan::agents::StepScript;
using specplan::agents::TaskTrace;

/// Uniform latencies and tokens; `matches[i]` decides whether step i+1's
/// draft agrees with the target.
inline TaskTrace uniform_trace(const std::vector<bool>& matches, specplan::Millis approx = 1,
                               specplan::Millis target = 5, specplan::Millis exec = 1) {
  TaskTrace t;
  t.task_id = "t";
  t.task_prompt = "solve X";
  for (std::size_t i = 0; i < matches.size(); ++i) {
    StepScript s;
    const std::string name = "act" + std::to_string(i + 1);
    s.target_action = Action::normalize(name);
    s.approx_action = Action::normalize(matches[i] ? name : name + " wrong");
    s.approx_latency_ms = approx;
    s.target_latency_ms = target;
    s.exec_latency_ms = exec;
    s.approx_prompt_tokens = 60;
    s.approx_gen_tokens = 5;
    s.target_prompt_tokens = 100;
    s.target_gen_tokens = 20;
    s.observation = "obs" + std::to_string(i + 1);
    t.steps.push_back(s);
  }
  return t;
}

inline TaskTrace all_match(int n, specplan::Millis approx = 1, specplan::Millis target = 5,
                           specplan::Millis exec = 1) {
  return uniform_trace(std::vector<bool>(static_cast<std::size_t>(n), true), approx, target, exec);
}

/// Random latencies, tokens and mismatches; latencies may collide so that
/// equal-time events are exercised.
inline TaskTrace random_trace(std::mt19937_64& rng, int max_steps = 6) {
  std::uniform_int_distribution<int> len(1, max_steps);
  std::uniform_int_distribution<int> lat(1, 9);
  std::uniform_int_distribution<int> tok(0, 200);
  std::bernoulli_distribution match(0.6);
  TaskTrace t;
  t.task_id = "r";
  t.task_prompt = "random task";
  const int n = len(rng);
  for (int i = 1; i <= n; ++i) {
    StepScript s;
    const std::string name = "step" + std::to_string(i) + " tool" + std::to_string(lat(rng));
    s.target_action = Action::normalize(name);
    s.approx_action = Action::normalize(match(rng) ? name : name + " alt");
    s.approx_latency_ms = lat(rng);
    s.target_latency_ms = lat(rng);
    s.exec_latency_ms = lat(rng);
    s.approx_prompt_tokens = tok(rng);
    s.approx_gen_tokens = tok(rng);
    s.target_prompt_tokens = tok(rng);
    s.target_gen_tokens = tok(rng);
    s.observation = "seen " + std::to_string(i);
    t.steps.push_back(s);
  }
  return t;
}

}  // namespace testutil
