#include "specplan/agents/generator.hpp"

#include "specplan/core/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>

namespace specplan::agents {

namespace {

void check_range(const IntRange& r, const char* name, std::int64_t min) {
  if (r.lo < min || r.hi < r.lo) {
    throw ConfigError(std::string(name) + " must satisfy " + std::to_string(min) + " <= lo <= hi");
  }
}

std::int64_t draw(std::mt19937_64& rng, const IntRange& r) {
  return std::uniform_int_distribution<std::int64_t>(r.lo, r.hi)(rng);
}

IntRange range_from(const nlohmann::json& j, const char* key, IntRange fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw ConfigError(std::string(key) + " must be [lo, hi]");
  return {v.at(0).get<std::int64_t>(), v.at(1).get<std::int64_t>()};
}

}  // namespace

void to_json(nlohmann::json& j, const IntRange& r) { j = nlohmann::json::array({r.lo, r.hi}); }

std::vector<Phase> default_phases() {
  return {
      {"steady", 0.95, 2.0, 1.0},
      {"pivot", 0.0, 2.0, 1.0},
  };
}

void GeneratorConfig::validate() const {
  if (n_tasks < 0) throw ConfigError("n_tasks must be >= 0");
  check_range(steps, "steps", 1);
  check_range(approx_latency_ms, "approx_latency_ms", 1);
  check_range(target_latency_ms, "target_latency_ms", 1);
  check_range(exec_latency_ms, "exec_latency_ms", 1);
  check_range(approx_gen, "approx_gen", 0);
  check_range(target_gen, "target_gen", 0);
  if (approx_prompt_base < 0 || approx_prompt_per_step < 0 || target_prompt_base < 0 || target_prompt_per_step < 0) {
    throw ConfigError("prompt token parameters must be >= 0");
  }
  if (phases.empty()) throw ConfigError("at least one phase is required");
  double weights = 0;
  for (const auto& p : phases) {
    if (p.tag.empty()) throw ConfigError("phase tag must not be empty");
    if (!(p.match_probability >= 0 && p.match_probability <= 1)) {
      throw ConfigError("phase '" + p.tag + "': match_probability must lie in [0, 1]");
    }
    if (!(p.mean_length >= 1)) throw ConfigError("phase '" + p.tag + "': mean_length must be >= 1");
    if (!(p.weight >= 0)) throw ConfigError("phase '" + p.tag + "': weight must be >= 0");
    weights += p.weight;
  }
  if (!(weights > 0)) throw ConfigError("phase weights must not all be zero");
  prices.validate();
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  auto phases = nlohmann::json::array();
  for (const auto& p : c.phases) {
    phases.push_back(
        {{"tag", p.tag}, {"match_probability", p.match_probability}, {"mean_length", p.mean_length}, {"weight", p.weight}});
  }
  j = {{"seed", c.seed},
       {"n_tasks", c.n_tasks},
       {"steps", c.steps},
       {"phases", std::move(phases)},
       {"approx_latency_ms", c.approx_latency_ms},
       {"target_latency_ms", c.target_latency_ms},
       {"exec_latency_ms", c.exec_latency_ms},
       {"approx_prompt_base", c.approx_prompt_base},
       {"approx_prompt_per_step", c.approx_prompt_per_step},
       {"target_prompt_base", c.target_prompt_base},
       {"target_prompt_per_step", c.target_prompt_per_step},
       {"approx_gen", c.approx_gen},
       {"target_gen", c.target_gen},
       {"prices", c.prices}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  GeneratorConfig o;
  try {
    o.seed = j.value("seed", o.seed);
    o.n_tasks = j.value("n_tasks", o.n_tasks);
    o.steps = range_from(j, "steps", o.steps);
    if (j.contains("phases") && !j.at("phases").empty()) {
      o.phases.clear();
      for (const auto& p : j.at("phases")) {
        Phase ph;
        ph.tag = p.at("tag").get<std::string>();
        ph.match_probability = p.at("match_probability").get<double>();
        ph.mean_length = p.value("mean_length", ph.mean_length);
        ph.weight = p.value("weight", ph.weight);
        o.phases.push_back(ph);
      }
    }
    o.approx_latency_ms = range_from(j, "approx_latency_ms", o.approx_latency_ms);
    o.target_latency_ms = range_from(j, "target_latency_ms", o.target_latency_ms);
    o.exec_latency_ms = range_from(j, "exec_latency_ms", o.exec_latency_ms);
    o.approx_prompt_base = j.value("approx_prompt_base", o.approx_prompt_base);
    o.approx_prompt_per_step = j.value("approx_prompt_per_step", o.approx_prompt_per_step);
    o.target_prompt_base = j.value("target_prompt_base", o.target_prompt_base);
    o.target_prompt_per_step = j.value("target_prompt_per_step", o.target_prompt_per_step);
    o.approx_gen = range_from(j, "approx_gen", o.approx_gen);
    o.target_gen = range_from(j, "target_gen", o.target_gen);
    if (j.contains("prices")) o.prices = j.at("prices").get<PriceTable>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
  o.validate();
  c = std::move(o);
}

std::vector<TaskTrace> generate_tasks(const GeneratorConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> weights;
  for (const auto& p : cfg.phases) weights.push_back(p.weight);
  std::discrete_distribution<std::size_t> pick_phase(weights.begin(), weights.end());
  std::uniform_int_distribution<int> tool(1, 40);
  std::uniform_int_distribution<int> arg(1, 500);

  std::vector<TaskTrace> out;
  out.reserve(static_cast<std::size_t>(cfg.n_tasks));
  for (int t = 0; t < cfg.n_tasks; ++t) {
    const int n = static_cast<int>(draw(rng, cfg.steps));
    // phase of every step
    std::vector<std::size_t> phase_of;
    while (static_cast<int>(phase_of.size()) < n) {
      const std::size_t p = pick_phase(rng);
      std::geometric_distribution<int> extra(1.0 / cfg.phases[p].mean_length);
      const int len = 1 + extra(rng);
      for (int i = 0; i < len && static_cast<int>(phase_of.size()) < n; ++i) phase_of.push_back(p);
    }
    auto tag = [&](int step) { return cfg.phases[phase_of[static_cast<std::size_t>(step - 1)]].tag; };

    TaskTrace trace;
    char id[32];
    std::snprintf(id, sizeof id, "task-%04d", t + 1);
    trace.task_id = id;
    trace.task_prompt = "Complete request " + std::to_string(t + 1) + " using the available tools. stage " + tag(1);
    for (int i = 1; i <= n; ++i) {
      const Phase& ph = cfg.phases[phase_of[static_cast<std::size_t>(i - 1)]];
      StepScript s;
      const int tool_id = tool(rng);
      const int arg_id = arg(rng);
      s.target_action = Action::normalize("call tool_" + std::to_string(tool_id) + " arg_" + std::to_string(arg_id));
      const bool match = std::bernoulli_distribution(ph.match_probability)(rng);
      const int wrong = 1 + (arg_id + static_cast<int>(arg(rng) % 499)) % 500;  // never equals arg_id
      s.approx_action = match ? s.target_action
                              : Action::normalize("call tool_" + std::to_string(tool_id) + " arg_" + std::to_string(wrong));
      s.approx_latency_ms = draw(rng, cfg.approx_latency_ms);
      s.target_latency_ms = draw(rng, cfg.target_latency_ms);
      s.exec_latency_ms = draw(rng, cfg.exec_latency_ms);
      s.approx_prompt_tokens = cfg.approx_prompt_base + cfg.approx_prompt_per_step * (i - 1);
      s.target_prompt_tokens = cfg.target_prompt_base + cfg.target_prompt_per_step * (i - 1);
      s.approx_gen_tokens = draw(rng, cfg.approx_gen);
      s.target_gen_tokens = draw(rng, cfg.target_gen);
      s.difficulty_tag = ph.tag;
      // The observation carries the stage of the step that follows it.
      const std::string next = i < n ? tag(i + 1) : std::string("done");
      s.observation = "tool_" + std::to_string(tool_id) + " returned item_" + std::to_string(arg(rng)) + ". stage " + next;
      trace.steps.push_back(std::move(s));
    }
    out.push_back(std::move(trace));
  }
  return out;
}

OptimalKStats optimal_k_stats(const std::vector<TaskTrace>& traces) {
  OptimalKStats st;
  st.tasks = traces.size();
  if (traces.empty()) return st;
  double steps = 0, matches = 0;
  for (const auto& t : traces) {
    int lo = 0, hi = 0;
    bool any = false;
    for (const auto& r : run_lengths(t)) {
      if (r.censored) continue;
      lo = any ? std::min(lo, r.length) : r.length;
      hi = any ? std::max(hi, r.length) : r.length;
      any = true;
    }
    if (!any) lo = hi = t.length();
    st.mean_max += hi;
    st.mean_min += lo;
    steps += t.length();
    for (const auto& s : t.steps) matches += s.matches() ? 1 : 0;
  }
  const double n = static_cast<double>(traces.size());
  st.mean_max /= n;
  st.mean_min /= n;
  st.mean_steps = steps / n;
  st.match_rate = steps > 0 ? matches / steps : 0;
  return st;
}

void to_json(nlohmann::json& j, const OptimalKStats& s) {
  j = {{"mean_max_optimal_k", s.mean_max},
       {"mean_min_optimal_k", s.mean_min},
       {"mean_steps", s.mean_steps},
       {"match_rate", s.match_rate},
       {"tasks", s.tasks}};
}

}  // namespace specplan::agents
