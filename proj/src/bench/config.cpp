#include "specplan/bench/config.hpp"

#include "specplan/core/errors.hpp"

#include <fstream>
#include <set>

namespace specplan::bench {

PolicyKind parse_policy_kind(std::string_view text) {
  if (text == "sequential") return PolicyKind::sequential;
  if (text == "fixed") return PolicyKind::fixed;
  if (text == "dynamic") return PolicyKind::dynamic;
  if (text == "dynamic_offset") return PolicyKind::dynamic_offset;
  if (text == "sft") return PolicyKind::sft;
  if (text == "bo") return PolicyKind::bo;
  throw ConfigError("unknown policy kind '" + std::string(text) + "'");
}

void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + item + "' is not key=value");
    std::string pointer;
    std::string key = item.substr(0, eq);
    std::size_t start = 0;
    while (start <= key.size()) {
      const auto dot = key.find('.', start);
      std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError("override '" + item + "' has an empty key segment");
      pointer += '/' + part;
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    const std::string text = item.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    try {
      doc[nlohmann::json::json_pointer(pointer)] = std::move(value);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("override '" + item + "': " + e.what());
    }
  }
}

namespace {

std::string default_name(const PolicySpec& p) {
  switch (p.kind) {
    case PolicyKind::sequential: return "sequential";
    case PolicyKind::fixed: return "fixed-k" + std::to_string(p.k);
    case PolicyKind::dynamic: {
      std::string tau = nlohmann::json(p.hyper.tau).dump();
      return "dsp-tau" + tau;
    }
    case PolicyKind::dynamic_offset: return "dsp-offset" + std::to_string(p.hyper.beta);
    case PolicyKind::sft: return "sft";
    case PolicyKind::bo: return "bo";
  }
  return "policy";
}

PolicySpec parse_policy(const nlohmann::json& entry, const nlohmann::json& predictor_base, std::uint64_t seed) {
  PolicySpec p;
  p.kind = parse_policy_kind(entry.at("kind").get<std::string>());
  nlohmann::json hyper = predictor_base.is_object() ? predictor_base : nlohmann::json::object();
  if (!hyper.contains("seed")) hyper["seed"] = seed;
  static const std::set<std::string> own{"name", "kind", "k", "k_max", "epsilon"};
  for (const auto& [key, value] : entry.items()) {
    if (!own.count(key)) hyper[key] = value;
  }
  if (p.kind == PolicyKind::dynamic_offset && !entry.contains("tau") && !predictor_base.contains("tau")) {
    hyper["tau"] = 0.5;
  }
  p.hyper = hyper.get<predictor::Hyperparams>();
  if (p.kind == PolicyKind::sft) {
    p.hyper.lambda = 1.0;
    p.hyper.gamma = 1.0;
  }
  p.k = entry.value("k", p.k);
  p.k_max = entry.value("k_max", p.k_max);
  p.epsilon = entry.value("epsilon", p.epsilon);
  p.name = entry.value("name", default_name(p));
  return p;
}

LiveConfig parse_live(const nlohmann::json& j, const std::filesystem::path& base) {
  LiveConfig l;
  l.base_url = j.at("base_url").get<std::string>();
  l.api_key_env = j.value("api_key_env", l.api_key_env);
  l.approx_model = j.at("approx_model").get<std::string>();
  l.target_model = j.at("target_model").get<std::string>();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  l.approx_template = resolve(j.at("approx_template").get<std::string>());
  l.target_template = resolve(j.at("target_template").get<std::string>());
  l.stop_marker = j.value("stop_marker", l.stop_marker);
  l.max_steps = j.value("max_steps", l.max_steps);
  l.exec_latency_ms = j.value("exec_latency_ms", l.exec_latency_ms);
  l.timeout_s = j.value("timeout_s", l.timeout_s);
  for (const auto& t : j.at("tasks")) l.tasks.emplace_back(t.at("id").get<std::string>(), t.at("prompt").get<std::string>());
  return l;
}

}  // namespace

BenchConfig parse_config(const nlohmann::json& doc) {
  BenchConfig c;
  c.raw = doc;
  try {
    c.mode = doc.value("mode", c.mode);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("workload")) {
      const auto& w = doc.at("workload");
      if (w.contains("traces")) c.traces = w.at("traces").get<std::string>();
      if (w.contains("generator")) c.generator = w.at("generator").get<agents::GeneratorConfig>();
    }
    if (doc.contains("prices")) c.prices = doc.at("prices").get<PriceTable>();
    c.predictor_latency_ms = doc.value("predictor_latency_ms", c.predictor_latency_ms);
    c.reference = doc.value("reference", c.reference);
    const nlohmann::json predictor_base = doc.value("predictor", nlohmann::json::object());
    for (const auto& entry : doc.at("policies")) c.policies.push_back(parse_policy(entry, predictor_base, c.seed));
    const std::filesystem::path base = doc.value("config_dir", std::string("."));
    if (doc.contains("live")) c.live = parse_live(doc.at("live"), base);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bench config: ") + e.what());
  }
  c.validate();
  return c;
}

void BenchConfig::validate() const {
  if (policies.empty()) throw ConfigError("at least one policy is required");
  std::set<std::string> names;
  for (const auto& p : policies) {
    if (!names.insert(p.name).second) throw ConfigError("duplicate policy name '" + p.name + "'");
    if (p.name.find_first_of("/\\ ") != std::string::npos) throw ConfigError("policy name '" + p.name + "' is not file-safe");
    if (p.kind == PolicyKind::fixed && p.k < 1) throw ConfigError("fixed k must be >= 1");
    if (p.kind == PolicyKind::bo && (p.k_max < 1 || p.epsilon < 0 || p.epsilon > 1)) {
      throw ConfigError("bo needs k_max >= 1 and epsilon in [0, 1]");
    }
  }
  if (mode == "sim") {
    if (traces.empty() && !generator) throw ConfigError("sim mode needs workload.traces or workload.generator");
  } else if (mode == "live") {
    if (!live) throw ConfigError("live mode needs a live section");
  } else {
    throw ConfigError("mode must be sim or live");
  }
  if (predictor_latency_ms < 0) throw ConfigError("predictor_latency_ms must be >= 0");
  prices.validate();
}

BenchConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, true);  // comments allowed
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  // relative paths inside the file are relative to the file; overrides are
  // taken as given
  const auto dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  if (!doc.contains("config_dir")) doc["config_dir"] = dir.string();
  if (doc.contains("workload") && doc["workload"].contains("traces")) {
    std::filesystem::path t = doc["workload"]["traces"].get<std::string>();
    if (t.is_relative()) doc["workload"]["traces"] = (dir / t).lexically_normal().string();
  }
  apply_overrides(doc, overrides);
  return parse_config(doc);
}

std::unique_ptr<engine::KPolicy> make_policy(const PolicySpec& spec, std::uint64_t seed, bool background) {
  const auto mode = background ? baselines::TrainMode::background : baselines::TrainMode::inline_task_end;
  switch (spec.kind) {
    case PolicyKind::sequential: return std::make_unique<baselines::SequentialPolicy>();
    case PolicyKind::fixed: return std::make_unique<baselines::FixedKPolicy>(spec.k);
    case PolicyKind::dynamic:
    case PolicyKind::dynamic_offset:
    case PolicyKind::sft: return std::make_unique<baselines::DynamicPolicy>(spec.name, spec.hyper, mode);
    case PolicyKind::bo: return std::make_unique<baselines::BoPolicy>(spec.name, spec.k_max, spec.epsilon, seed);
  }
  throw ConfigError("unknown policy kind");
}

}  // namespace specplan::bench
