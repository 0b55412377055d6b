#include "specplan/predictor/value_model.hpp"

#include "specplan/core/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace specplan::predictor {

void Hyperparams::validate() const {
  if (!(tau > 0 && tau < 1)) throw ConfigError("tau must lie in (0, 1)");
  if (lambda < 0 || lambda > 1) throw ConfigError("lambda must lie in [0, 1]");
  if (gamma < 0 || gamma > 1) throw ConfigError("gamma must lie in [0, 1]");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (batch < 1 || epochs < 1 || buffer_capacity < 1) throw ConfigError("batch, epochs and buffer_capacity must be >= 1");
  if (warmup_k < 0) throw ConfigError("warmup_k must be >= 0");
  if (dimension < 1) throw ConfigError("dimension must be >= 1");
}

void to_json(nlohmann::json& j, const Hyperparams& h) {
  j = {{"tau", h.tau},
       {"lambda", h.lambda},
       {"gamma", h.gamma},
       {"lr", h.lr},
       {"batch", h.batch},
       {"epochs", h.epochs},
       {"buffer_capacity", h.buffer_capacity},
       {"beta", h.beta},
       {"warmup_k", h.warmup_k},
       {"include_censored", h.include_censored},
       {"dimension", h.dimension},
       {"recent_block", h.recent_block},
       {"seed", h.seed}};
}

void from_json(const nlohmann::json& j, Hyperparams& h) {
  static const char* const known[] = {"tau",      "lambda",    "gamma",           "lr",        "batch",
                                      "epochs",   "buffer_capacity", "beta",      "warmup_k",  "include_censored",
                                      "dimension", "recent_block",   "seed"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw ConfigError("unknown predictor setting '" + key + "'");
    }
  }
  Hyperparams o;
  o.tau = j.value("tau", o.tau);
  o.lambda = j.value("lambda", o.lambda);
  o.gamma = j.value("gamma", o.gamma);
  o.lr = j.value("lr", o.lr);
  o.batch = j.value("batch", o.batch);
  o.epochs = j.value("epochs", o.epochs);
  o.buffer_capacity = j.value("buffer_capacity", o.buffer_capacity);
  o.beta = j.value("beta", o.beta);
  o.warmup_k = j.value("warmup_k", o.warmup_k);
  o.include_censored = j.value("include_censored", o.include_censored);
  o.dimension = j.value("dimension", o.dimension);
  o.recent_block = j.value("recent_block", o.recent_block);
  o.seed = j.value("seed", o.seed);
  o.validate();
  h = o;
}

ValueModel::ValueModel(Hyperparams hyper) : hyper_(hyper), weights_(hyper.dimension, 0.0) {}

void ValueModel::apply(const std::vector<std::pair<std::uint32_t, double>>& grad, double bias_grad, double lr) {
  for (const auto& [i, g] : grad) weights_[i] -= lr * g;
  bias_ -= lr * bias_grad;
}

void to_json(nlohmann::json& j, const ValueModel& m) {
  auto w = nlohmann::json::array();
  for (std::size_t i = 0; i < m.weights().size(); ++i) {
    if (m.weights()[i] != 0.0) w.push_back({i, m.weights()[i]});
  }
  j = {{"version", m.version()},
       {"dimension", m.hyper().dimension},
       {"weights", std::move(w)},
       {"bias", m.bias()},
       {"hyper", m.hyper()}};
}

ValueModel model_from_json(const nlohmann::json& j) {
  try {
    Hyperparams h = j.at("hyper").get<Hyperparams>();
    h.dimension = j.at("dimension").get<std::uint32_t>();
    ValueModel m(h);
    std::vector<std::pair<std::uint32_t, double>> delta;
    for (const auto& e : j.at("weights")) {
      const auto i = e.at(0).get<std::uint32_t>();
      if (i >= h.dimension) throw ParseError("checkpoint weight index out of range");
      delta.emplace_back(i, -e.at(1).get<double>());
    }
    m.apply(delta, -j.at("bias").get<double>(), 1.0);
    m.set_version(j.at("version").get<std::uint64_t>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ValueModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << nlohmann::json(m).dump() << '\n';
}

ValueModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

int k_from_value(double value, int beta) noexcept {
  const double rounded = std::floor(value + 0.5);
  // keep the cast in range for wild predictions
  const double clipped = std::clamp(rounded, -1e6, 1e6);
  return std::max(1, static_cast<int>(clipped) + beta);
}

int predict_k(const ValueModel& model, const FeatureVector& x, int beta) {
  if (model.version() == 0) return model.hyper().warmup_k;
  return k_from_value(model.predict(x), beta);
}

int predict_k(const ValueModel& model, const PlanState& state) {
  if (model.version() == 0) return model.hyper().warmup_k;
  return predict_k(model, featurize(state, model.hyper().features()), model.hyper().beta);
}

}  // namespace specplan::predictor
