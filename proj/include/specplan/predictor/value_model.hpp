#pragma once

#include "specplan/predictor/features.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace specplan::predictor {

struct Hyperparams {
  double tau = 0.5;     // expectile level, (0, 1)
  double lambda = 0.95; // return blending, [0, 1]
  double gamma = 1.0;   // discount, [0, 1]
  double lr = 0.05;
  int batch = 16;
  int epochs = 3;
  int buffer_capacity = 2500;
  int beta = 0;       // offset added to the rounded prediction
  int warmup_k = 1;   // k issued before the first checkpoint
  bool include_censored = false;
  std::uint32_t dimension = 1u << 16;
  bool recent_block = true;
  std::uint64_t seed = 1;

  /// Throws ConfigError.
  void validate() const;
  FeatureOptions features() const { return {dimension, recent_block}; }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

void to_json(nlohmann::json& j, const Hyperparams& h);
/// Missing keys keep their defaults; the result is validated.
void from_json(const nlohmann::json& j, Hyperparams& h);

/// Linear state-value function over hashed features. Version 0 means never
/// trained.
class ValueModel {
 public:
  explicit ValueModel(Hyperparams hyper = {});

  double predict(const FeatureVector& x) const noexcept { return x.dot(weights_) + bias_; }
  double predict(const PlanState& state) const { return predict(featurize(state, hyper_.features())); }

  const Hyperparams& hyper() const noexcept { return hyper_; }
  std::uint64_t version() const noexcept { return version_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }

  /// w -= lr * g for a sparse gradient; used by the trainer only.
  void apply(const std::vector<std::pair<std::uint32_t, double>>& grad, double bias_grad, double lr);
  void bump_version() noexcept { ++version_; }
  void set_version(std::uint64_t v) noexcept { version_ = v; }

  friend bool operator==(const ValueModel&, const ValueModel&) = default;

 private:
  Hyperparams hyper_;
  std::vector<double> weights_;
  double bias_ = 0;
  std::uint64_t version_ = 0;
};

/// {version, dimension, weights, bias, hyper}; weights stored sparsely as
/// [[index, value], ...] pairs to keep files small.
void to_json(nlohmann::json& j, const ValueModel& m);
ValueModel model_from_json(const nlohmann::json& j);
void save_checkpoint(const ValueModel& m, const std::filesystem::path& path);
ValueModel load_checkpoint(const std::filesystem::path& path);

/// round-half-up(V) + beta, clamped at 1; warmup_k while the model is
/// untrained.
int predict_k(const ValueModel& model, const FeatureVector& x, int beta);
int predict_k(const ValueModel& model, const PlanState& state);

/// The integer step from a real-valued prediction.
int k_from_value(double value, int beta) noexcept;

}  // namespace specplan::predictor
