#include "specplan/predictor/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>

namespace specplan::predictor {

ExpectileTerm expectile_loss(double u, double tau) noexcept {
  const double w = u < 0 ? 1.0 - tau : tau;
  return {w * u * u, -2.0 * w * u};
}

std::vector<LabeledState> label_runs(std::span<const engine::MatchRun> runs, bool include_censored) {
  std::vector<LabeledState> out;
  for (const auto& run : runs) {
    if (run.terminal != engine::RunTerminal::mismatch && !include_censored) continue;
    const std::size_t n = run.length();
    for (std::size_t i = 0; i < n; ++i) out.push_back({run.states[i], static_cast<double>(n - i)});
  }
  return out;
}

std::vector<double> lambda_returns(const RunFeatures& run, const ValueModel& model, double gamma, double lambda) {
  const std::size_t n = run.states.size();
  std::vector<double> g(n);
  if (n == 0) return g;
  // G_p = r + gamma * ((1 - lambda) * V(s_{p+1}) + lambda * G_{p+1}); the
  // step from the last state ends the episode.
  g[n - 1] = 1.0;
  for (std::size_t p = n - 1; p-- > 0;) {
    const double v_next = lambda < 1.0 ? model.predict(run.states[p + 1]) : 0.0;
    g[p] = 1.0 + gamma * ((1.0 - lambda) * v_next + lambda * g[p + 1]);
  }
  return g;
}

void sgd_step(ValueModel& model, std::span<const Sample> batch, double tau, double lr) {
  if (batch.empty()) return;
  // every prediction uses the weights from before the step; repeated
  // indices simply accumulate when applied
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<std::pair<std::uint32_t, double>> sparse;
  double bias_grad = 0;
  for (const auto& s : batch) {
    const double u = s.target - model.predict(*s.x);
    const double g = expectile_loss(u, tau).grad;
    if (g == 0.0) continue;
    for (const auto& [i, v] : s.x->entries) sparse.emplace_back(i, g * v * inv);
    bias_grad += g;
  }
  model.apply(sparse, bias_grad * inv, lr);
}

void ReplayBuffer::insert(const TrainingExample& example) {
  items_.push_back(example);
  while (items_.size() > capacity_) items_.pop_front();
}

void ReplayBuffer::insert_run(std::shared_ptr<const RunFeatures> run) {
  for (std::size_t p = 0; p < run->states.size(); ++p) insert({run, p});
}

void ReplayBuffer::dump_jsonl(std::ostream& out) const {
  for (const auto& e : items_) {
    auto feats = nlohmann::json::array();
    for (const auto& [i, v] : e.run->states[e.position].entries) feats.push_back({i, v});
    nlohmann::ordered_json line;
    line["position"] = e.position;
    line["length"] = e.run->states.size();
    line["censored"] = e.run->censored;
    line["features"] = std::move(feats);
    out << line.dump() << '\n';
  }
}

RunFeatures featurize_run(const engine::MatchRun& run, const FeatureOptions& options) {
  RunFeatures out;
  out.censored = run.terminal != engine::RunTerminal::mismatch;
  out.states.reserve(run.length());
  for (const auto& s : run.states) out.states.push_back(featurize(s, options));
  return out;
}

ValueModel train_pass(ValueModel model, const ReplayBuffer& buffer, const Hyperparams& hyper, std::mt19937_64& rng) {
  const std::size_t n = buffer.size();
  if (n == 0) return model;
  const std::size_t batch = static_cast<std::size_t>(hyper.batch);
  std::vector<std::size_t> order(n);
  std::vector<Sample> samples;
  std::map<const RunFeatures*, std::vector<double>> returns;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t lo = 0; lo < n; lo += batch) {
      const std::size_t hi = std::min(n, lo + batch);
      samples.clear();
      returns.clear();
      for (std::size_t idx = lo; idx < hi; ++idx) {
        const TrainingExample& ex = buffer[order[idx]];
        auto it = returns.find(ex.run.get());
        if (it == returns.end()) {
          it = returns.emplace(ex.run.get(), lambda_returns(*ex.run, model, hyper.gamma, hyper.lambda)).first;
        }
        samples.push_back({&ex.run->states[ex.position], it->second[ex.position]});
      }
      sgd_step(model, samples, hyper.tau, hyper.lr);
    }
  }
  model.bump_version();
  return model;
}

}  // namespace specplan::predictor
