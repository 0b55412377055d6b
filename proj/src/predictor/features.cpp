#include "specplan/predictor/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace specplan::predictor {

namespace {

std::uint64_t fnv1a(std::string_view prefix, std::string_view text) noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : prefix) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  for (const char c : text) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

using Counts = std::map<std::uint32_t, double>;

void count_ngrams(std::string_view text, std::string_view ns, std::uint32_t dim, Counts& out) {
  const auto toks = tokenize(text);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    out[static_cast<std::uint32_t>(fnv1a(ns, toks[i]) % dim)] += 1.0;
    if (i + 1 < toks.size()) {
      const std::string bigram = toks[i] + ' ' + toks[i + 1];
      out[static_cast<std::uint32_t>(fnv1a(ns, bigram) % dim)] += 1.0;
    }
  }
}

void add_normalized(const Counts& block, double scale, Counts& into) {
  double sq = 0;
  for (const auto& [i, v] : block) sq += v * v;
  if (sq == 0) return;
  const double f = scale / std::sqrt(sq);
  for (const auto& [i, v] : block) into[i] += v * f;
}

}  // namespace

double FeatureVector::dot(const std::vector<double>& dense) const noexcept {
  double s = 0;
  for (const auto& [i, v] : entries) s += dense[i] * v;
  return s;
}

double FeatureVector::squared_norm() const noexcept {
  double s = 0;
  for (const auto& [i, v] : entries) s += v * v;
  return s;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '_') {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

FeatureVector featurize(const PlanState& state, const FeatureOptions& options) {
  const std::uint32_t dim = std::max<std::uint32_t>(options.dimension, 1);
  Counts history;
  count_ngrams(serialize(state), "", dim, history);

  Counts merged;
  if (options.recent_block) {
    Counts recent;
    const auto steps = state.committed();
    if (steps.empty()) {
      count_ngrams(state.task_prompt(), "recent:", dim, recent);
    } else {
      count_ngrams(steps.back().action.text(), "recent:", dim, recent);
      count_ngrams(steps.back().observation, "recent:", dim, recent);
    }
    const double half = 1.0 / std::sqrt(2.0);
    add_normalized(history, half, merged);
    add_normalized(recent, half, merged);
  } else {
    add_normalized(history, 1.0, merged);
  }

  FeatureVector out;
  out.dimension = dim;
  out.entries.assign(merged.begin(), merged.end());
  return out;
}

}  // namespace specplan::predictor
