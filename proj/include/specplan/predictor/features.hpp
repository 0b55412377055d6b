#pragma once

#include "specplan/core/plan_state.hpp"

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace specplan::predictor {

/// Sparse vector over a hashed index space; entries sorted by index, no
/// duplicates.
struct FeatureVector {
  std::uint32_t dimension = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  double dot(const std::vector<double>& dense) const noexcept;
  double squared_norm() const noexcept;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FeatureOptions {
  std::uint32_t dimension = 1u << 16;
  /// Adds a separately hashed block for the most recent (action,
  /// observation), so the current context is not drowned by a long history.
  bool recent_block = true;
};

/// Lower-cased [A-Za-z0-9_] runs.
std::vector<std::string> tokenize(std::string_view text);

/// Hashed unigram + bigram counts of the serialized state, L2-normalized.
/// With recent_block, the history block and the recent block are each
/// normalized and scaled by 1/sqrt(2), so the whole vector has unit norm.
FeatureVector featurize(const PlanState& state, const FeatureOptions& options = {});

}  // namespace specplan::predictor
