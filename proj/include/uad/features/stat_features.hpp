// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "uad/net/packet.hpp"

namespace uad {

inline constexpr int kStatFeatureCount = 81;
inline constexpr int kSelectedFeatureCount = 33;

// 81 flow statistics in canonical row order. Undefined entries (statistics
// of an empty direction, rates of a zero-duration flow, ratios with a zero
// denominator) are masked and hold 0.0.
struct StatFeatureVector {
  std::array<double, kStatFeatureCount> values{};
  std::array<bool, kStatFeatureCount> missing{};
};

StatFeatureVector extract_stat_features(const Flow& flow);

// Canonical feature names, index-aligned with StatFeatureVector::values.
const std::array<std::string, kStatFeatureCount>& stat_feature_names();

// The shipped 33-entry selection (0-based indices into the 81-feature
// space), ascending.
const std::vector<int>& selected_feature_indices();

// Copies v.values in selection order; masked sources become 0.0. The
// selection must have exactly kSelectedFeatureCount in-range entries.
std::vector<double> project_selected(const StatFeatureVector& v, const std::vector<int>& selection);

}  // namespace uad
