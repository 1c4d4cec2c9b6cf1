// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uad/features/stat_features.hpp"
#include "uad/nn/backbone.hpp"
#include "uad/nn/params.hpp"

namespace uad {

// One feature-importance run: an algorithm's accuracy and its normalized
// per-feature importance vector over the 81-feature space.
struct ImportanceReport {
  std::string algorithm_name;
  double accuracy = 0.0;
  std::vector<double> importances;  // 81 entries, each >= 0, summing to 1
};

enum class DropReason { kMissing, kZeroEntropy, kLowImportance };

const char* drop_reason_name(DropReason reason);

struct SelectionResult {
  std::vector<int> kept_indices;  // ascending feature indices
  std::vector<std::pair<int, DropReason>> dropped;  // ascending by index
  std::array<double, kStatFeatureCount> scores{};   // cumulative importance
};

// Drops feature j iff masked-count(j) / |dataset| exceeds threshold strictly.
std::set<int> missing_proportion_filter(const std::vector<StatFeatureVector>& dataset,
                                        double threshold = 0.5);

// Drops feature j iff the unmasked values of column j have zero entropy over
// an equal-width histogram (constant column, or no unmasked values at all).
std::set<int> entropy_filter(const std::vector<StatFeatureVector>& dataset, int bins = 32);

// C_j = (1/n) * sum_i Acc_i * V_j^i over the provided reports.
std::array<double, kStatFeatureCount> cumulative_importance(
    const std::vector<ImportanceReport>& reports);

// Ranks survivors by score descending (ties: lower index first), drops the
// trailing floor(drop_fraction * |survivors|), and returns kept indices in
// ascending order. `filtered` carries the filter-dropped indices and must
// partition 0..80 together with `survivors`.
SelectionResult select_by_importance(const std::array<double, kStatFeatureCount>& scores,
                                     const std::vector<int>& survivors,
                                     double drop_fraction = 0.30,
                                     const std::map<int, DropReason>& filtered = {});

// Built-in importance provider: accuracy drop when one column is permuted,
// clamped at zero and normalized (uniform when every drop is zero).
ImportanceReport permutation_importance(const BackboneSpec& spec, const ParamSet& params,
                                        const std::vector<std::vector<double>>& x,
                                        const std::vector<int>& y, std::uint64_t seed);

struct SelectionConfig {
  double missing_threshold = 0.5;
  int entropy_bins = 32;
  double drop_fraction = 0.30;
};

// Filters first, then cumulative-importance ranking over the survivors.
SelectionResult run_selection_pipeline(const std::vector<StatFeatureVector>& dataset,
                                       const std::vector<ImportanceReport>& reports,
                                       const SelectionConfig& config = {});

nlohmann::ordered_json importance_report_to_json(const ImportanceReport& report);
ImportanceReport importance_report_from_json(const nlohmann::json& j);
nlohmann::ordered_json selection_result_to_json(const SelectionResult& result);
SelectionResult selection_result_from_json(const nlohmann::json& j);

}  // namespace uad
