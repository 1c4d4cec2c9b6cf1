// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "uad/ae/autoencoder.hpp"
#include "uad/features/stat_features.hpp"
#include "uad/meta/task.hpp"

namespace uad {

// In-memory image of a feature CSV. The label column is recognized by name
// (case-insensitive "label" after trimming) and must be the last column;
// tables without one have empty `labels`. Cells that are empty or hold
// Infinity/NaN are masked: value 0.0 with the missing flag set. Fields are
// comma-split verbatim, no quoting.
struct FeatureTable {
  std::vector<std::string> columns;  // feature columns, label excluded
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> missing;  // parallel to rows
  std::vector<std::string> labels;         // empty when unlabeled
};

// Canonical 81-column export, label column last, masked entries as empty
// cells. `labels` is either empty (no label column) or one entry per flow.
std::string feature_csv_text(const std::vector<StatFeatureVector>& features,
                             const std::vector<std::string>& labels);
void write_feature_csv(const std::string& path, const std::vector<StatFeatureVector>& features,
                       const std::vector<std::string>& labels);

// Same layout for a projected subset: column names are the canonical names
// of the selected indices.
std::string selected_csv_text(const std::vector<std::vector<double>>& rows,
                              const std::vector<int>& selection,
                              const std::vector<std::string>& labels);
void write_selected_csv(const std::string& path, const std::vector<std::vector<double>>& rows,
                        const std::vector<int>& selection,
                        const std::vector<std::string>& labels);

// Reads any feature CSV whose header row names the columns, including
// CIC-style exports. `origin` names the source in error messages.
FeatureTable parse_feature_csv(const std::string& text, const std::string& origin);
FeatureTable read_feature_csv(const std::string& path);

// Reinterprets a table whose columns are exactly the canonical 81 names as
// stat feature vectors (masked cells become masked features).
std::vector<StatFeatureVector> table_to_stat_features(const FeatureTable& table);

// Embedding export: flow_id (row ordinal) plus the 5 latent columns.
std::string embedding_csv_text(const std::vector<LatentVector>& latents);

// Groups a labeled table into the episodic layout. Rows matching
// `normal_label` (trimmed, case-insensitive) form the normal pool; every
// other distinct label becomes one anomaly class, ids 1, 2, ... assigned in
// lexicographic label order.
struct ImportedDataset {
  EpisodeDataset dataset;
  std::map<int, std::string> class_names;
};
ImportedDataset import_labeled_table(const FeatureTable& table, const std::string& normal_label);

}  // namespace uad
