// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

namespace uad {

struct ClassMetrics {
  int label = 0;
  int support = 0;  // true samples of this label
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;                     // mean F1 over labels with support > 0
  std::vector<ClassMetrics> per_class;       // one entry per label in 0..n_labels-1
  std::vector<std::vector<int>> confusion;   // [true][predicted]
};

// pairs are (true label, predicted label); both must lie in 0..n_labels-1.
// Any 0/0 ratio (precision, recall, F1) is defined as 0.
Metrics compute_metrics(const std::vector<std::pair<int, int>>& pairs, int n_labels);

}  // namespace uad
