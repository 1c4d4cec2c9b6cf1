// SPDX-License-Identifier: Apache-2.0
#include "uad/eval/metrics.hpp"

#include <string>

#include "uad/errors.hpp"

namespace uad {

Metrics compute_metrics(const std::vector<std::pair<int, int>>& pairs, int n_labels) {
  if (n_labels < 1) throw UsageError("compute_metrics: n_labels must be >= 1");
  if (pairs.empty()) throw UsageError("compute_metrics: empty prediction set");

  Metrics m;
  m.confusion.assign(static_cast<std::size_t>(n_labels),
                     std::vector<int>(static_cast<std::size_t>(n_labels), 0));
  int correct = 0;
  for (const auto& [truth, pred] : pairs) {
    if (truth < 0 || truth >= n_labels || pred < 0 || pred >= n_labels)
      throw UsageError("compute_metrics: label outside declared space: (" +
                       std::to_string(truth) + ", " + std::to_string(pred) + ")");
    ++m.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
    if (truth == pred) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());

  double f1_sum = 0.0;
  int f1_count = 0;
  for (int k = 0; k < n_labels; ++k) {
    const std::size_t ks = static_cast<std::size_t>(k);
    int tp = m.confusion[ks][ks], fp = 0, fn = 0;
    for (int j = 0; j < n_labels; ++j) {
      if (j == k) continue;
      fp += m.confusion[static_cast<std::size_t>(j)][ks];
      fn += m.confusion[ks][static_cast<std::size_t>(j)];
    }
    ClassMetrics cm;
    cm.label = k;
    cm.support = tp + fn;
    cm.precision = (tp + fp > 0) ? static_cast<double>(tp) / (tp + fp) : 0.0;
    cm.recall = (tp + fn > 0) ? static_cast<double>(tp) / (tp + fn) : 0.0;
    cm.f1 = (cm.precision + cm.recall > 0.0)
                ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                : 0.0;
    if (cm.support > 0) {
      f1_sum += cm.f1;
      ++f1_count;
    }
    m.per_class.push_back(cm);
  }
  m.macro_f1 = (f1_count > 0) ? f1_sum / f1_count : 0.0;
  return m;
}

}  // namespace uad
