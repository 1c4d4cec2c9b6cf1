// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uad/errors.hpp"

namespace uad {

// Per-column z-score transform. Fit on the training pool only; constant
// columns keep scale 1 so they map to exactly 0.
struct Standardizer {
  std::vector<double> mean, scale;

  static Standardizer fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw DataError("standardizer: empty training pool");
    const std::size_t d = rows.front().size();
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    for (const auto& r : rows) {
      if (r.size() != d) throw DataError("standardizer: ragged feature rows");
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
    }
    for (double& m : s.mean) m /= static_cast<double>(rows.size());
    std::vector<double> var(d, 0.0);
    for (const auto& r : rows)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = r[j] - s.mean[j];
        var[j] += c * c;
      }
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(rows.size()));
      if (sd > 0.0) s.scale[j] = sd;
    }
    return s;
  }

  std::vector<double> apply(const std::vector<double>& row) const {
    if (row.size() != mean.size())
      throw DataError("standardizer: expected " + std::to_string(mean.size()) +
                      " features, got " + std::to_string(row.size()));
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / scale[j];
    return out;
  }

  bool empty() const { return mean.empty(); }
};

}  // namespace uad
