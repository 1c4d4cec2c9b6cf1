// SPDX-License-Identifier: Apache-2.0
#include "uad/features/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uad/errors.hpp"
#include "uad/rng.hpp"

namespace uad {

namespace {

void check_dataset(const std::vector<StatFeatureVector>& dataset, const char* op) {
  if (dataset.empty()) throw DataError(std::string(op) + ": dataset is empty");
}

void check_report(const ImportanceReport& r) {
  if (r.importances.size() != kStatFeatureCount)
    throw DataError("importance report '" + r.algorithm_name + "' has " +
                    std::to_string(r.importances.size()) + " importances, expected " +
                    std::to_string(kStatFeatureCount));
  if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0))
    throw DataError("importance report '" + r.algorithm_name + "' has accuracy outside [0,1]");
  double sum = 0.0;
  for (double v : r.importances) {
    if (!(v >= 0.0))
      throw DataError("importance report '" + r.algorithm_name + "' has a negative importance");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw DataError("importance report '" + r.algorithm_name + "' importances sum to " +
                    std::to_string(sum) + ", expected 1");
}

int argmax_row(const std::vector<double>& row) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(row.size()); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

double batch_accuracy(const BackboneSpec& spec, const ParamSet& params,
                      const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
  const int n = static_cast<int>(x.size());
  const int d = spec.input_dim();
  Tensor xt = Tensor::zeros({n, d});
  for (int i = 0; i < n; ++i)
    std::copy(x[i].begin(), x[i].end(), xt.data.begin() + static_cast<std::size_t>(i) * d);
  Graph g;
  const auto pids = graph_params(g, params);
  const Tensor probs = g.value(backbone_probs(g, spec, pids, g.input(std::move(xt))));
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> row(probs.data.begin() + static_cast<std::size_t>(i) * probs.shape[1],
                                  probs.data.begin() + static_cast<std::size_t>(i + 1) * probs.shape[1]);
    if (argmax_row(row) == y[i]) ++hits;
  }
  return static_cast<double>(hits) / n;
}

}  // namespace

const char* drop_reason_name(DropReason reason) {
  switch (reason) {
    case DropReason::kMissing: return "missing";
    case DropReason::kZeroEntropy: return "zero-entropy";
    case DropReason::kLowImportance: return "low-importance";
  }
  throw UsageError("unknown drop reason");
}

std::set<int> missing_proportion_filter(const std::vector<StatFeatureVector>& dataset,
                                        double threshold) {
  check_dataset(dataset, "missing_proportion_filter");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw UsageError("missing_proportion_filter: threshold must be in (0,1)");
  std::set<int> dropped;
  const double n = static_cast<double>(dataset.size());
  for (std::size_t j = 0; j < kStatFeatureCount; ++j) {
    std::size_t masked = 0;
    for (const StatFeatureVector& v : dataset) masked += v.missing[j] ? 1 : 0;
    if (static_cast<double>(masked) / n > threshold) dropped.insert(static_cast<int>(j));
  }
  return dropped;
}

std::set<int> entropy_filter(const std::vector<StatFeatureVector>& dataset, int bins) {
  check_dataset(dataset, "entropy_filter");
  if (bins < 2) throw UsageError("entropy_filter: bins must be >= 2");
  std::set<int> dropped;
  std::vector<double> col;
  for (std::size_t j = 0; j < kStatFeatureCount; ++j) {
    col.clear();
    for (const StatFeatureVector& v : dataset)
      if (!v.missing[j]) col.push_back(v.values[j]);
    if (col.empty()) {
      dropped.insert(static_cast<int>(j));  // no observations carry no information
      continue;
    }
    const auto [mn_it, mx_it] = std::minmax_element(col.begin(), col.end());
    const double mn = *mn_it, mx = *mx_it;
    std::vector<std::size_t> hist(static_cast<std::size_t>(bins), 0);
    if (mx > mn) {
      const double width = (mx - mn) / bins;
      for (double v : col) {
        int b = static_cast<int>((v - mn) / width);
        if (b >= bins) b = bins - 1;
        ++hist[static_cast<std::size_t>(b)];
      }
    } else {
      hist[0] = col.size();
    }
    double entropy = 0.0;
    for (std::size_t c : hist) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / static_cast<double>(col.size());
      entropy -= p * std::log(p);
    }
    if (entropy == 0.0) dropped.insert(static_cast<int>(j));
  }
  return dropped;
}

std::array<double, kStatFeatureCount> cumulative_importance(
    const std::vector<ImportanceReport>& reports) {
  if (reports.empty()) throw DataError("cumulative_importance: no reports");
  for (const ImportanceReport& r : reports) check_report(r);
  std::array<double, kStatFeatureCount> scores{};
  for (const ImportanceReport& r : reports)
    for (std::size_t j = 0; j < kStatFeatureCount; ++j) scores[j] += r.accuracy * r.importances[j];
  const double n = static_cast<double>(reports.size());
  for (double& s : scores) s /= n;
  return scores;
}

SelectionResult select_by_importance(const std::array<double, kStatFeatureCount>& scores,
                                     const std::vector<int>& survivors, double drop_fraction,
                                     const std::map<int, DropReason>& filtered) {
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0))
    throw UsageError("select_by_importance: drop_fraction must be in [0,1)");
  std::vector<bool> seen(kStatFeatureCount, false);
  const auto mark = [&](int j, const char* origin) {
    if (j < 0 || j >= static_cast<int>(kStatFeatureCount))
      throw UsageError(std::string("select_by_importance: ") + origin + " index " +
                       std::to_string(j) + " out of range");
    if (seen[static_cast<std::size_t>(j)])
      throw UsageError(std::string("select_by_importance: index ") + std::to_string(j) +
                       " appears more than once");
    seen[static_cast<std::size_t>(j)] = true;
  };
  for (int j : survivors) mark(j, "survivor");
  for (const auto& [j, reason] : filtered) {
    (void)reason;
    mark(j, "filtered");
  }
  if (survivors.size() + filtered.size() != kStatFeatureCount)
    throw UsageError("select_by_importance: survivors and filtered must partition the feature space");

  std::vector<int> ranked = survivors;
  std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    return a < b;
  });
  const std::size_t n_drop =
      static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(ranked.size())));

  SelectionResult result;
  result.scores = scores;
  result.kept_indices.assign(ranked.begin(), ranked.end() - static_cast<std::ptrdiff_t>(n_drop));
  std::sort(result.kept_indices.begin(), result.kept_indices.end());
  for (const auto& [j, reason] : filtered) result.dropped.emplace_back(j, reason);
  for (std::size_t i = ranked.size() - n_drop; i < ranked.size(); ++i)
    result.dropped.emplace_back(ranked[i], DropReason::kLowImportance);
  std::sort(result.dropped.begin(), result.dropped.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return result;
}

ImportanceReport permutation_importance(const BackboneSpec& spec, const ParamSet& params,
                                        const std::vector<std::vector<double>>& x,
                                        const std::vector<int>& y, std::uint64_t seed) {
  if (x.empty()) throw UsageError("permutation_importance: dataset is empty");
  if (x.size() != y.size())
    throw UsageError("permutation_importance: feature/label count mismatch");
  if (spec.input_dim() != static_cast<int>(kStatFeatureCount))
    throw UsageError("permutation_importance: model input dim must cover all features");
  for (const std::vector<double>& row : x)
    if (row.size() != kStatFeatureCount)
      throw UsageError("permutation_importance: row width != feature count");
  for (int label : y)
    if (label < 0 || label >= spec.output_dim())
      throw UsageError("permutation_importance: label out of range");

  ImportanceReport report;
  report.algorithm_name = "permutation";
  report.accuracy = batch_accuracy(spec, params, x, y);
  report.importances.assign(kStatFeatureCount, 0.0);

  Rng rng(seed);
  std::vector<std::size_t> order(x.size());
  std::vector<std::vector<double>> permuted = x;
  double total = 0.0;
  for (std::size_t j = 0; j < kStatFeatureCount; ++j) {
    std::iota(order.begin(), order.end(), 0);
    Rng sub = rng.derive("perm", static_cast<std::uint64_t>(j));
    sub.shuffle(order);
    for (std::size_t i = 0; i < x.size(); ++i) permuted[i][j] = x[order[i]][j];
    const double drop = report.accuracy - batch_accuracy(spec, params, permuted, y);
    report.importances[j] = std::max(0.0, drop);
    total += report.importances[j];
    for (std::size_t i = 0; i < x.size(); ++i) permuted[i][j] = x[i][j];
  }
  if (total > 0.0) {
    for (double& v : report.importances) v /= total;
  } else {
    for (double& v : report.importances) v = 1.0 / kStatFeatureCount;
  }
  return report;
}

SelectionResult run_selection_pipeline(const std::vector<StatFeatureVector>& dataset,
                                       const std::vector<ImportanceReport>& reports,
                                       const SelectionConfig& config) {
  const std::set<int> by_missing = missing_proportion_filter(dataset, config.missing_threshold);
  const std::set<int> by_entropy = entropy_filter(dataset, config.entropy_bins);
  std::map<int, DropReason> filtered;
  for (int j : by_missing) filtered.emplace(j, DropReason::kMissing);
  for (int j : by_entropy) filtered.emplace(j, DropReason::kZeroEntropy);  // missing wins ties
  std::vector<int> survivors;
  for (int j = 0; j < static_cast<int>(kStatFeatureCount); ++j)
    if (!filtered.count(j)) survivors.push_back(j);
  return select_by_importance(cumulative_importance(reports), survivors, config.drop_fraction,
                              filtered);
}

nlohmann::ordered_json importance_report_to_json(const ImportanceReport& report) {
  check_report(report);
  nlohmann::ordered_json j;
  j["algorithm"] = report.algorithm_name;
  j["accuracy"] = report.accuracy;
  j["importances"] = report.importances;
  return j;
}

ImportanceReport importance_report_from_json(const nlohmann::json& j) {
  ImportanceReport report;
  try {
    report.algorithm_name = j.at("algorithm").get<std::string>();
    report.accuracy = j.at("accuracy").get<double>();
    report.importances = j.at("importances").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("importance report: ") + e.what());
  }
  check_report(report);
  return report;
}

nlohmann::ordered_json selection_result_to_json(const SelectionResult& result) {
  nlohmann::ordered_json j;
  j["kept_indices"] = result.kept_indices;
  nlohmann::ordered_json dropped = nlohmann::ordered_json::array();
  for (const auto& [index, reason] : result.dropped)
    dropped.push_back({{"index", index}, {"reason", drop_reason_name(reason)}});
  j["dropped"] = dropped;
  j["scores"] = result.scores;
  return j;
}

SelectionResult selection_result_from_json(const nlohmann::json& j) {
  SelectionResult result;
  try {
    result.kept_indices = j.at("kept_indices").get<std::vector<int>>();
    for (const auto& d : j.at("dropped")) {
      const std::string reason = d.at("reason").get<std::string>();
      DropReason r;
      if (reason == "missing")
        r = DropReason::kMissing;
      else if (reason == "zero-entropy")
        r = DropReason::kZeroEntropy;
      else if (reason == "low-importance")
        r = DropReason::kLowImportance;
      else
        throw FormatError("selection result: unknown drop reason '" + reason + "'");
      result.dropped.emplace_back(d.at("index").get<int>(), r);
    }
    const auto scores = j.at("scores").get<std::vector<double>>();
    if (scores.size() != kStatFeatureCount)
      throw FormatError("selection result: scores length != feature count");
    std::copy(scores.begin(), scores.end(), result.scores.begin());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("selection result: ") + e.what());
  }
  return result;
}

}  // namespace uad
