// SPDX-License-Identifier: Apache-2.0
#include "uad/meta/model.hpp"

namespace uad {

MetaModel train_meta_model(const EpisodeDataset& dataset, const MetaTrainOptions& options) {
  std::vector<std::vector<double>> pool = dataset.normal;
  for (const auto& [cls, rows] : dataset.anomalies)
    pool.insert(pool.end(), rows.begin(), rows.end());

  MetaModel model;
  model.standardizer = Standardizer::fit(pool);

  EpisodeDataset scaled;
  scaled.normal.reserve(dataset.normal.size());
  for (const auto& row : dataset.normal) scaled.normal.push_back(model.standardizer.apply(row));
  for (const auto& [cls, rows] : dataset.anomalies) {
    auto& dst = scaled.anomalies[cls];
    dst.reserve(rows.size());
    for (const auto& row : rows) dst.push_back(model.standardizer.apply(row));
  }

  MetaTrainResult trained = meta_train(scaled, options);
  model.params = std::move(trained.params);
  model.spec = trained.spec;
  model.space = trained.space;
  model.episode = options.episode;
  model.log = std::move(trained.log);
  return model;
}

ParamSet adapt_model(const MetaModel& model, const std::vector<LabeledSample>& fewshot,
                     int steps) {
  std::vector<LabeledSample> scaled;
  scaled.reserve(fewshot.size());
  for (const auto& s : fewshot) scaled.push_back({model.standardizer.apply(s.x), s.label});
  return adapt(model.params, model.spec, scaled, steps);
}

Classification classify_row(const MetaModel& model, const ParamSet& theta,
                            const std::vector<double>& raw_row) {
  return classify(theta, model.spec, model.standardizer.apply(raw_row));
}

}  // namespace uad
