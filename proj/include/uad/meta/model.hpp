// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "uad/features/standardize.hpp"
#include "uad/meta/meta_sgd.hpp"

namespace uad {

// Deployable artifact: meta-parameters plus everything needed to run them on
// raw feature rows. The standardizer is fitted on the meta-train pool and
// applied to every input from then on.
struct MetaModel {
  MetaParams params;
  BackboneSpec spec;
  LabelSpace space;
  Standardizer standardizer;
  EpisodeConfig episode;  // config the model was meta-trained with
  // Optional display names per label slot (train classes, normal, novel);
  // either empty or space.size() entries. Filled by the CLI from the label
  // column of the training data.
  std::vector<std::string> slot_names;
  std::vector<EpisodeLogEntry> log;
};

// Fits the standardizer on all rows of `dataset`, then meta-trains on the
// standardized copy.
MetaModel train_meta_model(const EpisodeDataset& dataset, const MetaTrainOptions& options);

// Standardizes the few-shot rows and runs the inner-update form.
ParamSet adapt_model(const MetaModel& model, const std::vector<LabeledSample>& fewshot,
                     int steps);

Classification classify_row(const MetaModel& model, const ParamSet& theta,
                            const std::vector<double>& raw_row);

}  // namespace uad
