// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uad/ae/autoencoder.hpp"
#include "uad/eval/metrics.hpp"
#include "uad/meta/model.hpp"
#include "uad/synth/generator.hpp"

namespace uad {

// One evaluation round: a repeat of mshot/crossdataset, a fold of standard.
struct RepeatRecord {
  int repeat = 0;
  int novel_class = -1;  // -1 when the round has no single novel class
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct Aggregate {
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double f1_mean = 0.0, f1_std = 0.0;
};

// Arithmetic mean and population standard deviation of the stored records.
Aggregate aggregate_records(const std::vector<RepeatRecord>& records);

// A named series of rounds: "fine_tuned" / "pre_training" / "from_scratch"
// for mshot, "folds" for standard, "set1".."set3" for the ablation.
struct ArmResult {
  std::string name;
  std::vector<RepeatRecord> per_repeat;
  Aggregate aggregate;
};

struct ProtocolResult {
  std::string protocol;
  nlohmann::ordered_json config;
  std::vector<ArmResult> arms;  // arms[0] is the protocol's headline arm

  const ArmResult& arm(const std::string& name) const;
};

// {protocol, config, per_repeat, aggregate} for the headline arm, with every
// arm (headline included) repeated under "arms" for auditability.
nlohmann::ordered_json protocol_result_to_json(const ProtocolResult& result);

struct MshotConfig {
  int M = 20;
  int repeats = 100;
  int adapt_steps = 10;
  bool from_scratch = false;   // optional third arm: backbone fit on the shots alone
  FitOptions scratch_fit{};
  std::uint64_t seed = 0;
};

// Per repeat: pick a novel class, adapt on M novel + M normal shots, score on
// every remaining sample of that class plus an equal count of unseen normals.
// The pre-training arm (steps = 0) runs on the identical split.
ProtocolResult run_mshot(const MetaModel& model, const EpisodeDataset& test_dataset,
                         const MshotConfig& config);

struct StandardConfig {
  int folds = 10;
  MetaTrainOptions train;  // M = N = 20 by convention for this protocol
  int adapt_steps = 10;
  std::uint64_t seed = 0;

  StandardConfig() {
    train.episode.M = 20;
    train.episode.N = 20;
  }
};

// Stratified fold labels, dealt round-robin over a seeded per-pool
// permutation. Keyed by class id; the normal pool is key -1.
std::map<int, std::vector<int>> standard_fold_assignment(const EpisodeDataset& dataset,
                                                         int folds, std::uint64_t seed);

// Stratified k-fold: meta-train on the other folds, then run the trained
// model's standard inference on the held fold. Meta-SGD parameters are an
// adaptation launchpad rather than a standalone classifier, so inference
// first adapts on a support set drawn from the training folds (M per class
// plus M normals; every class was seen during meta-training).
ProtocolResult run_standard(const EpisodeDataset& dataset, const StandardConfig& config);

struct CrossDatasetConfig {
  MetaTrainOptions train;
  MshotConfig mshot;  // M = 20, 100 repeats by default
};

// Meta-train on dataset A, then mshot against dataset B's classes. Class ids
// may coincide numerically across datasets; they are distinct populations.
ProtocolResult run_crossdataset(const EpisodeDataset& train_dataset,
                                const EpisodeDataset& test_dataset,
                                const CrossDatasetConfig& config);

// Feature sets for the ablation: full statistical vector, selected subset,
// selected subset + autoencoder embedding.
struct AblationConfig {
  MetaTrainOptions train;
  MshotConfig mshot;
  AeTrainOptions ae;
  std::vector<int> ae_hidden_enc{64, 32};  // desk-scale default
  std::vector<int> ae_hidden_dec{32, 64};
  int max_len = 20;
  double normal_train_fraction = 0.5;  // normal pool split between train/test
};

// Materializes set1 (81 stats), set2 (33 selected), set3 (38 combined) from
// the raw flows, then runs the mshot protocol once per set. Arms are named
// set1/set2/set3; the headline arm is set3.
ProtocolResult run_ablation(const TaskFamily& family, const AblationConfig& config);

// Feature materialization helpers shared with the CLI.
std::vector<double> stat_row_81(const Flow& flow);       // masked entries read 0
std::vector<double> stat_row_selected(const Flow& flow); // canonical 33

struct AblationFeatures {
  // Indexed like family.flows.
  std::vector<std::vector<double>> set1, set2, set3;
  AutoencoderModel ae;
};

AblationFeatures materialize_feature_sets(const TaskFamily& family, const AblationConfig& config);

}  // namespace uad
