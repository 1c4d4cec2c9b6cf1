// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "uad/meta/task.hpp"
#include "uad/nn/backbone.hpp"
#include "uad/nn/meta_grad.hpp"

namespace uad {

struct MetaParams {
  ParamSet theta;
  ParamSet alpha;  // same layout as theta
};

// Sum of cross-entropies of a sample batch under the backbone (Eq. 3 / 6
// form); works on both scalar types so it feeds grad_through_update.
class SampleSetLoss final : public LossFunction {
 public:
  SampleSetLoss(const BackboneSpec& spec, const std::vector<LabeledSample>& samples);
  int build(GraphT<double>& g, const std::vector<int>& ids) const override { return build_impl(g, ids); }
  int build(GraphT<Dual>& g, const std::vector<int>& ids) const override { return build_impl(g, ids); }

 private:
  template <typename S>
  int build_impl(GraphT<S>& g, const std::vector<int>& ids) const {
    const int x = g.input_from(x_);
    return g.nll_sum(backbone_probs(g, spec_, ids, x), labels_);
  }

  BackboneSpec spec_;
  Tensor x_;
  std::vector<int> labels_;
};

// theta_{t+1} = theta_t - alpha o grad(loss)(theta_t), `steps` times.
ParamSet sgd_steps(const ParamSet& theta, const ParamSet& alpha, const LossFunction& loss,
                   int steps);

// theta' = theta - alpha o grad(support loss), applied `steps` times.
ParamSet inner_update(const MetaParams& meta, const BackboneSpec& spec, const Task& task,
                      int steps = 1);

// Same update on an arbitrary few-shot set; steps = 0 returns theta verbatim
// (the pre-training baseline).
ParamSet adapt(const MetaParams& meta, const BackboneSpec& spec,
               const std::vector<LabeledSample>& fewshot, int steps);

struct TaskLossPair {
  int class_id = -1;
  const LossFunction* inner = nullptr;
  const LossFunction* outer = nullptr;
};

struct OuterUpdateResult {
  MetaParams params;
  double mean_val_loss = 0.0;
};

// (theta, alpha) <- (theta, alpha) - beta * sum_i grad(val loss of adapted
// task i). The sum runs in ascending class_id order regardless of input
// order, so episode results do not depend on scheduling.
OuterUpdateResult outer_update_with_losses(const MetaParams& meta,
                                           std::vector<TaskLossPair> pairs,
                                           const EpisodeConfig& config);
OuterUpdateResult outer_update(const MetaParams& meta, const BackboneSpec& spec,
                               const std::vector<Task>& tasks, const EpisodeConfig& config);

struct EpisodeLogEntry {
  int episode = 0;
  double mean_val_loss = 0.0;
  double wall_ms = 0.0;
};

struct MetaTrainOptions {
  EpisodeConfig episode;
  std::vector<int> hidden{256, 128, 128};
};

struct MetaTrainResult {
  MetaParams params;
  BackboneSpec spec;
  LabelSpace space;
  std::vector<EpisodeLogEntry> log;
};

// Episodic Meta-SGD: theta from Glorot init, alpha constant 0.01, then
// `episodes` rounds of sample_episode + outer_update.
MetaTrainResult meta_train(const EpisodeDataset& dataset, const MetaTrainOptions& options);

struct FitOptions {
  int epochs = 100;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

// Plain supervised training of a fresh backbone (Glorot init, full-batch
// Adam); the no-meta-model baseline.
ParamSet fit_backbone(const BackboneSpec& spec, const std::vector<LabeledSample>& samples,
                      const FitOptions& options);

struct Classification {
  int label = 0;
  std::vector<double> probs;
};

// Argmax of the forward pass; ties resolve to the lowest index.
Classification classify(const ParamSet& theta, const BackboneSpec& spec,
                        const std::vector<double>& x);

}  // namespace uad
