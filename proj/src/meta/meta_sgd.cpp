// SPDX-License-Identifier: Apache-2.0
#include "uad/meta/meta_sgd.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "uad/errors.hpp"
#include "uad/nn/adam.hpp"

namespace uad {

namespace {

void check_meta(const MetaParams& meta, const char* op) {
  if (!meta.theta.same_layout(meta.alpha))
    throw DataError(std::string(op) + ": theta/alpha layout mismatch");
}

Tensor pack_samples(const BackboneSpec& spec, const std::vector<LabeledSample>& samples,
                    std::vector<int>* labels) {
  if (samples.empty()) throw DataError("sample set is empty");
  const int d = spec.input_dim();
  Tensor x = Tensor::zeros({static_cast<int>(samples.size()), d});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<int>(samples[i].x.size()) != d)
      throw DataError("sample width " + std::to_string(samples[i].x.size()) +
                      " does not match model input " + std::to_string(d));
    std::copy(samples[i].x.begin(), samples[i].x.end(),
              x.data.begin() + static_cast<std::ptrdiff_t>(i) * d);
    labels->push_back(samples[i].label);
  }
  return x;
}

}  // namespace

SampleSetLoss::SampleSetLoss(const BackboneSpec& spec, const std::vector<LabeledSample>& samples)
    : spec_(spec) {
  x_ = pack_samples(spec, samples, &labels_);
  for (int l : labels_)
    if (l < 0 || l >= spec.output_dim())
      throw DataError("label " + std::to_string(l) + " outside the " +
                      std::to_string(spec.output_dim()) + "-way label space");
}

ParamSet sgd_steps(const ParamSet& theta, const ParamSet& alpha, const LossFunction& loss,
                   int steps) {
  if (!theta.same_layout(alpha)) throw DataError("sgd_steps: theta/alpha layout mismatch");
  if (steps < 0) throw UsageError("sgd_steps: steps must be >= 0");
  ParamSet cur = theta;
  for (int t = 0; t < steps; ++t) {
    const ParamSet g = grad(loss, cur);
    cur = sub_scaled_hadamard(cur, alpha, g);
  }
  return cur;
}

ParamSet adapt(const MetaParams& meta, const BackboneSpec& spec,
               const std::vector<LabeledSample>& fewshot, int steps) {
  check_meta(meta, "adapt");
  if (steps < 0) throw UsageError("adapt: steps must be >= 0");
  if (steps == 0) return meta.theta;
  const SampleSetLoss loss(spec, fewshot);
  return sgd_steps(meta.theta, meta.alpha, loss, steps);
}

ParamSet inner_update(const MetaParams& meta, const BackboneSpec& spec, const Task& task,
                      int steps) {
  if (steps < 1) throw UsageError("inner_update: steps must be >= 1");
  return adapt(meta, spec, task.support, steps);
}

OuterUpdateResult outer_update_with_losses(const MetaParams& meta, std::vector<TaskLossPair> pairs,
                                           const EpisodeConfig& config) {
  check_meta(meta, "outer_update");
  config.validate();
  if (pairs.empty()) throw DataError("outer_update: no tasks");
  for (const TaskLossPair& p : pairs)
    if (!p.inner || !p.outer) throw DataError("outer_update: null loss");
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const TaskLossPair& a, const TaskLossPair& b) { return a.class_id < b.class_id; });

  ParamSet d_theta = zeros_like(meta.theta);
  ParamSet d_alpha = zeros_like(meta.alpha);
  double val_loss_sum = 0.0;
  for (const TaskLossPair& p : pairs) {
    MetaGradResult r;
    try {
      r = grad_through_update(*p.outer, meta.theta, meta.alpha, *p.inner, config.inner_steps,
                              config.mode);
    } catch (const NumericError& e) {
      throw NumericError("task for class " + std::to_string(p.class_id) + ": " + e.what());
    }
    axpy(1.0, r.d_theta, d_theta);
    axpy(1.0, r.d_alpha, d_alpha);
    val_loss_sum += r.outer_loss;
  }

  OuterUpdateResult out;
  out.params.theta = meta.theta;
  out.params.alpha = meta.alpha;
  axpy(-config.beta, d_theta, out.params.theta);
  axpy(-config.beta, d_alpha, out.params.alpha);
  out.mean_val_loss = val_loss_sum / static_cast<double>(pairs.size());
  return out;
}

OuterUpdateResult outer_update(const MetaParams& meta, const BackboneSpec& spec,
                               const std::vector<Task>& tasks, const EpisodeConfig& config) {
  if (tasks.empty()) throw DataError("outer_update: no tasks");
  std::vector<SampleSetLoss> losses;
  losses.reserve(tasks.size() * 2);
  std::vector<TaskLossPair> pairs;
  for (const Task& t : tasks) {
    losses.emplace_back(spec, t.support);
    losses.emplace_back(spec, t.validation);
    pairs.push_back({t.class_id, &losses[losses.size() - 2], &losses[losses.size() - 1]});
  }
  return outer_update_with_losses(meta, std::move(pairs), config);
}

MetaTrainResult meta_train(const EpisodeDataset& dataset, const MetaTrainOptions& options) {
  options.episode.validate();
  if (dataset.normal.empty()) throw DataError("meta_train: normal pool is empty");
  if (dataset.anomalies.empty()) throw DataError("meta_train: no anomaly classes");

  std::vector<int> class_ids;
  for (const auto& [id, pool] : dataset.anomalies) {
    if (pool.empty()) throw DataError("meta_train: class " + std::to_string(id) + " is empty");
    class_ids.push_back(id);
  }

  MetaTrainResult result;
  result.space = LabelSpace::from_classes(class_ids);

  const int d = static_cast<int>(dataset.normal.front().size());
  for (const auto& row : dataset.normal)
    if (static_cast<int>(row.size()) != d) throw DataError("meta_train: inconsistent feature widths");
  for (const auto& [id, pool] : dataset.anomalies)
    for (const auto& row : pool)
      if (static_cast<int>(row.size()) != d)
        throw DataError("meta_train: inconsistent feature widths in class " + std::to_string(id));

  result.spec.widths.push_back(d);
  for (int h : options.hidden) {
    if (h < 1) throw UsageError("meta_train: hidden widths must be >= 1");
    result.spec.widths.push_back(h);
  }
  result.spec.widths.push_back(result.space.size());

  Rng rng(options.episode.seed);
  Rng init_rng = rng.derive("init");
  result.params.theta = init_backbone(result.spec, init_rng);
  result.params.alpha = constant_like(result.params.theta, 0.01);

  for (int e = 0; e < options.episode.episodes; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng episode_rng = rng.derive("episode", static_cast<std::uint64_t>(e));
    const std::vector<Task> tasks =
        sample_episode(result.space, dataset, options.episode, episode_rng);
    OuterUpdateResult step = outer_update(result.params, result.spec, tasks, options.episode);
    result.params = std::move(step.params);
    const auto t1 = std::chrono::steady_clock::now();
    EpisodeLogEntry entry;
    entry.episode = e;
    entry.mean_val_loss = step.mean_val_loss;
    entry.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    result.log.push_back(entry);
  }
  return result;
}

ParamSet fit_backbone(const BackboneSpec& spec, const std::vector<LabeledSample>& samples,
                      const FitOptions& options) {
  if (samples.empty()) throw DataError("fit_backbone: empty sample set");
  if (options.epochs < 0) throw UsageError("fit_backbone: epochs must be >= 0");
  Rng rng(options.seed);
  ParamSet theta = init_backbone(spec, rng);
  SampleSetLoss loss(spec, samples);
  Adam opt;
  opt.lr = options.learning_rate;
  std::vector<double> flat = theta.flatten();
  for (int e = 0; e < options.epochs; ++e) {
    theta.unflatten(flat);
    double value = 0.0;
    const ParamSet g = grad(loss, theta, &value);
    if (!std::isfinite(value))
      throw NumericError("fit_backbone: non-finite loss at epoch " + std::to_string(e));
    opt.step(flat, g.flatten());
  }
  theta.unflatten(flat);
  return theta;
}

Classification classify(const ParamSet& theta, const BackboneSpec& spec,
                        const std::vector<double>& x) {
  Classification out;
  out.probs = forward_backbone(theta, spec, x);
  out.label = 0;
  for (int k = 1; k < static_cast<int>(out.probs.size()); ++k)
    if (out.probs[static_cast<std::size_t>(k)] > out.probs[static_cast<std::size_t>(out.label)])
      out.label = k;
  return out;
}

}  // namespace uad
