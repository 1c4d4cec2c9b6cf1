// SPDX-License-Identifier: Apache-2.0
#include "uad/eval/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "uad/errors.hpp"
#include "uad/features/stat_features.hpp"

namespace uad {
namespace {

std::vector<int> sorted_class_ids(const EpisodeDataset& ds) {
  std::vector<int> out;
  out.reserve(ds.anomalies.size());
  for (const auto& [cls, rows] : ds.anomalies) out.push_back(cls);  // map is ordered
  return out;
}

std::uint64_t derived_seed(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  Rng r = Rng(seed).derive(label, index);
  return r.next_u64();
}

nlohmann::ordered_json mshot_config_json(const MshotConfig& c) {
  return {{"M", c.M},
          {"repeats", c.repeats},
          {"adapt_steps", c.adapt_steps},
          {"from_scratch", c.from_scratch},
          {"seed", c.seed}};
}

nlohmann::ordered_json train_config_json(const MetaTrainOptions& o) {
  return {{"K", o.episode.K},         {"M", o.episode.M},
          {"N", o.episode.N},         {"beta", o.episode.beta},
          {"inner_steps", o.episode.inner_steps}, {"episodes", o.episode.episodes},
          {"hidden", o.hidden},       {"seed", o.episode.seed}};
}

ArmResult finish_arm(std::string name, std::vector<RepeatRecord> records) {
  ArmResult arm;
  arm.name = std::move(name);
  arm.aggregate = aggregate_records(records);
  arm.per_repeat = std::move(records);
  return arm;
}

// Shared core of run_mshot and run_crossdataset. `check_disjoint` is off for
// cross-dataset runs, where class ids of the two corpora are unrelated.
ProtocolResult mshot_impl(const MetaModel& model, const EpisodeDataset& test,
                          const MshotConfig& config, const std::string& protocol,
                          bool check_disjoint) {
  if (config.M < 1) throw UsageError(protocol + ": M must be >= 1");
  if (config.repeats < 1) throw UsageError(protocol + ": repeats must be >= 1");
  if (config.adapt_steps < 0) throw UsageError(protocol + ": adapt_steps must be >= 0");

  const std::vector<int> classes = sorted_class_ids(test);
  if (classes.empty()) throw DataError(protocol + ": test dataset has no anomaly classes");
  if (check_disjoint)
    for (int c : classes)
      if (model.space.has_class(c))
        throw DataError(protocol + ": test class " + std::to_string(c) +
                        " overlaps the meta-training classes");

  std::size_t max_holdout = 0;
  for (int c : classes) {
    const auto& pool = test.anomalies.at(c);
    if (pool.size() < static_cast<std::size_t>(config.M) + 1)
      throw DataError(protocol + ": class " + std::to_string(c) + " has " +
                      std::to_string(pool.size()) + " samples, need >= " +
                      std::to_string(config.M + 1));
    max_holdout = std::max(max_holdout, pool.size() - static_cast<std::size_t>(config.M));
  }
  const std::size_t need_normal = static_cast<std::size_t>(config.M) + max_holdout;
  if (test.normal.size() < need_normal)
    throw DataError(protocol + ": normal pool has " + std::to_string(test.normal.size()) +
                    " samples, need >= " + std::to_string(need_normal));

  const int novel = model.space.novel_label();
  const int norm = model.space.normal_label();
  std::vector<RepeatRecord> fine, pre, scratch;

  for (int r = 0; r < config.repeats; ++r) {
    Rng rng = Rng(config.seed).derive("repeat", static_cast<std::uint64_t>(r));
    const int cls = classes[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(classes.size()) - 1))];
    const auto& pool = test.anomalies.at(cls);
    const std::size_t h = pool.size() - static_cast<std::size_t>(config.M);

    const auto novel_perm = rng.sample_without_replacement(pool.size(), pool.size());
    const auto normal_perm = rng.sample_without_replacement(
        test.normal.size(), static_cast<std::size_t>(config.M) + h);

    std::vector<LabeledSample> fewshot;
    fewshot.reserve(2 * static_cast<std::size_t>(config.M));
    for (int i = 0; i < config.M; ++i)
      fewshot.push_back({model.standardizer.apply(pool[novel_perm[static_cast<std::size_t>(i)]]),
                         novel});
    for (int i = 0; i < config.M; ++i)
      fewshot.push_back(
          {model.standardizer.apply(test.normal[normal_perm[static_cast<std::size_t>(i)]]),
           norm});

    std::vector<std::pair<std::vector<double>, int>> holdout;  // standardized row, true label
    holdout.reserve(2 * h);
    for (std::size_t i = static_cast<std::size_t>(config.M); i < pool.size(); ++i)
      holdout.push_back({model.standardizer.apply(pool[novel_perm[i]]), novel});
    for (std::size_t i = static_cast<std::size_t>(config.M); i < normal_perm.size(); ++i)
      holdout.push_back({model.standardizer.apply(test.normal[normal_perm[i]]), norm});

    const auto score = [&](const ParamSet& theta) {
      std::vector<std::pair<int, int>> pairs;
      pairs.reserve(holdout.size());
      for (const auto& [row, truth] : holdout)
        pairs.push_back({truth, classify(theta, model.spec, row).label});
      const Metrics m = compute_metrics(pairs, model.space.size());
      return RepeatRecord{r, cls, m.accuracy, m.macro_f1};
    };

    fine.push_back(score(adapt(model.params, model.spec, fewshot, config.adapt_steps)));
    pre.push_back(score(model.params.theta));
    if (config.from_scratch) {
      FitOptions fit = config.scratch_fit;
      Rng sub = rng.derive("scratch");
      fit.seed = sub.next_u64();
      scratch.push_back(score(fit_backbone(model.spec, fewshot, fit)));
    }
  }

  ProtocolResult result;
  result.protocol = protocol;
  result.config = mshot_config_json(config);
  result.arms.push_back(finish_arm("fine_tuned", std::move(fine)));
  result.arms.push_back(finish_arm("pre_training", std::move(pre)));
  if (config.from_scratch) result.arms.push_back(finish_arm("from_scratch", std::move(scratch)));
  return result;
}

}  // namespace

Aggregate aggregate_records(const std::vector<RepeatRecord>& records) {
  if (records.empty()) throw UsageError("aggregate_records: no records");
  Aggregate a;
  const double n = static_cast<double>(records.size());
  for (const auto& r : records) {
    a.accuracy_mean += r.accuracy;
    a.f1_mean += r.macro_f1;
  }
  a.accuracy_mean /= n;
  a.f1_mean /= n;
  double va = 0.0, vf = 0.0;
  for (const auto& r : records) {
    va += (r.accuracy - a.accuracy_mean) * (r.accuracy - a.accuracy_mean);
    vf += (r.macro_f1 - a.f1_mean) * (r.macro_f1 - a.f1_mean);
  }
  a.accuracy_std = std::sqrt(va / n);
  a.f1_std = std::sqrt(vf / n);
  return a;
}

const ArmResult& ProtocolResult::arm(const std::string& name) const {
  for (const auto& a : arms)
    if (a.name == name) return a;
  throw UsageError("no arm named '" + name + "' in protocol result");
}

nlohmann::ordered_json protocol_result_to_json(const ProtocolResult& result) {
  if (result.arms.empty()) throw UsageError("protocol result has no arms");
  const auto arm_json = [](const ArmResult& arm) {
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (const auto& r : arm.per_repeat)
      per.push_back({{"repeat", r.repeat},
                     {"novel_class", r.novel_class},
                     {"accuracy", r.accuracy},
                     {"macro_f1", r.macro_f1}});
    return nlohmann::ordered_json{{"per_repeat", std::move(per)},
                                  {"aggregate",
                                   {{"accuracy_mean", arm.aggregate.accuracy_mean},
                                    {"accuracy_std", arm.aggregate.accuracy_std},
                                    {"f1_mean", arm.aggregate.f1_mean},
                                    {"f1_std", arm.aggregate.f1_std}}}};
  };

  nlohmann::ordered_json j;
  j["protocol"] = result.protocol;
  j["config"] = result.config;
  const nlohmann::ordered_json headline = arm_json(result.arms.front());
  j["per_repeat"] = headline["per_repeat"];
  j["aggregate"] = headline["aggregate"];
  nlohmann::ordered_json arms;
  for (const auto& a : result.arms) arms[a.name] = arm_json(a);
  j["arms"] = std::move(arms);
  return j;
}

ProtocolResult run_mshot(const MetaModel& model, const EpisodeDataset& test_dataset,
                         const MshotConfig& config) {
  return mshot_impl(model, test_dataset, config, "mshot", /*check_disjoint=*/true);
}

std::map<int, std::vector<int>> standard_fold_assignment(const EpisodeDataset& dataset,
                                                         int folds, std::uint64_t seed) {
  if (folds < 2) throw UsageError("standard: folds must be >= 2");
  const auto deal = [&](std::string_view label, std::uint64_t idx, std::size_t n) {
    Rng rng = Rng(seed).derive(label, idx);
    const auto perm = rng.sample_without_replacement(n, n);
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i)
      fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    return fold;
  };
  std::map<int, std::vector<int>> out;
  for (const auto& [cls, pool] : dataset.anomalies)
    out[cls] = deal("fold-class", static_cast<std::uint64_t>(cls), pool.size());
  out[-1] = deal("fold-normal", 0, dataset.normal.size());
  return out;
}

ProtocolResult run_standard(const EpisodeDataset& dataset, const StandardConfig& config) {
  if (config.folds < 2) throw UsageError("standard: folds must be >= 2");
  const std::vector<int> classes = sorted_class_ids(dataset);
  if (classes.empty()) throw DataError("standard: dataset has no anomaly classes");
  for (int c : classes)
    if (dataset.anomalies.at(c).size() < static_cast<std::size_t>(config.folds))
      throw DataError("standard: class " + std::to_string(c) + " has " +
                      std::to_string(dataset.anomalies.at(c).size()) +
                      " samples, fewer than " + std::to_string(config.folds) + " folds");
  if (dataset.normal.size() < static_cast<std::size_t>(config.folds))
    throw DataError("standard: normal pool has " + std::to_string(dataset.normal.size()) +
                    " samples, fewer than " + std::to_string(config.folds) + " folds");

  std::map<int, std::vector<int>> folds = standard_fold_assignment(dataset, config.folds, config.seed);
  const std::vector<int>& normal_folds = folds.at(-1);

  const LabelSpace space = LabelSpace::from_classes(classes);
  std::vector<RepeatRecord> records;

  for (int f = 0; f < config.folds; ++f) {
    EpisodeDataset train;
    std::vector<std::pair<const std::vector<double>*, int>> held;  // raw row, true label
    for (int c : classes) {
      const auto& pool = dataset.anomalies.at(c);
      auto& dst = train.anomalies[c];
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (folds.at(c)[i] == f)
          held.push_back({&pool[i], space.label_of(c)});
        else
          dst.push_back(pool[i]);
      }
    }
    for (std::size_t i = 0; i < dataset.normal.size(); ++i) {
      if (normal_folds[i] == f)
        held.push_back({&dataset.normal[i], space.normal_label()});
      else
        train.normal.push_back(dataset.normal[i]);
    }

    MetaTrainOptions opts = config.train;
    opts.episode.seed = derived_seed(config.seed, "episode-seed", static_cast<std::uint64_t>(f));
    const MetaModel model = train_meta_model(train, opts);

    // Support set for inference: M shots per class plus M normals, drawn from
    // the training folds so the held fold stays untouched.
    Rng srng = Rng(config.seed).derive("support", static_cast<std::uint64_t>(f));
    const int M = config.train.episode.M;
    std::vector<LabeledSample> support;
    for (int c : classes) {
      const auto& pool = train.anomalies.at(c);
      for (std::size_t i : srng.sample_without_replacement(pool.size(), static_cast<std::size_t>(M)))
        support.push_back({pool[i], space.label_of(c)});
    }
    for (std::size_t i : srng.sample_without_replacement(train.normal.size(), static_cast<std::size_t>(M)))
      support.push_back({train.normal[i], space.normal_label()});
    const ParamSet adapted = adapt_model(model, support, config.adapt_steps);

    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(held.size());
    for (const auto& [row, truth] : held)
      pairs.push_back({truth, classify_row(model, adapted, *row).label});
    const Metrics m = compute_metrics(pairs, space.size());
    records.push_back({f, -1, m.accuracy, m.macro_f1});
  }

  ProtocolResult result;
  result.protocol = "standard";
  result.config = train_config_json(config.train);
  result.config["folds"] = config.folds;
  result.config["adapt_steps"] = config.adapt_steps;
  result.config["seed"] = config.seed;
  result.arms.push_back(finish_arm("folds", std::move(records)));
  return result;
}

ProtocolResult run_crossdataset(const EpisodeDataset& train_dataset,
                                const EpisodeDataset& test_dataset,
                                const CrossDatasetConfig& config) {
  if (train_dataset.anomalies.empty())
    throw DataError("crossdataset: training dataset has no anomaly classes");
  if (test_dataset.anomalies.empty())
    throw DataError("crossdataset: test dataset has no anomaly classes");
  const auto dim_of = [](const EpisodeDataset& ds) {
    return ds.normal.empty() ? ds.anomalies.begin()->second.front().size()
                             : ds.normal.front().size();
  };
  if (dim_of(train_dataset) != dim_of(test_dataset))
    throw DataError("crossdataset: feature schema mismatch: " +
                    std::to_string(dim_of(train_dataset)) + " vs " +
                    std::to_string(dim_of(test_dataset)) + " features");

  const MetaModel model = train_meta_model(train_dataset, config.train);
  ProtocolResult result =
      mshot_impl(model, test_dataset, config.mshot, "crossdataset", /*check_disjoint=*/false);
  result.config["train"] = train_config_json(config.train);
  return result;
}

std::vector<double> stat_row_81(const Flow& flow) {
  const StatFeatureVector v = extract_stat_features(flow);
  return {v.values.begin(), v.values.end()};  // masked entries already hold 0
}

std::vector<double> stat_row_selected(const Flow& flow) {
  return project_selected(extract_stat_features(flow), selected_feature_indices());
}

AblationFeatures materialize_feature_sets(const TaskFamily& family,
                                          const AblationConfig& config) {
  if (family.flows.empty()) throw DataError("ablation: task family has no flows");

  AblationFeatures out;
  out.set1.reserve(family.flows.size());
  out.set2.reserve(family.flows.size());
  out.set3.reserve(family.flows.size());

  std::vector<FlowMatrix> matrices;
  matrices.reserve(family.flows.size());
  std::vector<FlowMatrix> ae_train;
  const auto in_train = [&](int cls) {
    return cls == 0 || std::find(family.train_classes.begin(), family.train_classes.end(),
                                 cls) != family.train_classes.end();
  };
  for (const auto& lf : family.flows) {
    matrices.push_back(build_flow_matrix(lf.flow, config.max_len));
    if (in_train(lf.class_id)) ae_train.push_back(matrices.back());
    out.set1.push_back(stat_row_81(lf.flow));
    out.set2.push_back(stat_row_selected(lf.flow));
  }

  AutoencoderSpec spec;
  spec.B = config.max_len;
  spec.encoder_widths = config.ae_hidden_enc;
  spec.decoder_widths = config.ae_hidden_dec;
  out.ae = train_autoencoder(ae_train, spec, config.ae).model;

  for (std::size_t i = 0; i < family.flows.size(); ++i)
    out.set3.push_back(combine_features(out.set2[i], encode(out.ae, matrices[i])));
  return out;
}

ProtocolResult run_ablation(const TaskFamily& family, const AblationConfig& config) {
  if (!(config.normal_train_fraction > 0.0 && config.normal_train_fraction < 1.0))
    throw UsageError("ablation: normal_train_fraction must be in (0, 1)");
  const AblationFeatures feats = materialize_feature_sets(family, config);

  std::vector<std::size_t> normal_idx;
  for (std::size_t i = 0; i < family.flows.size(); ++i)
    if (family.flows[i].class_id == 0) normal_idx.push_back(i);
  if (normal_idx.size() < 2) throw DataError("ablation: need at least 2 normal flows");
  const std::size_t n_train_normal = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(config.normal_train_fraction *
                                             static_cast<double>(normal_idx.size()))));

  const auto split = [&](const std::vector<std::vector<double>>& rows) {
    std::pair<EpisodeDataset, EpisodeDataset> ds;  // train, test
    for (std::size_t j = 0; j < normal_idx.size(); ++j)
      (j < n_train_normal ? ds.first.normal : ds.second.normal).push_back(rows[normal_idx[j]]);
    for (std::size_t i = 0; i < family.flows.size(); ++i) {
      const int cls = family.flows[i].class_id;
      if (cls == 0) continue;
      const bool train_cls = std::find(family.train_classes.begin(), family.train_classes.end(),
                                       cls) != family.train_classes.end();
      (train_cls ? ds.first : ds.second).anomalies[cls].push_back(rows[i]);
    }
    return ds;
  };

  ProtocolResult result;
  result.protocol = "ablation";
  result.config = mshot_config_json(config.mshot);
  result.config["train"] = train_config_json(config.train);
  result.config["max_len"] = config.max_len;

  const std::vector<std::pair<std::string, const std::vector<std::vector<double>>*>> sets = {
      {"set3", &feats.set3}, {"set2", &feats.set2}, {"set1", &feats.set1}};
  for (const auto& [name, rows] : sets) {
    const auto [train_ds, test_ds] = split(*rows);
    const MetaModel model = train_meta_model(train_ds, config.train);
    const ProtocolResult one = mshot_impl(model, test_ds, config.mshot, "mshot", true);
    ArmResult arm = one.arm("fine_tuned");
    arm.name = name;
    result.arms.push_back(std::move(arm));
  }
  return result;
}

}  // namespace uad
