// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "uad/nn/meta_grad.hpp"
#include "uad/rng.hpp"

namespace uad {

struct LabeledSample {
  std::vector<double> x;
  int label = 0;
};

// Label layout: the K meta-training anomaly classes occupy slots 0..K-1 in
// ascending class_id order, normal traffic gets slot K, and the novel class
// seen only at meta-test time gets slot K+1.
struct LabelSpace {
  std::vector<int> train_classes;  // ascending, distinct

  static LabelSpace from_classes(std::vector<int> ids);

  int k() const { return static_cast<int>(train_classes.size()); }
  int size() const { return k() + 2; }
  int normal_label() const { return k(); }
  int novel_label() const { return k() + 1; }
  bool has_class(int class_id) const;
  int label_of(int class_id) const;  // slot of a meta-training class
};

// One few-shot task: a single anomaly class against normal traffic.
struct Task {
  int class_id = -1;
  std::vector<LabeledSample> support;     // M anomaly + M normal
  std::vector<LabeledSample> validation;  // N anomaly + N normal
};

// Feature vectors grouped for episodic sampling. Anomaly classes are keyed
// by their dataset class id; normal flows form one shared pool.
struct EpisodeDataset {
  std::vector<std::vector<double>> normal;
  std::map<int, std::vector<std::vector<double>>> anomalies;
};

struct EpisodeConfig {
  int K = 5;
  int M = 5;
  int N = 5;
  double beta = 0.001;
  int inner_steps = 1;
  int episodes = 0;
  MetaGradMode mode = MetaGradMode::kExact;
  std::uint64_t seed = 0;

  void validate() const;
};

// Samples K tasks without replacement: K classes, M+N anomaly flows per
// class, and M+N normal flows per task, all from one rng stream.
std::vector<Task> sample_episode(const LabelSpace& space, const EpisodeDataset& dataset,
                                 const EpisodeConfig& config, Rng& rng);

}  // namespace uad
