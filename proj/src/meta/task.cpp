// SPDX-License-Identifier: Apache-2.0
#include "uad/meta/task.hpp"

#include <algorithm>
#include <string>

#include "uad/errors.hpp"

namespace uad {

LabelSpace LabelSpace::from_classes(std::vector<int> ids) {
  if (ids.empty()) throw DataError("label space: no meta-training classes");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw DataError("label space: duplicate class id");
  LabelSpace space;
  space.train_classes = std::move(ids);
  return space;
}

bool LabelSpace::has_class(int class_id) const {
  return std::binary_search(train_classes.begin(), train_classes.end(), class_id);
}

int LabelSpace::label_of(int class_id) const {
  const auto it = std::lower_bound(train_classes.begin(), train_classes.end(), class_id);
  if (it == train_classes.end() || *it != class_id)
    throw DataError("label space: class " + std::to_string(class_id) +
                    " is not a meta-training class");
  return static_cast<int>(it - train_classes.begin());
}

void EpisodeConfig::validate() const {
  if (K < 1) throw UsageError("episode config: K must be >= 1");
  if (M < 1 || N < 1) throw UsageError("episode config: M and N must be >= 1");
  if (!(beta > 0.0)) throw UsageError("episode config: beta must be positive");
  if (inner_steps < 1) throw UsageError("episode config: inner_steps must be >= 1");
  if (episodes < 0) throw UsageError("episode config: episodes must be >= 0");
}

std::vector<Task> sample_episode(const LabelSpace& space, const EpisodeDataset& dataset,
                                 const EpisodeConfig& config, Rng& rng) {
  config.validate();
  if (config.K > space.k())
    throw DataError("sample_episode: K=" + std::to_string(config.K) + " exceeds the " +
                    std::to_string(space.k()) + " meta-training classes");
  const std::size_t per_class = static_cast<std::size_t>(config.M + config.N);
  if (dataset.normal.size() < static_cast<std::size_t>(config.K) * per_class)
    throw DataError("sample_episode: normal pool has " + std::to_string(dataset.normal.size()) +
                    " samples, need " + std::to_string(static_cast<std::size_t>(config.K) * per_class));

  const std::vector<std::size_t> class_pick =
      rng.sample_without_replacement(space.train_classes.size(), static_cast<std::size_t>(config.K));

  std::vector<Task> tasks;
  tasks.reserve(static_cast<std::size_t>(config.K));
  std::size_t normal_cursor = 0;
  const std::vector<std::size_t> normal_pick = rng.sample_without_replacement(
      dataset.normal.size(), static_cast<std::size_t>(config.K) * per_class);

  for (std::size_t t = 0; t < class_pick.size(); ++t) {
    const int class_id = space.train_classes[class_pick[t]];
    const auto pool_it = dataset.anomalies.find(class_id);
    const std::size_t pool_size = pool_it == dataset.anomalies.end() ? 0 : pool_it->second.size();
    if (pool_size < per_class)
      throw DataError("sample_episode: class " + std::to_string(class_id) + " has " +
                      std::to_string(pool_size) + " samples, need " + std::to_string(per_class));
    const std::vector<std::size_t> pick = rng.sample_without_replacement(pool_size, per_class);

    Task task;
    task.class_id = class_id;
    const int anomaly_label = space.label_of(class_id);
    const auto& pool = pool_it->second;
    for (int i = 0; i < config.M; ++i)
      task.support.push_back({pool[pick[static_cast<std::size_t>(i)]], anomaly_label});
    for (int i = 0; i < config.N; ++i)
      task.validation.push_back({pool[pick[static_cast<std::size_t>(config.M + i)]], anomaly_label});
    for (int i = 0; i < config.M; ++i)
      task.support.push_back({dataset.normal[normal_pick[normal_cursor++]], space.normal_label()});
    for (int i = 0; i < config.N; ++i)
      task.validation.push_back({dataset.normal[normal_pick[normal_cursor++]], space.normal_label()});
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace uad
