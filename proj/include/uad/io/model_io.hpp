// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "uad/ae/autoencoder.hpp"
#include "uad/meta/model.hpp"

namespace uad {

// Every model file is one JSON object starting with this magic string.
inline constexpr const char* kModelMagic = "meta-uad-model-v1";

// ParamSet as an ordered list of {name, shape, data}. Doubles survive the
// round trip bitwise (shortest round-trip serialization).
nlohmann::ordered_json param_set_to_json(const ParamSet& params);
ParamSet param_set_from_json(const nlohmann::json& j);

// Meta-model file: theta, alpha, backbone widths, label space, standardizer,
// and the episode config used for training. The episode log is written
// separately (JSON-lines) and is not part of the model file.
nlohmann::ordered_json meta_model_to_json(const MetaModel& model);
MetaModel meta_model_from_json(const nlohmann::json& j);
void save_meta_model(const std::string& path, const MetaModel& model);
MetaModel load_meta_model(const std::string& path);

// Autoencoder file: spec (B, V, z, stack widths), parameters, and the
// min-max normalization block.
nlohmann::ordered_json autoencoder_to_json(const AutoencoderModel& model);
AutoencoderModel autoencoder_from_json(const nlohmann::json& j);
void save_autoencoder(const std::string& path, const AutoencoderModel& model);
AutoencoderModel load_autoencoder(const std::string& path);

// Episode log as JSON-lines, one {episode, mean_val_loss, wall_ms} per line.
std::string episode_log_text(const std::vector<EpisodeLogEntry>& log);
std::vector<EpisodeLogEntry> parse_episode_log(const std::string& text);

}  // namespace uad
