// SPDX-License-Identifier: Apache-2.0
#include "uad/io/model_io.hpp"

#include <utility>

#include "uad/net/ingest.hpp"

namespace uad {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const json& require(const json& j, const char* key, const std::string& what) {
  const auto it = j.find(key);
  if (it == j.end()) throw FormatError(what + ": missing field '" + key + "'");
  return *it;
}

json parse_or_throw(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw FormatError(what + ": not valid JSON");
  return j;
}

// Checks magic and kind before anything else so wrong-file errors are clear.
void check_header(const json& j, const std::string& kind) {
  const json& magic = require(j, "magic", "model file");
  if (!magic.is_string() || magic.get<std::string>() != kModelMagic)
    throw FormatError("model file: unsupported magic " + magic.dump() + ", expected \"" +
                      kModelMagic + "\"");
  const json& k = require(j, "kind", "model file");
  if (!k.is_string() || k.get<std::string>() != kind)
    throw FormatError("model file: kind " + k.dump() + " is not a " + kind + " model");
}

ordered_json scaler_to_json(const ColumnScaler& scaler) {
  return ordered_json{{"min", scaler.min}, {"max", scaler.max}};
}

ColumnScaler scaler_from_json(const json& j) {
  ColumnScaler s;
  s.min = require(j, "min", "normalization block").get<std::vector<double>>();
  s.max = require(j, "max", "normalization block").get<std::vector<double>>();
  if (s.min.size() != s.max.size())
    throw FormatError("normalization block: min/max length mismatch");
  return s;
}

}  // namespace

ordered_json param_set_to_json(const ParamSet& params) {
  ordered_json out = ordered_json::array();
  for (const auto& item : params.items)
    out.push_back(ordered_json{
        {"name", item.name}, {"shape", item.tensor.shape}, {"data", item.tensor.data}});
  return out;
}

ParamSet param_set_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("parameter set: expected an array of tensors");
  ParamSet out;
  for (const json& entry : j) {
    const std::string name = require(entry, "name", "tensor").get<std::string>();
    Tensor t;
    t.shape = require(entry, "shape", "tensor '" + name + "'").get<std::vector<int>>();
    t.data = require(entry, "data", "tensor '" + name + "'").get<std::vector<double>>();
    for (int d : t.shape)
      if (d < 0) throw FormatError("tensor '" + name + "': negative shape entry");
    if (Tensor::numel(t.shape) != t.data.size())
      throw FormatError("tensor '" + name + "': shape wants " +
                        std::to_string(Tensor::numel(t.shape)) + " values, data has " +
                        std::to_string(t.data.size()));
    out.add(name, std::move(t));
  }
  return out;
}

ordered_json meta_model_to_json(const MetaModel& model) {
  ordered_json j;
  j["magic"] = kModelMagic;
  j["kind"] = "meta";
  j["backbone"] = ordered_json{{"widths", model.spec.widths}};
  j["label_space"] = ordered_json{{"train_classes", model.space.train_classes}};
  j["episode"] = ordered_json{
      {"K", model.episode.K},
      {"M", model.episode.M},
      {"N", model.episode.N},
      {"beta", model.episode.beta},
      {"inner_steps", model.episode.inner_steps},
      {"episodes", model.episode.episodes},
      {"mode", model.episode.mode == MetaGradMode::kExact ? "exact" : "first-order"},
      {"seed", model.episode.seed},
  };
  j["standardizer"] = ordered_json{
      {"mean", model.standardizer.mean}, {"scale", model.standardizer.scale}};
  if (!model.slot_names.empty()) j["slot_names"] = model.slot_names;
  j["theta"] = param_set_to_json(model.params.theta);
  j["alpha"] = param_set_to_json(model.params.alpha);
  return j;
}

MetaModel meta_model_from_json(const json& j) {
  check_header(j, "meta");
  MetaModel m;
  m.spec.widths =
      require(require(j, "backbone", "meta model"), "widths", "backbone").get<std::vector<int>>();
  if (m.spec.widths.size() < 2) throw FormatError("backbone: needs at least two widths");
  m.space = LabelSpace::from_classes(
      require(require(j, "label_space", "meta model"), "train_classes", "label_space")
          .get<std::vector<int>>());
  const json& ep = require(j, "episode", "meta model");
  m.episode.K = require(ep, "K", "episode").get<int>();
  m.episode.M = require(ep, "M", "episode").get<int>();
  m.episode.N = require(ep, "N", "episode").get<int>();
  m.episode.beta = require(ep, "beta", "episode").get<double>();
  m.episode.inner_steps = require(ep, "inner_steps", "episode").get<int>();
  m.episode.episodes = require(ep, "episodes", "episode").get<int>();
  const std::string mode = require(ep, "mode", "episode").get<std::string>();
  if (mode == "exact")
    m.episode.mode = MetaGradMode::kExact;
  else if (mode == "first-order")
    m.episode.mode = MetaGradMode::kFirstOrder;
  else
    throw FormatError("episode: unknown mode '" + mode + "'");
  m.episode.seed = require(ep, "seed", "episode").get<std::uint64_t>();
  const json& std_block = require(j, "standardizer", "meta model");
  m.standardizer.mean = require(std_block, "mean", "standardizer").get<std::vector<double>>();
  m.standardizer.scale = require(std_block, "scale", "standardizer").get<std::vector<double>>();
  if (m.standardizer.mean.size() != m.standardizer.scale.size())
    throw FormatError("standardizer: mean/scale length mismatch");
  if (j.contains("slot_names")) {
    m.slot_names = j.at("slot_names").get<std::vector<std::string>>();
    if (m.slot_names.size() != static_cast<std::size_t>(m.space.size()))
      throw FormatError("meta model: slot_names has " + std::to_string(m.slot_names.size()) +
                        " entries, label space has " + std::to_string(m.space.size()));
  }
  m.params.theta = param_set_from_json(require(j, "theta", "meta model"));
  m.params.alpha = param_set_from_json(require(j, "alpha", "meta model"));
  if (!m.params.theta.same_layout(m.params.alpha))
    throw FormatError("meta model: theta and alpha layouts differ");
  return m;
}

void save_meta_model(const std::string& path, const MetaModel& model) {
  write_file_text(path, meta_model_to_json(model).dump(2) + "\n");
}

MetaModel load_meta_model(const std::string& path) {
  return meta_model_from_json(parse_or_throw(read_file_text(path), path));
}

ordered_json autoencoder_to_json(const AutoencoderModel& model) {
  ordered_json j;
  j["magic"] = kModelMagic;
  j["kind"] = "autoencoder";
  j["spec"] = ordered_json{
      {"B", model.spec.B},
      {"V", model.spec.V},
      {"z", model.spec.z},
      {"encoder_widths", model.spec.encoder_widths},
      {"decoder_widths", model.spec.decoder_widths},
  };
  j["normalization"] = scaler_to_json(model.scaler);
  j["params"] = param_set_to_json(model.params);
  return j;
}

AutoencoderModel autoencoder_from_json(const json& j) {
  check_header(j, "autoencoder");
  AutoencoderModel m;
  const json& spec = require(j, "spec", "autoencoder model");
  m.spec.B = require(spec, "B", "spec").get<int>();
  m.spec.V = require(spec, "V", "spec").get<int>();
  m.spec.z = require(spec, "z", "spec").get<int>();
  m.spec.encoder_widths = require(spec, "encoder_widths", "spec").get<std::vector<int>>();
  m.spec.decoder_widths = require(spec, "decoder_widths", "spec").get<std::vector<int>>();
  if (m.spec.B < 1 || m.spec.V < 1 || m.spec.z < 1)
    throw FormatError("autoencoder spec: B, V, z must be positive");
  m.scaler = scaler_from_json(require(j, "normalization", "autoencoder model"));
  if (m.scaler.min.size() != static_cast<std::size_t>(m.spec.V))
    throw FormatError("autoencoder model: normalization block has " +
                      std::to_string(m.scaler.min.size()) + " columns, spec says V = " +
                      std::to_string(m.spec.V));
  m.params = param_set_from_json(require(j, "params", "autoencoder model"));
  return m;
}

void save_autoencoder(const std::string& path, const AutoencoderModel& model) {
  write_file_text(path, autoencoder_to_json(model).dump(2) + "\n");
}

AutoencoderModel load_autoencoder(const std::string& path) {
  return autoencoder_from_json(parse_or_throw(read_file_text(path), path));
}

std::string episode_log_text(const std::vector<EpisodeLogEntry>& log) {
  std::string out;
  for (const auto& e : log) {
    ordered_json line{
        {"episode", e.episode}, {"mean_val_loss", e.mean_val_loss}, {"wall_ms", e.wall_ms}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<EpisodeLogEntry> parse_episode_log(const std::string& text) {
  std::vector<EpisodeLogEntry> out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_or_throw(line, "episode log line " + std::to_string(line_no));
    EpisodeLogEntry e;
    e.episode = require(j, "episode", "episode log").get<int>();
    e.mean_val_loss = require(j, "mean_val_loss", "episode log").get<double>();
    e.wall_ms = require(j, "wall_ms", "episode log").get<double>();
    out.push_back(e);
  }
  return out;
}

}  // namespace uad
