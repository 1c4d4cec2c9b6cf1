// SPDX-License-Identifier: Apache-2.0
//
// meta-uad: flow feature extraction and few-shot anomaly detection toolkit.
// One subcommand per pipeline stage; every run writes a resolved-config JSON
// next to its primary output so results are reproducible from the artifacts
// alone. Option precedence: built-in defaults < --config file < flags.

#include <CLI11.hpp>

#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uad/ae/autoencoder.hpp"
#include "uad/ae/flow_matrix.hpp"
#include "uad/errors.hpp"
#include "uad/eval/metrics.hpp"
#include "uad/eval/protocols.hpp"
#include "uad/features/selection.hpp"
#include "uad/features/stat_features.hpp"
#include "uad/io/feature_csv.hpp"
#include "uad/io/model_io.hpp"
#include "uad/meta/model.hpp"
#include "uad/net/flow_table.hpp"
#include "uad/net/ingest.hpp"
#include "uad/synth/generator.hpp"

namespace {

using namespace uad;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Option resolution: defaults < META_UAD_THREADS < config file < flags.

class OptionSet {
 public:
  explicit OptionSet(CLI::App* cmd) : cmd_(cmd), config_path_(std::make_shared<std::string>()) {
    cmd->add_option("--config", *config_path_, "JSON config file (flags override it)");
  }

  void integer(const std::string& key, long long def, const std::string& help) {
    defaults_[key] = def;
    auto holder = std::make_shared<long long>();
    add(key, cmd_->add_option("--" + key, *holder, help),
        [key, holder](ordered_json& f) { f[key] = *holder; });
  }

  void number(const std::string& key, double def, const std::string& help) {
    defaults_[key] = def;
    auto holder = std::make_shared<double>();
    add(key, cmd_->add_option("--" + key, *holder, help),
        [key, holder](ordered_json& f) { f[key] = *holder; });
  }

  void seed(const std::string& key, std::uint64_t def, const std::string& help) {
    defaults_[key] = def;
    auto holder = std::make_shared<std::uint64_t>();
    add(key, cmd_->add_option("--" + key, *holder, help),
        [key, holder](ordered_json& f) { f[key] = *holder; });
  }

  void text(const std::string& key, const std::string& def, const std::string& help) {
    defaults_[key] = def;
    auto holder = std::make_shared<std::string>();
    add(key, cmd_->add_option("--" + key, *holder, help),
        [key, holder](ordered_json& f) { f[key] = *holder; });
  }

  void flag(const std::string& key, const std::string& help) {
    defaults_[key] = false;
    auto holder = std::make_shared<bool>(false);
    add(key, cmd_->add_flag("--" + key, *holder, help),
        [key, holder](ordered_json& f) { f[key] = *holder; });
  }

  // Every subcommand gets --threads; the env var is the layer under the file.
  void threads() {
    integer("threads", 1, "worker parallelism cap (env META_UAD_THREADS, flag wins)");
  }

  ordered_json resolve(const std::string& cmd_name) const {
    ordered_json r = defaults_;
    if (r.contains("threads")) {
      if (const char* env = std::getenv("META_UAD_THREADS"); env && *env) {
        try {
          r["threads"] = std::stoll(env);
        } catch (const std::exception&) {
          throw UsageError("META_UAD_THREADS: '" + std::string(env) + "' is not an integer");
        }
      }
    }
    if (!config_path_->empty()) {
      const json file = json::parse(read_file_text(*config_path_), nullptr, false);
      if (file.is_discarded() || !file.is_object())
        throw FormatError(*config_path_ + ": config must be one JSON object");
      for (const auto& [k, v] : file.items()) {
        const auto it = defaults_.find(k);
        if (it == defaults_.end())
          throw UsageError(cmd_name + ": unknown config key '" + k + "'");
        const bool ok = (it->is_boolean() && v.is_boolean()) ||
                        (it->is_number() && v.is_number()) ||
                        (it->is_string() && v.is_string());
        if (!ok)
          throw UsageError(cmd_name + ": config key '" + k + "' has the wrong type");
        r[k] = v;
      }
    }
    ordered_json flags;
    for (const auto& c : collectors_) c(flags);
    for (const auto& [k, v] : flags.items()) r[k] = v;
    if (r.contains("threads") && r["threads"].get<long long>() < 1)
      throw UsageError(cmd_name + ": --threads must be >= 1");
    return r;
  }

  // Requires every listed key to be non-empty, reporting all gaps at once.
  static void require(const ordered_json& r, const std::string& cmd_name,
                      const std::vector<std::string>& keys) {
    std::string missing;
    for (const auto& k : keys)
      if (r.at(k).get<std::string>().empty())
        missing += (missing.empty() ? "--" : " and --") + k;
    if (!missing.empty())
      throw UsageError(cmd_name + ": missing required options " + missing);
  }

 private:
  void add(const std::string& key, CLI::Option* opt, std::function<void(ordered_json&)> put) {
    collectors_.push_back([opt, put = std::move(put)](ordered_json& f) {
      if (opt->count() > 0) put(f);
    });
    (void)key;
  }

  CLI::App* cmd_;
  ordered_json defaults_;
  std::shared_ptr<std::string> config_path_;
  std::vector<std::function<void(ordered_json&)>> collectors_;
};

// ---------------------------------------------------------------------------
// Small shared helpers.

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    const std::string part = s.substr(pos, comma - pos);
    try {
      if (!part.empty()) out.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw UsageError("--" + key + ": '" + part + "' is not an integer");
    }
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string> split_paths(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    if (comma > pos) out.push_back(s.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

CaptureFormat capture_format(const std::string& fmt, const std::string& path) {
  if (fmt == "pcap") return CaptureFormat::kPcap;
  if (fmt == "packet-csv") return CaptureFormat::kPacketCsv;
  if (fmt != "auto") throw UsageError("--format must be auto, pcap, or packet-csv");
  return path.size() >= 5 && path.substr(path.size() - 5) == ".pcap" ? CaptureFormat::kPcap
                                                                     : CaptureFormat::kPacketCsv;
}

MetaGradMode grad_mode(const std::string& mode) {
  if (mode == "exact") return MetaGradMode::kExact;
  if (mode == "first-order") return MetaGradMode::kFirstOrder;
  throw UsageError("--mode must be exact or first-order");
}

std::vector<Flow> load_flows(const ordered_json& r) {
  const std::string input = r.at("input").get<std::string>();
  const IngestResult ingested =
      ingest_packets(input, capture_format(r.at("format").get<std::string>(), input));
  FlowAssemblyConfig cfg;
  cfg.idle_timeout_s = r.at("idle-timeout").get<double>();
  cfg.active_timeout_s = r.at("active-timeout").get<double>();
  if (cfg.idle_timeout_s <= 0 || cfg.active_timeout_s <= 0)
    throw UsageError("flow timeouts must be positive");
  return assemble_flows(ingested.packets, cfg);
}

// Joins assembled flows with a flow-labels CSV by canonical key + start
// timestamp. Every flow must be labeled; a miss is a data problem.
std::vector<LabeledFlow> attach_labels(std::vector<Flow> flows, const std::string& labels_path) {
  std::map<std::pair<FlowKey, std::int64_t>, int> index;
  for (const auto& l : read_flow_labels_csv(labels_path)) index[{l.key, l.start_ts}] = l.class_id;
  std::vector<LabeledFlow> out;
  out.reserve(flows.size());
  for (auto& f : flows) {
    const auto it = index.find({f.key, f.start_ts});
    if (it == index.end())
      throw DataError("no label for the flow starting at ts " + std::to_string(f.start_ts) +
                      " (key " + f.key.a.ip.to_string() + ":" + std::to_string(f.key.a.port) +
                      " <-> " + f.key.b.ip.to_string() + ":" + std::to_string(f.key.b.port) + ")");
    out.push_back({std::move(f), it->second});
  }
  return out;
}

MetaTrainOptions train_options(const ordered_json& r) {
  MetaTrainOptions opt;
  opt.episode.K = r.at("K").get<int>();
  opt.episode.M = r.at("M").get<int>();
  opt.episode.N = r.at("N").get<int>();
  opt.episode.beta = r.at("beta").get<double>();
  opt.episode.inner_steps = r.at("inner-steps").get<int>();
  opt.episode.episodes = r.at("episodes").get<int>();
  opt.episode.mode = grad_mode(r.at("mode").get<std::string>());
  opt.episode.seed = r.at("seed").get<std::uint64_t>();
  opt.hidden = parse_int_list(r.at("hidden").get<std::string>(), "hidden");
  return opt;
}

void write_sidecar(const std::string& output, const std::string& cmd_name,
                   const ordered_json& resolved) {
  ordered_json side;
  side["command"] = cmd_name;
  side["options"] = resolved;
  write_file_text(output + ".config.json", side.dump(2) + "\n");
}

std::string arm_summary(const ArmResult& arm) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s accuracy %.4f +/- %.4f  f1 %.4f +/- %.4f  (%zu rounds)",
                arm.name.c_str(), arm.aggregate.accuracy_mean, arm.aggregate.accuracy_std,
                arm.aggregate.f1_mean, arm.aggregate.f1_std, arm.per_repeat.size());
  return buf;
}

// ---------------------------------------------------------------------------
// synth

int run_synth(const ordered_json& r) {
  SyntheticSpec spec;
  spec.n_classes = r.at("classes").get<int>();
  spec.flows_per_class = r.at("flows-per-class").get<int>();
  spec.normal_flows = r.at("normal-flows").get<int>();
  spec.class_separation = r.at("separation").get<double>();
  spec.temporal_signal = r.at("temporal").get<bool>();
  spec.seed = r.at("seed").get<std::uint64_t>();
  spec.validate();

  const std::vector<LabeledFlow> flows = generate_flows(spec);
  const std::vector<PacketRecord> packets = flows_to_packets(flows);
  const std::string packets_out = r.at("packets-out").get<std::string>();
  const std::string labels_out = r.at("labels-out").get<std::string>();
  write_packet_csv(packets_out, packets);
  write_flow_labels_csv(labels_out, flows);
  write_sidecar(packets_out, "synth", r);
  std::cout << "wrote " << packets.size() << " packets to " << packets_out << " and "
            << flows.size() << " flow labels to " << labels_out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// extract

int run_extract(const ordered_json& r) {
  const std::string set = r.at("feature-set").get<std::string>();
  const std::string ae_path = r.at("ae-model").get<std::string>();
  if (set != "set1" && set != "set2" && set != "set3")
    throw UsageError("--feature-set must be set1, set2, or set3");
  if (set == "set3" && ae_path.empty())
    throw UsageError("extract: --feature-set set3 requires --ae-model");
  if (set != "set3" && !ae_path.empty())
    throw UsageError("extract: --ae-model conflicts with --feature-set " + set);

  std::vector<Flow> flows = load_flows(r);
  std::vector<std::string> labels;
  const std::string labels_path = r.at("labels").get<std::string>();
  std::vector<LabeledFlow> labeled;
  if (!labels_path.empty()) {
    labeled = attach_labels(std::move(flows), labels_path);
    flows.clear();
    for (const auto& lf : labeled) labels.push_back(std::to_string(lf.class_id));
  }
  const auto flow_at = [&](std::size_t i) -> const Flow& {
    return labels_path.empty() ? flows[i] : labeled[i].flow;
  };
  const std::size_t n = labels_path.empty() ? flows.size() : labeled.size();

  const std::string output = r.at("output").get<std::string>();
  if (set == "set1") {
    std::vector<StatFeatureVector> features;
    features.reserve(n);
    for (std::size_t i = 0; i < n; ++i) features.push_back(extract_stat_features(flow_at(i)));
    write_feature_csv(output, features, labels);
  } else {
    const auto& sel = selected_feature_indices();
    std::vector<std::vector<double>> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      rows.push_back(project_selected(extract_stat_features(flow_at(i)), sel));
    if (set == "set2") {
      write_selected_csv(output, rows, sel, labels);
    } else {
      const AutoencoderModel ae = load_autoencoder(ae_path);
      std::string text;
      const auto& names = stat_feature_names();
      for (std::size_t j = 0; j < sel.size(); ++j) {
        if (j) text += ',';
        text += names[sel[j]];
      }
      for (int k = 1; k <= kLatentDim; ++k) text += ",z" + std::to_string(k);
      if (!labels.empty()) text += ",Label";
      text += '\n';
      for (std::size_t i = 0; i < n; ++i) {
        const LatentVector z = encode(ae, build_flow_matrix(flow_at(i), ae.spec.B, ae.spec.V));
        const std::vector<double> row = combine_features(rows[i], z);
        for (std::size_t j = 0; j < row.size(); ++j) {
          if (j) text += ',';
          char buf[32];
          const auto res = std::to_chars(buf, buf + sizeof buf, row[j]);
          text.append(buf, res.ptr);
        }
        if (!labels.empty()) {
          text += ',';
          text += labels[i];
        }
        text += '\n';
      }
      write_file_text(output, text);
    }
  }
  write_sidecar(output, "extract", r);
  std::cout << "wrote " << n << " flows to " << output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// select

int run_select(const ordered_json& r) {
  const FeatureTable table = read_feature_csv(r.at("features").get<std::string>());
  const std::vector<StatFeatureVector> dataset = table_to_stat_features(table);

  std::vector<ImportanceReport> reports;
  for (const auto& path : split_paths(r.at("reports").get<std::string>())) {
    const json j = json::parse(read_file_text(path), nullptr, false);
    if (j.is_discarded()) throw FormatError(path + ": not valid JSON");
    reports.push_back(importance_report_from_json(j));
  }
  if (r.at("permutation").get<bool>()) {
    if (table.labels.empty())
      throw DataError("select: --permutation needs a labeled feature CSV");
    const std::string normal = r.at("normal-label").get<std::string>();
    const ImportedDataset imported = import_labeled_table(table, normal);
    std::map<std::string, int> slot;  // normal -> 0, anomalies -> 1..n
    for (const auto& [id, name] : imported.class_names) slot[name] = id;
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      x.push_back(table.rows[i]);
      const auto it = slot.find(table.labels[i]);
      y.push_back(it == slot.end() ? 0 : it->second);
    }
    std::vector<int> widths{kStatFeatureCount};
    for (int h : parse_int_list(r.at("fit-hidden").get<std::string>(), "fit-hidden"))
      widths.push_back(h);
    widths.push_back(static_cast<int>(imported.class_names.size()) + 1);
    const BackboneSpec spec{widths};
    FitOptions fit;
    fit.epochs = r.at("fit-epochs").get<int>();
    fit.learning_rate = r.at("fit-lr").get<double>();
    fit.seed = r.at("seed").get<std::uint64_t>();
    std::vector<LabeledSample> samples;
    for (std::size_t i = 0; i < x.size(); ++i) samples.push_back({x[i], y[i]});
    const ParamSet params = fit_backbone(spec, samples, fit);
    reports.push_back(permutation_importance(spec, params, x, y, r.at("seed").get<std::uint64_t>()));
  }
  if (reports.empty())
    throw UsageError("select: need --reports files or --permutation");

  SelectionConfig cfg;
  cfg.missing_threshold = r.at("missing-threshold").get<double>();
  cfg.entropy_bins = r.at("entropy-bins").get<int>();
  cfg.drop_fraction = r.at("drop-fraction").get<double>();
  const SelectionResult result = run_selection_pipeline(dataset, reports, cfg);

  const std::string output = r.at("output").get<std::string>();
  write_file_text(output, selection_result_to_json(result).dump(2) + "\n");
  write_sidecar(output, "select", r);
  std::cout << "kept " << result.kept_indices.size() << " of " << kStatFeatureCount
            << " features; wrote " << output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-ae / encode

int run_train_ae(const ordered_json& r) {
  const std::vector<Flow> flows = load_flows(r);
  if (flows.empty()) throw DataError("train-ae: no flows in the input");
  AutoencoderSpec spec;
  spec.B = r.at("max-len").get<int>();
  spec.encoder_widths = parse_int_list(r.at("enc-widths").get<std::string>(), "enc-widths");
  spec.decoder_widths = parse_int_list(r.at("dec-widths").get<std::string>(), "dec-widths");
  std::vector<FlowMatrix> matrices;
  matrices.reserve(flows.size());
  for (const auto& f : flows) matrices.push_back(build_flow_matrix(f, spec.B, spec.V));

  AeTrainOptions opt;
  opt.epochs = r.at("epochs").get<int>();
  opt.batch_size = r.at("batch-size").get<int>();
  opt.learning_rate = r.at("learning-rate").get<double>();
  opt.seed = r.at("seed").get<std::uint64_t>();
  const AeTrainResult result = train_autoencoder(matrices, spec, opt);

  const std::string output = r.at("output").get<std::string>();
  save_autoencoder(output, result.model);
  write_sidecar(output, "train-ae", r);
  std::cout << "trained on " << matrices.size() << " flows; loss "
            << result.loss_history.front() << " -> " << result.loss_history.back() << "; wrote "
            << output << "\n";
  return 0;
}

int run_encode(const ordered_json& r) {
  const AutoencoderModel model = load_autoencoder(r.at("model").get<std::string>());
  const std::vector<Flow> flows = load_flows(r);
  std::vector<LatentVector> latents;
  latents.reserve(flows.size());
  for (const auto& f : flows)
    latents.push_back(encode(model, build_flow_matrix(f, model.spec.B, model.spec.V)));
  const std::string output = r.at("output").get<std::string>();
  write_file_text(output, embedding_csv_text(latents));
  write_sidecar(output, "encode", r);
  std::cout << "encoded " << latents.size() << " flows to " << output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// meta-train

int run_meta_train(const ordered_json& r) {
  const FeatureTable table = read_feature_csv(r.at("features").get<std::string>());
  const std::string normal = r.at("normal-label").get<std::string>();
  const ImportedDataset imported = import_labeled_table(table, normal);

  const MetaTrainOptions opt = train_options(r);
  MetaModel model = train_meta_model(imported.dataset, opt);
  model.slot_names.clear();
  for (int c : model.space.train_classes) model.slot_names.push_back(imported.class_names.at(c));
  model.slot_names.push_back(normal);
  model.slot_names.push_back("novel");

  const std::string output = r.at("output").get<std::string>();
  save_meta_model(output, model);
  std::string log_path = r.at("log").get<std::string>();
  if (log_path.empty()) log_path = output + ".log.jsonl";
  write_file_text(log_path, episode_log_text(model.log));
  write_sidecar(output, "meta-train", r);
  std::cout << "meta-trained on " << model.space.k() << " classes";
  if (!model.log.empty()) std::cout << "; final mean val loss " << model.log.back().mean_val_loss;
  std::cout << "; wrote " << output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// adapt

int run_adapt(const ordered_json& r) {
  MetaModel model = load_meta_model(r.at("model").get<std::string>());
  if (model.slot_names.empty())
    throw DataError("adapt: the model file carries no class names; meta-train it with this CLI");
  const FeatureTable table = read_feature_csv(r.at("shots").get<std::string>());
  if (table.labels.empty()) throw DataError("adapt: the shots CSV has no label column");

  std::map<std::string, int> known;  // name -> slot for train classes and normal
  for (int s = 0; s <= model.space.k(); ++s) known[model.slot_names[s]] = s;
  std::set<std::string> novel_names;
  std::vector<LabeledSample> shots;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto it = known.find(table.labels[i]);
    if (it != known.end()) {
      shots.push_back({table.rows[i], it->second});
    } else {
      novel_names.insert(table.labels[i]);
      shots.push_back({table.rows[i], model.space.novel_label()});
    }
  }
  if (novel_names.size() > 1) {
    std::string list;
    for (const auto& n : novel_names) list += (list.empty() ? "'" : ", '") + n + "'";
    throw DataError("adapt: the novel slot holds one class, got " + list);
  }

  const int steps = r.at("steps").get<int>();
  if (steps < 0) throw UsageError("adapt: --steps must be >= 0");
  model.params.theta = adapt_model(model, shots, steps);
  if (!novel_names.empty()) model.slot_names[model.space.novel_label()] = *novel_names.begin();
  model.log.clear();

  const std::string output = r.at("output").get<std::string>();
  save_meta_model(output, model);
  write_sidecar(output, "adapt", r);
  std::cout << "adapted on " << shots.size() << " shots";
  if (!novel_names.empty()) std::cout << " (novel class '" << *novel_names.begin() << "')";
  std::cout << "; wrote " << output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// detect

int run_detect(const ordered_json& r) {
  const MetaModel model = load_meta_model(r.at("model").get<std::string>());
  const FeatureTable table = read_feature_csv(r.at("data").get<std::string>());
  if (!table.rows.empty() &&
      table.rows.front().size() != static_cast<std::size_t>(model.spec.input_dim()))
    throw DataError("detect: the CSV has " + std::to_string(table.rows.front().size()) +
                    " feature columns, the model wants " +
                    std::to_string(model.spec.input_dim()));

  const auto slot_name = [&](int s) {
    return model.slot_names.empty() ? "label" + std::to_string(s) : model.slot_names[s];
  };
  std::string text = "flow_id,label,name\n";
  std::vector<int> predicted;
  predicted.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const Classification c = classify_row(model, model.params.theta, table.rows[i]);
    predicted.push_back(c.label);
    text += std::to_string(i) + "," + std::to_string(c.label) + "," + slot_name(c.label) + "\n";
  }
  const std::string output = r.at("output").get<std::string>();
  write_file_text(output, text);
  write_sidecar(output, "detect", r);

  if (!table.labels.empty() && !table.rows.empty()) {
    std::map<std::string, int> known;
    for (int s = 0; s < model.space.size(); ++s)
      if (!model.slot_names.empty()) known[model.slot_names[s]] = s;
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto it = known.find(table.labels[i]);
      const int truth = it == known.end() ? model.space.novel_label() : it->second;
      pairs.push_back({truth, predicted[i]});
    }
    const Metrics m = compute_metrics(pairs, model.space.size());
    ordered_json mj;
    mj["accuracy"] = m.accuracy;
    mj["macro_f1"] = m.macro_f1;
    std::cout << mj.dump() << "\n";
  }
  std::cout << "classified " << table.rows.size() << " flows; wrote " << output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

MshotConfig mshot_options(const ordered_json& r) {
  MshotConfig cfg;
  cfg.M = r.at("M").get<int>();
  cfg.repeats = r.at("repeats").get<int>();
  cfg.adapt_steps = r.at("adapt-steps").get<int>();
  cfg.from_scratch = r.at("from-scratch").get<bool>();
  cfg.scratch_fit.epochs = r.at("scratch-epochs").get<int>();
  cfg.scratch_fit.learning_rate = r.at("scratch-lr").get<double>();
  cfg.seed = r.at("seed").get<std::uint64_t>();
  return cfg;
}

void forbid(const ordered_json& r, const std::string& key, const std::string& protocol) {
  if (!r.at(key).get<std::string>().empty())
    throw UsageError("evaluate: --" + key + " conflicts with --protocol " + protocol);
}

int run_evaluate(const ordered_json& r) {
  const std::string protocol = r.at("protocol").get<std::string>();
  const std::string normal = r.at("normal-label").get<std::string>();
  ProtocolResult result;
  ordered_json extra;  // name maps recorded alongside the protocol config

  if (protocol == "mshot") {
    forbid(r, "train-data", protocol);
    forbid(r, "packets", protocol);
    OptionSet::require(r, "evaluate", {"model", "data"});
    const MetaModel model = load_meta_model(r.at("model").get<std::string>());
    const FeatureTable table = read_feature_csv(r.at("data").get<std::string>());
    const ImportedDataset imported = import_labeled_table(table, normal);
    if (!model.slot_names.empty())
      for (const auto& [id, name] : imported.class_names)
        for (int s = 0; s < model.space.k(); ++s)
          if (model.slot_names[s] == name)
            throw DataError("evaluate: class '" + name + "' was in the meta-training set");
    // Test ids may collide numerically with the model's training ids (they
    // come from a different corpus), so shift them past the training range.
    const int offset = model.space.train_classes.empty() ? 0 : model.space.train_classes.back();
    EpisodeDataset test;
    test.normal = imported.dataset.normal;
    for (const auto& [id, rows] : imported.dataset.anomalies) test.anomalies[id + offset] = rows;
    for (const auto& [id, name] : imported.class_names)
      extra["novel_class_names"][std::to_string(id + offset)] = name;
    result = run_mshot(model, test, mshot_options(r));
  } else if (protocol == "standard") {
    forbid(r, "model", protocol);
    forbid(r, "train-data", protocol);
    forbid(r, "packets", protocol);
    OptionSet::require(r, "evaluate", {"data"});
    const FeatureTable table = read_feature_csv(r.at("data").get<std::string>());
    const ImportedDataset imported = import_labeled_table(table, normal);
    StandardConfig cfg;
    cfg.folds = r.at("folds").get<int>();
    cfg.train = train_options(r);
    cfg.adapt_steps = r.at("adapt-steps").get<int>();
    cfg.seed = r.at("seed").get<std::uint64_t>();
    for (const auto& [id, name] : imported.class_names)
      extra["class_names"][std::to_string(id)] = name;
    result = run_standard(imported.dataset, cfg);
  } else if (protocol == "crossdataset") {
    forbid(r, "model", protocol);
    forbid(r, "packets", protocol);
    OptionSet::require(r, "evaluate", {"train-data", "data"});
    const ImportedDataset a =
        import_labeled_table(read_feature_csv(r.at("train-data").get<std::string>()), normal);
    const ImportedDataset b =
        import_labeled_table(read_feature_csv(r.at("data").get<std::string>()), normal);
    CrossDatasetConfig cfg;
    cfg.train = train_options(r);
    cfg.mshot = mshot_options(r);
    for (const auto& [id, name] : a.class_names)
      extra["train_class_names"][std::to_string(id)] = name;
    for (const auto& [id, name] : b.class_names)
      extra["novel_class_names"][std::to_string(id)] = name;
    result = run_crossdataset(a.dataset, b.dataset, cfg);
  } else if (protocol == "ablation") {
    forbid(r, "model", protocol);
    forbid(r, "train-data", protocol);
    forbid(r, "data", protocol);
    OptionSet::require(r, "evaluate", {"packets", "flow-labels"});
    ordered_json rr = r;
    rr["input"] = r.at("packets");
    std::vector<Flow> flows = load_flows(rr);
    const TaskFamily family =
        task_family_from_flows(attach_labels(std::move(flows), r.at("flow-labels").get<std::string>()));
    AblationConfig cfg;
    cfg.train = train_options(r);
    cfg.mshot = mshot_options(r);
    cfg.ae.epochs = r.at("ae-epochs").get<int>();
    cfg.ae.batch_size = r.at("ae-batch").get<int>();
    cfg.ae.learning_rate = r.at("ae-lr").get<double>();
    cfg.ae.seed = r.at("seed").get<std::uint64_t>();
    cfg.ae_hidden_enc = parse_int_list(r.at("enc-widths").get<std::string>(), "enc-widths");
    cfg.ae_hidden_dec = parse_int_list(r.at("dec-widths").get<std::string>(), "dec-widths");
    cfg.max_len = r.at("max-len").get<int>();
    cfg.normal_train_fraction = r.at("normal-train-fraction").get<double>();
    result = run_ablation(family, cfg);
  } else {
    throw UsageError("--protocol must be mshot, standard, crossdataset, or ablation");
  }

  for (const auto& [k, v] : extra.items()) result.config[k] = v;
  const std::string output = r.at("output").get<std::string>();
  write_file_text(output, protocol_result_to_json(result).dump(2) + "\n");
  write_sidecar(output, "evaluate", r);
  for (const auto& arm : result.arms) std::cout << arm_summary(arm) << "\n";
  std::cout << "wrote " << output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

void add_capture_options(OptionSet& o) {
  o.text("format", "auto", "input format: auto, pcap, or packet-csv");
  o.number("idle-timeout", 60.0, "flow idle timeout, seconds");
  o.number("active-timeout", 120.0, "flow active timeout, seconds");
}

int run(int argc, char** argv) {
  CLI::App app{"meta-uad: flow features, LSTM embeddings, and Meta-SGD few-shot anomaly detection"};
  app.require_subcommand(1);
  std::vector<std::pair<std::string, std::function<int(const ordered_json&)>>> runners;
  std::map<std::string, std::unique_ptr<OptionSet>> sets;

  const auto make = [&](const std::string& name, const std::string& help,
                        std::function<int(const ordered_json&)> fn) -> OptionSet& {
    CLI::App* cmd = app.add_subcommand(name, help);
    auto set = std::make_unique<OptionSet>(cmd);
    OptionSet& ref = *set;
    sets[name] = std::move(set);
    runners.push_back({name, std::move(fn)});
    return ref;
  };

  {
    OptionSet& o = make("synth", "generate a synthetic labeled packet trace", run_synth);
    o.integer("classes", 8, "class count including normal class 0");
    o.integer("flows-per-class", 100, "flows per anomaly class");
    o.integer("normal-flows", 0, "normal pool size (0: same as flows-per-class)");
    o.number("separation", 1.0, "distance between class-conditional means");
    o.flag("temporal", "classes differ only in packet ordering");
    o.seed("seed", 0, "generator seed");
    o.text("packets-out", "packets.csv", "packet-csv output path");
    o.text("labels-out", "labels.csv", "flow-labels output path");
    o.threads();
  }
  {
    OptionSet& o = make("extract", "assemble flows and write a feature CSV", run_extract);
    o.text("input", "", "capture file (pcap or packet-csv) [required]");
    add_capture_options(o);
    o.text("labels", "", "flow-labels CSV to join (adds the Label column)");
    o.text("feature-set", "set1", "set1 (81), set2 (33 selected), set3 (33 + embedding)");
    o.text("ae-model", "", "autoencoder model file (set3 only)");
    o.text("output", "features.csv", "feature CSV output path");
    o.threads();
  }
  {
    OptionSet& o = make("select", "run the feature-selection pipeline", run_select);
    o.text("features", "", "labeled 81-column feature CSV [required]");
    o.text("reports", "", "comma-separated importance report JSON files");
    o.flag("permutation", "add the built-in permutation-importance report");
    o.text("fit-hidden", "64,32", "hidden widths of the permutation classifier");
    o.integer("fit-epochs", 100, "permutation classifier training epochs");
    o.number("fit-lr", 0.01, "permutation classifier learning rate");
    o.text("normal-label", "BENIGN", "label of normal traffic");
    o.number("missing-threshold", 0.5, "drop features missing more often than this");
    o.integer("entropy-bins", 32, "histogram bins of the zero-entropy filter");
    o.number("drop-fraction", 0.30, "fraction of ranked survivors to drop");
    o.seed("seed", 0, "seed of the permutation provider");
    o.text("output", "selection.json", "selection result output path");
    o.threads();
  }
  {
    OptionSet& o = make("train-ae", "train the flow-matrix LSTM autoencoder", run_train_ae);
    o.text("input", "", "capture file with training flows [required]");
    add_capture_options(o);
    o.integer("max-len", 20, "flow matrix row count B");
    o.text("enc-widths", "256,128", "encoder LSTM widths");
    o.text("dec-widths", "128,256", "decoder LSTM widths");
    o.integer("epochs", 100, "training epochs");
    o.integer("batch-size", 16, "minibatch size");
    o.number("learning-rate", 0.005, "Adam learning rate");
    o.seed("seed", 1, "init and shuffle seed");
    o.text("output", "ae-model.json", "model output path");
    o.threads();
  }
  {
    OptionSet& o = make("encode", "embed flows with a trained autoencoder", run_encode);
    o.text("input", "", "capture file [required]");
    add_capture_options(o);
    o.text("model", "", "autoencoder model file [required]");
    o.text("output", "embeddings.csv", "embedding CSV output path");
    o.threads();
  }
  {
    OptionSet& o = make("meta-train", "meta-train the few-shot classifier", run_meta_train);
    o.text("features", "", "labeled feature CSV [required]");
    o.text("normal-label", "BENIGN", "label of normal traffic");
    o.integer("K", 5, "classes per episode");
    o.integer("M", 5, "support shots per task");
    o.integer("N", 5, "validation samples per task");
    o.number("beta", 0.001, "outer-loop learning rate");
    o.integer("inner-steps", 1, "inner-loop steps per task");
    o.integer("episodes", 100, "training episodes");
    o.text("mode", "exact", "meta-gradient mode: exact or first-order");
    o.text("hidden", "256,128,128", "backbone hidden widths");
    o.seed("seed", 0, "episode sampling and init seed");
    o.text("output", "meta-model.json", "model output path");
    o.text("log", "", "episode log path (default <output>.log.jsonl)");
    o.threads();
  }
  {
    OptionSet& o = make("adapt", "fine-tune a meta-model on a few shots", run_adapt);
    o.text("model", "", "meta-model file [required]");
    o.text("shots", "", "labeled few-shot CSV [required]");
    o.integer("steps", 10, "adaptation steps (0: keep theta)");
    o.text("output", "adapted-model.json", "adapted model output path");
    o.threads();
  }
  {
    OptionSet& o = make("detect", "classify a feature CSV with a model", run_detect);
    o.text("model", "", "meta-model or adapted model file [required]");
    o.text("data", "", "feature CSV to classify [required]");
    o.text("output", "predictions.csv", "predictions output path");
    o.threads();
  }
  {
    OptionSet& o = make("evaluate", "run an evaluation protocol", run_evaluate);
    o.text("protocol", "mshot", "mshot, standard, crossdataset, or ablation");
    o.text("model", "", "meta-model file (mshot)");
    o.text("data", "", "labeled feature CSV (mshot, standard, crossdataset test side)");
    o.text("train-data", "", "labeled feature CSV (crossdataset training side)");
    o.text("packets", "", "capture file (ablation)");
    o.text("flow-labels", "", "flow-labels CSV (ablation)");
    add_capture_options(o);
    o.text("normal-label", "BENIGN", "label of normal traffic");
    o.integer("M", 20, "few-shot size");
    o.integer("repeats", 100, "mshot repeats");
    o.integer("adapt-steps", 10, "adaptation steps at inference");
    o.flag("from-scratch", "add the train-on-shots-only baseline arm");
    o.integer("scratch-epochs", 100, "from-scratch baseline epochs");
    o.number("scratch-lr", 0.01, "from-scratch baseline learning rate");
    o.integer("folds", 10, "standard protocol folds");
    o.integer("K", 5, "classes per episode (protocols that meta-train)");
    o.integer("N", 20, "validation samples per task");
    o.number("beta", 0.001, "outer-loop learning rate");
    o.integer("inner-steps", 1, "inner-loop steps per task");
    o.integer("episodes", 100, "meta-training episodes");
    o.text("mode", "exact", "meta-gradient mode: exact or first-order");
    o.text("hidden", "256,128,128", "backbone hidden widths");
    o.integer("max-len", 20, "flow matrix row count B (ablation)");
    o.integer("ae-epochs", 100, "ablation autoencoder epochs");
    o.integer("ae-batch", 16, "ablation autoencoder batch size");
    o.number("ae-lr", 0.005, "ablation autoencoder learning rate");
    o.text("enc-widths", "64,32", "ablation encoder widths");
    o.text("dec-widths", "32,64", "ablation decoder widths");
    o.number("normal-train-fraction", 0.5, "ablation normal pool train share");
    o.seed("seed", 0, "protocol seed");
    o.text("output", "results.json", "results JSON output path");
    o.threads();
  }

  app.parse(argc, argv);
  for (const auto& [name, fn] : runners)
    if (app.get_subcommand(name)->parsed()) return fn(sets.at(name)->resolve(name));
  throw UsageError("no subcommand given");  // unreachable: require_subcommand(1)
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << e.what() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(uad::ExitCode::kUsage);
  } catch (const uad::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(uad::ExitCode::kData);
  }
}
