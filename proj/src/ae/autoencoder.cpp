// SPDX-License-Identifier: Apache-2.0
#include "uad/ae/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "uad/errors.hpp"
#include "uad/features/stat_features.hpp"
#include "uad/nn/adam.hpp"

namespace uad {

namespace {

void check_dataset(const std::vector<FlowMatrix>& dataset, const AutoencoderSpec& spec,
                   const char* op) {
  if (dataset.empty()) throw DataError(std::string(op) + ": dataset is empty");
  for (const FlowMatrix& m : dataset) {
    if (m.B != spec.B || m.V != spec.V)
      throw DataError(std::string(op) + ": matrix shape " + std::to_string(m.B) + "x" +
                      std::to_string(m.V) + " does not match model " + std::to_string(spec.B) +
                      "x" + std::to_string(spec.V));
    if (m.rows.size() != static_cast<std::size_t>(m.B) * static_cast<std::size_t>(m.V))
      throw DataError(std::string(op) + ": matrix storage size mismatch");
  }
}

LstmStackSpec encoder_stack(const AutoencoderSpec& spec) { return {spec.V, spec.encoder_widths}; }
LstmStackSpec decoder_stack(const AutoencoderSpec& spec) { return {spec.z, spec.decoder_widths}; }

// Parameter order fixed by init_autoencoder: encoder LSTM triples, encoder
// projection W/b, decoder LSTM triples, decoder output W/b.
struct PidMap {
  int enc_base = 0;
  int proj_w = 0, proj_b = 0;
  int dec_base = 0;
  int out_w = 0, out_b = 0;
};

PidMap pid_map(const AutoencoderSpec& spec) {
  PidMap ids;
  ids.enc_base = 0;
  ids.proj_w = 3 * static_cast<int>(spec.encoder_widths.size());
  ids.proj_b = ids.proj_w + 1;
  ids.dec_base = ids.proj_b + 1;
  ids.out_w = ids.dec_base + 3 * static_cast<int>(spec.decoder_widths.size());
  ids.out_b = ids.out_w + 1;
  return ids;
}

// Builds the reconstruction loss for a batch of already-normalized matrices:
// sum of squared errors scaled by 1 / (F * B * V).
int build_loss(Graph& g, const std::vector<int>& pids, const AutoencoderSpec& spec,
               const std::vector<const FlowMatrix*>& batch) {
  const int f = static_cast<int>(batch.size());
  const PidMap ids = pid_map(spec);

  std::vector<int> steps;  // input node per time step, [F, V]
  steps.reserve(static_cast<std::size_t>(spec.B));
  for (int t = 0; t < spec.B; ++t) {
    Tensor xt = Tensor::zeros({f, spec.V});
    for (int i = 0; i < f; ++i)
      for (int j = 0; j < spec.V; ++j) xt.data[static_cast<std::size_t>(i * spec.V + j)] = batch[static_cast<std::size_t>(i)]->at(t, j);
    steps.push_back(g.input(std::move(xt)));
  }

  const LstmStackSpec enc = encoder_stack(spec);
  auto est = lstm_initial_state<double>(enc);
  int top = -1;
  for (int t = 0; t < spec.B; ++t) top = lstm_step(g, enc, pids, ids.enc_base, steps[static_cast<std::size_t>(t)], est);
  const int latent = g.sigmoid(g.add_rowvec(g.matmul(top, pids[ids.proj_w]), pids[ids.proj_b]));

  const LstmStackSpec dec = decoder_stack(spec);
  auto dst = lstm_initial_state<double>(dec);
  int loss = -1;
  for (int t = 0; t < spec.B; ++t) {
    const int h = lstm_step(g, dec, pids, ids.dec_base, latent, dst);
    const int recon = g.add_rowvec(g.matmul(h, pids[ids.out_w]), pids[ids.out_b]);
    const int err = g.sum_sq(g.sub(recon, steps[static_cast<std::size_t>(t)]));
    loss = loss < 0 ? err : g.add(loss, err);
  }
  return g.scale(loss, 1.0 / (static_cast<double>(f) * spec.B * spec.V));
}

}  // namespace

ColumnScaler fit_scaler(const std::vector<FlowMatrix>& dataset) {
  if (dataset.empty()) throw DataError("fit_scaler: dataset is empty");
  const int v = dataset.front().V;
  ColumnScaler s;
  s.min.assign(static_cast<std::size_t>(v), std::numeric_limits<double>::infinity());
  s.max.assign(static_cast<std::size_t>(v), -std::numeric_limits<double>::infinity());
  bool any = false;
  for (const FlowMatrix& m : dataset) {
    if (m.V != v) throw DataError("fit_scaler: inconsistent matrix widths");
    for (int i = 0; i < m.valid_rows; ++i) {
      any = true;
      for (int j = 0; j < v; ++j) {
        s.min[static_cast<std::size_t>(j)] = std::min(s.min[static_cast<std::size_t>(j)], m.at(i, j));
        s.max[static_cast<std::size_t>(j)] = std::max(s.max[static_cast<std::size_t>(j)], m.at(i, j));
      }
    }
  }
  if (!any) {
    s.min.assign(static_cast<std::size_t>(v), 0.0);
    s.max.assign(static_cast<std::size_t>(v), 0.0);
  }
  return s;
}

FlowMatrix apply_scaler(const ColumnScaler& scaler, const FlowMatrix& m) {
  if (scaler.min.size() != static_cast<std::size_t>(m.V) || scaler.max.size() != scaler.min.size())
    throw DataError("apply_scaler: scaler width does not match matrix");
  FlowMatrix out = m;
  for (int i = 0; i < m.valid_rows; ++i) {
    for (int j = 0; j < m.V; ++j) {
      const double lo = scaler.min[static_cast<std::size_t>(j)];
      const double range = scaler.max[static_cast<std::size_t>(j)] - lo;
      out.at(i, j) = range > 0.0 ? (m.at(i, j) - lo) / range : 0.0;
    }
  }
  return out;
}

ParamSet init_autoencoder(const AutoencoderSpec& spec, Rng& rng) {
  if (spec.B < 1 || spec.V < 1 || spec.z < 1 || spec.encoder_widths.empty() ||
      spec.decoder_widths.empty())
    throw UsageError("init_autoencoder: invalid spec");
  ParamSet p;
  add_lstm_params(p, encoder_stack(spec), "enc.", rng);
  const int enc_top = spec.encoder_widths.back();
  p.add("enc.proj.W", glorot_uniform(enc_top, spec.z, {enc_top, spec.z}, rng));
  p.add("enc.proj.b", Tensor::zeros({spec.z}));
  add_lstm_params(p, decoder_stack(spec), "dec.", rng);
  const int dec_top = spec.decoder_widths.back();
  p.add("dec.out.W", glorot_uniform(dec_top, spec.V, {dec_top, spec.V}, rng));
  p.add("dec.out.b", Tensor::zeros({spec.V}));
  return p;
}

AeTrainResult train_autoencoder(const std::vector<FlowMatrix>& dataset, const AutoencoderSpec& spec,
                                const AeTrainOptions& options) {
  check_dataset(dataset, spec, "train_autoencoder");
  if (options.epochs < 1) throw UsageError("train_autoencoder: epochs must be >= 1");
  if (options.batch_size < 1) throw UsageError("train_autoencoder: batch_size must be >= 1");
  if (!(options.learning_rate > 0.0))
    throw UsageError("train_autoencoder: learning_rate must be positive");

  Rng rng(options.seed);
  AeTrainResult result;
  result.model.spec = spec;
  result.model.scaler = fit_scaler(dataset);
  result.model.params = init_autoencoder(spec, rng);

  std::vector<FlowMatrix> normalized;
  normalized.reserve(dataset.size());
  for (const FlowMatrix& m : dataset) normalized.push_back(apply_scaler(result.model.scaler, m));

  std::vector<double> theta = result.model.params.flatten();
  Adam adam;
  adam.lr = options.learning_rate;

  std::vector<std::size_t> order(normalized.size());
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffler = rng.derive("epoch", static_cast<std::uint64_t>(epoch));
    shuffler.shuffle(order);

    double epoch_sse = 0.0;  // accumulated f*B*V-weighted batch losses
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      std::vector<const FlowMatrix*> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(&normalized[order[k]]);

      result.model.params.unflatten(theta);
      Graph g;
      const auto pids = graph_params(g, result.model.params);
      const int loss = build_loss(g, pids, spec, batch);
      const double loss_value = g.value(loss).data[0];
      if (!std::isfinite(loss_value))
        throw NumericError("train_autoencoder: non-finite loss at epoch " + std::to_string(epoch));
      g.backward(loss);

      std::vector<double> flat_grad;
      flat_grad.reserve(theta.size());
      for (std::size_t i = 0; i < pids.size(); ++i) {
        const Tensor& gt = g.grad(pids[i]);
        flat_grad.insert(flat_grad.end(), gt.data.begin(), gt.data.end());
      }
      for (double v : flat_grad)
        if (!std::isfinite(v))
          throw NumericError("train_autoencoder: non-finite gradient at epoch " + std::to_string(epoch));
      adam.step(theta, flat_grad);
      epoch_sse += loss_value * static_cast<double>(batch.size());
    }
    result.loss_history.push_back(epoch_sse / static_cast<double>(normalized.size()));
  }
  result.model.params.unflatten(theta);
  return result;
}

double autoencoder_loss(const AutoencoderModel& model, const std::vector<FlowMatrix>& dataset) {
  check_dataset(dataset, model.spec, "autoencoder_loss");
  std::vector<FlowMatrix> normalized;
  normalized.reserve(dataset.size());
  std::vector<const FlowMatrix*> batch;
  for (const FlowMatrix& m : dataset) normalized.push_back(apply_scaler(model.scaler, m));
  for (const FlowMatrix& m : normalized) batch.push_back(&m);
  Graph g;
  ParamSet params = model.params;
  const auto pids = graph_params(g, params);
  return g.value(build_loss(g, pids, model.spec, batch)).data[0];
}

LatentVector encode(const AutoencoderModel& model, const FlowMatrix& m) {
  check_dataset({m}, model.spec, "encode");
  if (model.spec.z != kLatentDim) throw UsageError("encode: latent dim is fixed at 5");
  const FlowMatrix norm = apply_scaler(model.scaler, m);

  Graph g;
  ParamSet params = model.params;
  const auto pids = graph_params(g, params);
  const PidMap ids = pid_map(model.spec);
  const LstmStackSpec enc = encoder_stack(model.spec);
  auto st = lstm_initial_state<double>(enc);
  int top = -1;
  for (int t = 0; t < model.spec.B; ++t) {
    Tensor xt = Tensor::zeros({1, model.spec.V});
    for (int j = 0; j < model.spec.V; ++j) xt.data[static_cast<std::size_t>(j)] = norm.at(t, j);
    top = lstm_step(g, enc, pids, ids.enc_base, g.input(std::move(xt)), st);
  }
  const int latent = g.sigmoid(g.add_rowvec(g.matmul(top, pids[ids.proj_w]), pids[ids.proj_b]));
  const Tensor& zt = g.value(latent);

  LatentVector out;
  for (int k = 0; k < kLatentDim; ++k) out.z[static_cast<std::size_t>(k)] = zt.data[static_cast<std::size_t>(k)];
  return out;
}

std::vector<double> combine_features(const std::vector<double>& selected, const LatentVector& z) {
  if (selected.size() != kSelectedFeatureCount)
    throw DataError("combine_features: expected " + std::to_string(kSelectedFeatureCount) +
                    " selected statistics, got " + std::to_string(selected.size()));
  std::vector<double> out = selected;
  out.insert(out.end(), z.z.begin(), z.z.end());
  return out;
}

}  // namespace uad
