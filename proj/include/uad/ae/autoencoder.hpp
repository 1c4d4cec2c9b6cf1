// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "uad/ae/flow_matrix.hpp"
#include "uad/nn/lstm.hpp"
#include "uad/nn/params.hpp"
#include "uad/rng.hpp"

namespace uad {

inline constexpr int kLatentDim = 5;

struct LatentVector {
  std::array<double, kLatentDim> z{};
};

// Encoder LSTM stack -> sigmoid projection to z; decoder receives the latent
// repeated B times and reconstructs the B x V input through a linear head.
struct AutoencoderSpec {
  int B = 20;
  int V = kFlowMatrixWidth;
  int z = kLatentDim;
  std::vector<int> encoder_widths{256, 128};
  std::vector<int> decoder_widths{128, 256};
};

// Per-column min-max constants fitted on the valid rows of a training set.
// Columns with zero range map to 0 so that padding rows stay all-zero.
struct ColumnScaler {
  std::vector<double> min, max;  // V entries each
};

ColumnScaler fit_scaler(const std::vector<FlowMatrix>& dataset);
FlowMatrix apply_scaler(const ColumnScaler& scaler, const FlowMatrix& m);

struct AutoencoderModel {
  AutoencoderSpec spec;
  ParamSet params;
  ColumnScaler scaler;
};

ParamSet init_autoencoder(const AutoencoderSpec& spec, Rng& rng);

struct AeTrainOptions {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 0.005;
  std::uint64_t seed = 1;
};

struct AeTrainResult {
  AutoencoderModel model;
  std::vector<double> loss_history;  // per-epoch mean reconstruction loss
};

// Minimizes sum of squared reconstruction errors over the dataset divided by
// F * B * V (F = flow count). Deterministic given the seed.
AeTrainResult train_autoencoder(const std::vector<FlowMatrix>& dataset, const AutoencoderSpec& spec,
                                const AeTrainOptions& options);

// Mean reconstruction loss of the whole dataset under fixed parameters.
double autoencoder_loss(const AutoencoderModel& model, const std::vector<FlowMatrix>& dataset);

LatentVector encode(const AutoencoderModel& model, const FlowMatrix& m);

// 33 selected statistics followed by the 5 latent entries.
std::vector<double> combine_features(const std::vector<double>& selected, const LatentVector& z);

}  // namespace uad
