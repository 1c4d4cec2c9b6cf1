// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "uad/net/flow_table.hpp"

namespace uad {

// Packet-level feature matrix of one flow: B rows of V per-packet features,
// zero-padded past valid_rows.
struct FlowMatrix {
  int B = 20;
  int V = 8;
  int valid_rows = 0;
  std::vector<double> rows;  // B x V, row-major

  double at(int i, int j) const { return rows[static_cast<std::size_t>(i * V + j)]; }
  double& at(int i, int j) { return rows[static_cast<std::size_t>(i * V + j)]; }
};

inline constexpr int kFlowMatrixWidth = 8;

// Row layout: header_len, payload_len, gap to previous packet in seconds
// (0 for the first), window_size, cumulative ACK count, cumulative PSH
// count, direction (+1 forward / -1 backward), SYN-or-FIN indicator.
// Flows longer than B keep the first B packets; shorter flows are padded.
FlowMatrix build_flow_matrix(const Flow& flow, int B = 20, int V = kFlowMatrixWidth);

}  // namespace uad
