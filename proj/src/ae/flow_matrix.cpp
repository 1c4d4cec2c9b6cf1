// SPDX-License-Identifier: Apache-2.0
#include "uad/ae/flow_matrix.hpp"

#include <algorithm>

#include "uad/errors.hpp"
#include "uad/net/packet.hpp"

namespace uad {

FlowMatrix build_flow_matrix(const Flow& flow, int B, int V) {
  if (flow.packets.empty()) throw DataError("build_flow_matrix: flow has no packets");
  if (B < 1) throw UsageError("build_flow_matrix: B must be >= 1");
  if (V != kFlowMatrixWidth)
    throw UsageError("build_flow_matrix: row width is fixed at " +
                     std::to_string(kFlowMatrixWidth));

  FlowMatrix m;
  m.B = B;
  m.V = V;
  m.valid_rows = std::min<int>(B, static_cast<int>(flow.packets.size()));
  m.rows.assign(static_cast<std::size_t>(B) * static_cast<std::size_t>(V), 0.0);

  double ack = 0.0, psh = 0.0;
  for (int i = 0; i < m.valid_rows; ++i) {
    const FlowPacket& p = flow.packets[static_cast<std::size_t>(i)];
    ack += (p.rec.tcp_flags & tcpflag::kAck) ? 1.0 : 0.0;
    psh += (p.rec.tcp_flags & tcpflag::kPsh) ? 1.0 : 0.0;
    m.at(i, 0) = static_cast<double>(p.rec.header_len);
    m.at(i, 1) = static_cast<double>(p.rec.payload_len);
    m.at(i, 2) = i == 0 ? 0.0
                        : static_cast<double>(p.rec.timestamp_us -
                                              flow.packets[static_cast<std::size_t>(i - 1)].rec.timestamp_us) *
                              1e-6;
    m.at(i, 3) = static_cast<double>(p.rec.window_size);
    m.at(i, 4) = ack;
    m.at(i, 5) = psh;
    m.at(i, 6) = p.forward ? 1.0 : -1.0;
    m.at(i, 7) = (p.rec.tcp_flags & (tcpflag::kSyn | tcpflag::kFin)) ? 1.0 : 0.0;
  }
  return m;
}

}  // namespace uad
