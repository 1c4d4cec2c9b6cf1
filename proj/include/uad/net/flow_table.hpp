// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "uad/net/packet.hpp"

namespace uad {

struct FlowAssemblyConfig {
  double idle_timeout_s = 60.0;    // gap since the flow's last packet
  double active_timeout_s = 120.0; // age since the flow's first packet
};

// Groups packets into bidirectional flows. A flow closes on idle timeout,
// active timeout, or completed FIN/RST exchange; the next packet with the
// same key opens a new flow. Output is sorted by start_ts.
std::vector<Flow> assemble_flows(const std::vector<PacketRecord>& packets, const FlowAssemblyConfig& cfg = {});

std::string flow_to_json(const Flow& f);
void write_flows_jsonl(const std::string& path, const std::vector<Flow>& flows);

}  // namespace uad
