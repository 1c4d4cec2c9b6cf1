// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uad/net/flow_table.hpp"

namespace uad {

// Deterministic synthetic traffic. Class 0 is "normal"; classes 1..n-1 are
// anomaly families whose lognormal size/gap parameters drift away from the
// baseline proportionally to class_separation. With temporal_signal set, all
// classes share the same marginal size distribution and differ only in the
// within-flow ordering of packet sizes.
struct SyntheticSpec {
  int n_classes = 8;  // includes class 0 (normal)
  int flows_per_class = 100;
  int normal_flows = 0;  // size of the class-0 pool; 0 means flows_per_class
  double class_separation = 1.0;
  bool temporal_signal = false;
  std::uint64_t seed = 0;

  int normal_count() const { return normal_flows > 0 ? normal_flows : flows_per_class; }
  void validate() const;
};

struct LabeledFlow {
  Flow flow;
  int class_id = 0;
};

std::vector<LabeledFlow> generate_flows(const SyntheticSpec& spec);

// Anomaly classes split 70/30 into meta-train and novel (floor, at least one
// novel); the normal pool is shared. Requires n_classes >= 4.
struct TaskFamily {
  std::vector<LabeledFlow> flows;
  std::vector<int> train_classes;
  std::vector<int> novel_classes;
};

TaskFamily generate_task_family(const SyntheticSpec& spec);

// Same 70/30 split rule over whatever anomaly class ids the flows carry
// (class 0 is the normal pool). Needs at least two anomaly classes.
TaskFamily task_family_from_flows(std::vector<LabeledFlow> flows);

// All packets of the given flows merged and sorted by timestamp, ready for
// write_packet_csv / ingest_packets round trips.
std::vector<PacketRecord> flows_to_packets(const std::vector<LabeledFlow>& flows);

// Flow labels keyed by canonical endpoints and start timestamp.
struct FlowLabel {
  FlowKey key;
  std::int64_t start_ts = 0;
  int class_id = 0;
};

inline constexpr const char* kFlowLabelsCsvHeader =
    "ip_a,port_a,ip_b,port_b,protocol,start_ts_us,class";

void write_flow_labels_csv(const std::string& path, const std::vector<LabeledFlow>& flows);
std::vector<FlowLabel> read_flow_labels_csv(const std::string& path);

}  // namespace uad
