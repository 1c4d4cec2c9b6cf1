// SPDX-License-Identifier: Apache-2.0
#include "uad/net/flow_table.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "uad/errors.hpp"
#include "uad/net/ingest.hpp"

namespace uad {

namespace {

struct OpenFlow {
  Flow flow;
  std::int64_t last_ts = 0;  // arrival order, drives the idle gap
  bool fin_fwd = false, fin_bwd = false, rst = false;

  bool terminated() const { return rst || (fin_fwd && fin_bwd); }
};

void finish(Flow& f) {
  std::stable_sort(f.packets.begin(), f.packets.end(),
                   [](const FlowPacket& a, const FlowPacket& b) { return a.rec.timestamp_us < b.rec.timestamp_us; });
  f.start_ts = f.packets.front().rec.timestamp_us;
  f.end_ts = f.packets.back().rec.timestamp_us;
}

}  // namespace

std::vector<Flow> assemble_flows(const std::vector<PacketRecord>& packets, const FlowAssemblyConfig& cfg) {
  if (!(cfg.idle_timeout_s > 0.0)) throw UsageError("idle timeout must be positive");
  if (!(cfg.active_timeout_s > cfg.idle_timeout_s)) throw UsageError("active timeout must exceed idle timeout");
  const auto idle_us = static_cast<std::int64_t>(std::llround(cfg.idle_timeout_s * 1e6));
  const auto active_us = static_cast<std::int64_t>(std::llround(cfg.active_timeout_s * 1e6));

  std::vector<Flow> done;
  std::map<FlowKey, OpenFlow> open;
  for (const auto& rec : packets) {
    const FlowKey key = FlowKey::from_packet(rec);
    auto it = open.find(key);
    if (it != open.end()) {
      OpenFlow& of = it->second;
      const bool expire = of.terminated() || rec.timestamp_us - of.last_ts > idle_us ||
                          rec.timestamp_us - of.flow.packets.front().rec.timestamp_us > active_us;
      if (expire) {
        finish(of.flow);
        done.push_back(std::move(of.flow));
        open.erase(it);
        it = open.end();
      }
    }
    if (it == open.end()) {
      OpenFlow of;
      of.flow.key = key;
      of.flow.initiator = Endpoint{rec.src_ip, rec.src_port};
      it = open.emplace(key, std::move(of)).first;
    }
    OpenFlow& of = it->second;
    const bool forward = Endpoint{rec.src_ip, rec.src_port} == of.flow.initiator;
    of.flow.packets.push_back(FlowPacket{rec, forward});
    of.last_ts = rec.timestamp_us;
    if (rec.is_tcp()) {
      if (rec.tcp_flags & tcpflag::kRst) of.rst = true;
      if (rec.tcp_flags & tcpflag::kFin) (forward ? of.fin_fwd : of.fin_bwd) = true;
    }
  }
  for (auto& [key, of] : open) {
    finish(of.flow);
    done.push_back(std::move(of.flow));
  }
  std::stable_sort(done.begin(), done.end(), [](const Flow& a, const Flow& b) { return a.start_ts < b.start_ts; });
  return done;
}

std::string flow_to_json(const Flow& f) {
  nlohmann::ordered_json j;
  j["key"] = {{"ip_a", f.key.a.ip.to_string()},
              {"port_a", f.key.a.port},
              {"ip_b", f.key.b.ip.to_string()},
              {"port_b", f.key.b.port},
              {"protocol", f.key.protocol}};
  j["start_ts"] = f.start_ts;
  j["end_ts"] = f.end_ts;
  auto pkts = nlohmann::ordered_json::array();
  for (const auto& [rec, forward] : f.packets) {
    char flags[8];
    std::snprintf(flags, sizeof flags, "0x%02x", rec.tcp_flags);
    pkts.push_back({{"timestamp_us", rec.timestamp_us},
                    {"src_ip", rec.src_ip.to_string()},
                    {"src_port", rec.src_port},
                    {"dst_ip", rec.dst_ip.to_string()},
                    {"dst_port", rec.dst_port},
                    {"protocol", rec.protocol},
                    {"header_len", rec.header_len},
                    {"payload_len", rec.payload_len},
                    {"tcp_flags_hex", flags},
                    {"window_size", rec.window_size},
                    {"direction", forward ? "forward" : "backward"}});
  }
  j["packets"] = std::move(pkts);
  return j.dump();
}

void write_flows_jsonl(const std::string& path, const std::vector<Flow>& flows) {
  std::ostringstream ss;
  for (const auto& f : flows) ss << flow_to_json(f) << '\n';
  write_file_text(path, ss.str());
}

}  // namespace uad
