// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uad/errors.hpp"
#include "uad/features/stat_features.hpp"
#include "uad/net/flow_table.hpp"
#include "uad/rng.hpp"

using uad::Flow;
using uad::FlowPacket;
using uad::PacketRecord;
using uad::StatFeatureVector;

namespace {

struct PktSpec {
  std::int64_t ts_us;
  bool fwd;
  int hdr;
  int pay;
  int flags;
};

Flow make_flow(const std::vector<PktSpec>& specs) {
  Flow flow;
  flow.key.a.ip = uad::IpAddress::v4_from(0x0a000001);
  flow.key.a.port = 1000;
  flow.key.b.ip = uad::IpAddress::v4_from(0x0a000002);
  flow.key.b.port = 2000;
  flow.key.protocol = uad::proto::kTcp;
  flow.initiator = flow.key.a;
  for (const PktSpec& s : specs) {
    PacketRecord rec;
    rec.timestamp_us = s.ts_us;
    rec.src_ip = s.fwd ? flow.key.a.ip : flow.key.b.ip;
    rec.src_port = s.fwd ? flow.key.a.port : flow.key.b.port;
    rec.dst_ip = s.fwd ? flow.key.b.ip : flow.key.a.ip;
    rec.dst_port = s.fwd ? flow.key.b.port : flow.key.a.port;
    rec.protocol = uad::proto::kTcp;
    rec.header_len = static_cast<std::uint32_t>(s.hdr);
    rec.payload_len = static_cast<std::uint32_t>(s.pay);
    rec.tcp_flags = static_cast<std::uint8_t>(s.flags);
    rec.window_size = 1024;
    flow.packets.push_back(FlowPacket{rec, s.fwd});
  }
  flow.start_ts = specs.front().ts_us;
  flow.end_ts = specs.back().ts_us;
  return flow;
}

constexpr int kFin = uad::tcpflag::kFin, kSyn = uad::tcpflag::kSyn,
              kPsh = uad::tcpflag::kPsh, kAck = uad::tcpflag::kAck,
              kUrg = uad::tcpflag::kUrg, kEce = uad::tcpflag::kEce,
              kCwr = uad::tcpflag::kCwr;

// Must match tests/oracles/stat_features_oracle.py exactly.
std::vector<std::pair<std::string, std::vector<PktSpec>>> oracle_flows() {
  return {
      {"single_packet", {{0, true, 40, 100, kSyn}}},
      {"zero_duration",
       {{5000000, true, 40, 50, kAck}, {5000000, false, 32, 10, kAck | kPsh}}},
      {"four_packet",
       {{0, true, 40, 100, kAck},
        {1000000, false, 40, 300, kAck},
        {2500000, true, 32, 200, kPsh | kAck},
        {4000000, false, 32, 0, kFin | kAck}}},
      {"fwd_iat",
       {{0, true, 40, 10, kAck},
        {2000000, true, 40, 20, kAck},
        {6000000, true, 40, 30, kAck}}},
      {"flag_zoo",
       {{0, true, 40, 0, kSyn},
        {100000, false, 40, 0, kSyn | kAck | kEce},
        {250000, true, 32, 500, kAck | kPsh | kUrg},
        {400000, false, 32, 1460, kAck | kPsh},
        {650000, true, 32, 120, kAck | kCwr},
        {900000, false, 32, 0, kFin | kAck | kUrg}}},
  };
}

nlohmann::json load_oracle() {
  std::ifstream in(std::string(UAD_TEST_DATA_DIR) + "/stat_oracle.json");
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

Flow random_flow(uad::Rng& rng) {
  const int n = static_cast<int>(rng.uniform_int(1, 30));
  std::vector<PktSpec> specs;
  std::int64_t ts = 1700000000000000;
  for (int i = 0; i < n; ++i) {
    ts += rng.uniform_int(0, 2000000);
    PktSpec s;
    s.ts_us = ts;
    s.fwd = i == 0 ? true : rng.uniform01() < 0.6;
    s.hdr = static_cast<int>(rng.uniform_int(20, 60));
    s.pay = rng.uniform01() < 0.3 ? 0 : static_cast<int>(rng.uniform_int(1, 1460));
    s.flags = static_cast<int>(rng.uniform_int(0, 255));
    specs.push_back(s);
  }
  return make_flow(specs);
}

void check_invariants(const StatFeatureVector& v) {
  // Stat groups are laid out as Total, Min, Max, Mean, Std.
  const int group_starts[] = {5, 10, 15, 21, 26, 31, 37, 42, 47, 53, 58, 63};
  for (int g : group_starts) {
    for (int k = 1; k < 5; ++k) CHECK(v.missing[g + k] == v.missing[g]);
    if (v.missing[g]) continue;
    const double total = v.values[g], mn = v.values[g + 1], mx = v.values[g + 2],
                 mean = v.values[g + 3], sd = v.values[g + 4];
    CHECK(mn <= mean + 1e-9);
    CHECK(mean <= mx + 1e-9);
    CHECK(sd >= 0.0);
    CHECK(total >= mn - 1e-9);
  }
  // Directional totals add up to the flow totals.
  for (int g : {5, 21, 37}) {
    const double fwd = v.values[g];
    const double bwd = v.missing[g + 5] ? 0.0 : v.values[g + 5];
    CHECK(fwd + bwd == doctest::Approx(v.values[g + 10]).epsilon(1e-12));
  }
  // Ratio features match Bwd Total / Fwd Total whenever defined.
  const int ratio_groups[][3] = {{5, 10, 20}, {21, 26, 36}, {37, 42, 52}, {53, 58, 68}};
  for (const auto& rg : ratio_groups) {
    const bool fwd_def = !v.missing[rg[0]] && v.values[rg[0]] != 0.0;
    CHECK(v.missing[rg[2]] == !fwd_def);
    if (!fwd_def) continue;
    const double bwd = v.missing[rg[1]] ? 0.0 : v.values[rg[1]];
    CHECK(v.values[rg[2]] == doctest::Approx(bwd / v.values[rg[0]]).epsilon(1e-12));
  }
  // Flag counts are integral, non-negative, bounded by the packet count.
  const double n = v.values[15];
  for (int i = 69; i < 81; ++i) {
    if (v.missing[i]) continue;
    CHECK(v.values[i] >= 0.0);
    CHECK(v.values[i] <= n);
    CHECK(v.values[i] == std::floor(v.values[i]));
  }
  if (!v.missing[71]) {
    CHECK(v.values[69] + v.values[71] == doctest::Approx(v.values[76]));
    CHECK(v.values[70] + v.values[72] == doctest::Approx(v.values[78]));
  }
}

}  // namespace

TEST_CASE("hand-built flows match the frozen oracle") {
  const nlohmann::json oracle = load_oracle();
  for (const auto& [name, specs] : oracle_flows()) {
    CAPTURE(name);
    REQUIRE(oracle.contains(name));
    const StatFeatureVector got = uad::extract_stat_features(make_flow(specs));
    const auto& values = oracle[name]["values"];
    const auto& missing = oracle[name]["missing"];
    REQUIRE(values.size() == uad::kStatFeatureCount);
    for (std::size_t i = 0; i < uad::kStatFeatureCount; ++i) {
      CAPTURE(i);
      CHECK(got.missing[i] == missing[i].get<bool>());
      if (!got.missing[i]) {
        CHECK(got.values[i] ==
              doctest::Approx(values[i].get<double>()).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("worked examples hold exactly") {
  const auto flows = oracle_flows();
  const StatFeatureVector four = uad::extract_stat_features(make_flow(flows[2].second));
  CHECK(four.values[40] == 150.0);  // Fwd packet Length Mean
  CHECK(four.values[52] == 1.0);    // Bwd/Fwd packet total length ratio

  const StatFeatureVector fiat = uad::extract_stat_features(make_flow(flows[3].second));
  CHECK(fiat.values[53] == 6.0);
  CHECK(fiat.values[54] == 2.0);
  CHECK(fiat.values[55] == 4.0);
  CHECK(fiat.values[56] == 3.0);
  CHECK(fiat.values[57] == 1.0);
  // No backward packets: every backward-derived feature is masked.
  for (int i : {10, 11, 12, 13, 14, 26, 27, 28, 29, 30, 42, 43, 44, 45, 46,
                58, 59, 60, 61, 62, 71, 72}) {
    CHECK(fiat.missing[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("masking semantics on degenerate flows") {
  const auto flows = oracle_flows();
  const StatFeatureVector one = uad::extract_stat_features(make_flow(flows[0].second));
  CHECK(one.values[0] == 0.0);
  for (int i = 1; i <= 4; ++i) CHECK(one.missing[static_cast<std::size_t>(i)]);
  CHECK(one.values[5] == 1.0);   // Fwd packet count Total
  CHECK(one.values[74] == 1.0);  // SYN count

  const StatFeatureVector zd = uad::extract_stat_features(make_flow(flows[1].second));
  CHECK(zd.values[0] == 0.0);
  for (int i = 1; i <= 4; ++i) CHECK(zd.missing[static_cast<std::size_t>(i)]);
  CHECK_FALSE(zd.missing[63]);  // one flow-level IAT sample of 0 s
  CHECK(zd.values[63] == 0.0);

  CHECK_THROWS_AS(uad::extract_stat_features(Flow{}), uad::DataError);
}

TEST_CASE("invariants hold over randomized flows") {
  uad::Rng rng(20260814);
  for (int t = 0; t < 200; ++t) {
    CAPTURE(t);
    check_invariants(uad::extract_stat_features(random_flow(rng)));
  }
}

TEST_CASE("feature names are canonical and distinct") {
  const auto names = uad::stat_feature_names();
  REQUIRE(names.size() == uad::kStatFeatureCount);
  for (std::size_t i = 0; i < names.size(); ++i) {
    CHECK_FALSE(names[i].empty());
    for (std::size_t j = i + 1; j < names.size(); ++j) CHECK(names[i] != names[j]);
  }
  CHECK(names[0] == "Flow duration");
  CHECK(names[40] == "Fwd packet Length: Mean");
  CHECK(names[77] == "Flow flag count: ACK");
}

TEST_CASE("canonical selection is well-formed") {
  const auto sel = uad::selected_feature_indices();
  REQUIRE(sel.size() == uad::kSelectedFeatureCount);
  for (std::size_t i = 0; i < sel.size(); ++i) {
    CHECK(sel[i] >= 0);
    CHECK(sel[i] < static_cast<int>(uad::kStatFeatureCount));
    if (i > 0) CHECK(sel[i] > sel[i - 1]);
  }
  CHECK(sel.front() == 10);
  CHECK(sel.back() == 77);
}

TEST_CASE("project_selected zeroes masked sources and validates input") {
  const auto flows = oracle_flows();
  const StatFeatureVector fiat = uad::extract_stat_features(make_flow(flows[3].second));
  const auto sel = uad::selected_feature_indices();
  const std::vector<double> proj = uad::project_selected(fiat, sel);
  REQUIRE(proj.size() == sel.size());
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const std::size_t src = static_cast<std::size_t>(sel[i]);
    CHECK(proj[i] == (fiat.missing[src] ? 0.0 : fiat.values[src]));
  }
  CHECK(proj[0] == 0.0);  // Bwd packet count Total is masked here

  std::vector<int> bad = sel;
  bad[0] = 81;
  CHECK_THROWS_AS(uad::project_selected(fiat, bad), uad::UsageError);
  bad = sel;
  bad.pop_back();
  CHECK_THROWS_AS(uad::project_selected(fiat, bad), uad::UsageError);
}
