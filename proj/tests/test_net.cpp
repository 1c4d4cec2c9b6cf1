// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "uad/errors.hpp"
#include "uad/net/flow_table.hpp"
#include "uad/net/ingest.hpp"

using namespace uad;

namespace {

const std::string kData = UAD_TEST_DATA_DIR;

PacketRecord make_packet(std::int64_t ts_us, const std::string& src, std::uint16_t sport, const std::string& dst,
                         std::uint16_t dport, std::uint8_t flags = tcpflag::kAck, std::uint32_t payload = 100) {
  PacketRecord r;
  r.timestamp_us = ts_us;
  r.src_ip = IpAddress::parse(src);
  r.dst_ip = IpAddress::parse(dst);
  r.src_port = sport;
  r.dst_port = dport;
  r.protocol = proto::kTcp;
  r.header_len = 40;
  r.payload_len = payload;
  r.tcp_flags = flags;
  r.window_size = 1024;
  return r;
}

}  // namespace

TEST_CASE("ip addresses canonicalize and round-trip") {
  const auto a = IpAddress::parse("10.0.0.1");
  CHECK(a.to_string() == "10.0.0.1");
  const auto b = IpAddress::parse("2001:db8::1");
  CHECK(b.to_string() == "2001:db8::1");
  CHECK(a < b);  // v4-mapped sorts below this v6 space
  CHECK_THROWS_AS((void)IpAddress::parse("10.0.0.256"), FormatError);
  CHECK_THROWS_AS((void)IpAddress::parse("bogus"), FormatError);
}

TEST_CASE("flow keys are direction-free") {
  const auto p1 = make_packet(0, "10.0.0.1", 1234, "10.0.0.2", 80);
  const auto p2 = make_packet(1, "10.0.0.2", 80, "10.0.0.1", 1234);
  CHECK(FlowKey::from_packet(p1) == FlowKey::from_packet(p2));
  const auto p3 = make_packet(2, "10.0.0.1", 1234, "10.0.0.2", 81);
  CHECK(FlowKey::from_packet(p1) != FlowKey::from_packet(p3));
}

// Expected values frozen from the fixture generator (fields written by an
// independent script via struct packing).
TEST_CASE("mini pcap dissects to the reference records") {
  const auto res = ingest_packets(kData + "/mini.pcap", CaptureFormat::kPcap);
  REQUIRE(res.packets.size() == 3);
  CHECK(res.skipped_frames == 1);  // the ARP frame

  const auto& p1 = res.packets[0];
  CHECK(p1.timestamp_us == 1700000000000100LL);
  CHECK(p1.src_ip.to_string() == "10.0.0.1");
  CHECK(p1.dst_ip.to_string() == "10.0.0.2");
  CHECK(p1.src_port == 1234);
  CHECK(p1.dst_port == 80);
  CHECK(p1.protocol == proto::kTcp);
  CHECK(p1.header_len == 40);
  CHECK(p1.payload_len == 0);
  CHECK(p1.tcp_flags == tcpflag::kSyn);
  CHECK(p1.window_size == 64240);

  const auto& p2 = res.packets[1];
  CHECK(p2.timestamp_us == 1700000000500350LL);
  CHECK(p2.src_port == 80);
  CHECK(p2.dst_port == 1234);
  CHECK(p2.header_len == 40);
  CHECK(p2.payload_len == 4);
  CHECK(p2.tcp_flags == (tcpflag::kSyn | tcpflag::kAck));
  CHECK(p2.window_size == 5000);

  const auto& p3 = res.packets[2];
  CHECK(p3.timestamp_us == 1700000001000250LL);
  CHECK(p3.protocol == proto::kUdp);
  CHECK(p3.src_port == 53000);
  CHECK(p3.dst_port == 53);
  CHECK(p3.header_len == 28);
  CHECK(p3.payload_len == 11);
  CHECK(p3.tcp_flags == 0);
  CHECK(p3.window_size == 0);
}

TEST_CASE("nanosecond pcap magic truncates to microseconds") {
  const auto res = ingest_packets(kData + "/mini_ns.pcap", CaptureFormat::kPcap);
  REQUIRE(res.packets.size() == 1);
  CHECK(res.packets[0].timestamp_us == 5000000LL);
}

TEST_CASE("pcap error paths") {
  CHECK_THROWS_AS((void)ingest_packets(kData + "/trunc.pcap", CaptureFormat::kPcap), FormatError);
  CHECK_THROWS_AS((void)ingest_packets(kData + "/nonexistent.pcap", CaptureFormat::kPcap), IoError);
  CHECK_THROWS_AS((void)parse_pcap({0xde, 0xad, 0xbe, 0xef, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
                                    0}),
                  FormatError);
}

TEST_CASE("packet-csv round-trips and validates") {
  const std::string csv =
      std::string(kPacketCsvHeader) +
      "\n"
      "1000,10.0.0.1,1234,10.0.0.2,80,tcp,40,100,0x18,512\n"
      "2000,10.0.0.2,80,10.0.0.1,1234,TCP,40,0,0x10,256\n"
      "3000,192.168.1.5,0,224.0.0.1,0,2,20,8,0x00,0\n";
  const auto res = parse_packet_csv(csv);
  REQUIRE(res.packets.size() == 3);
  CHECK(res.packets[0].tcp_flags == (tcpflag::kPsh | tcpflag::kAck));
  CHECK(res.packets[1].protocol == proto::kTcp);
  CHECK(res.packets[2].protocol == 2);
  CHECK(res.packets[2].src_port == 0);

  // Serialization reproduces parseable rows.
  const std::string row = packet_to_csv_row(res.packets[0]);
  const auto back = parse_packet_csv(std::string(kPacketCsvHeader) + "\n" + row + "\n");
  CHECK(back.packets[0].timestamp_us == 1000);
  CHECK(back.packets[0].window_size == 512);
}

TEST_CASE("packet-csv parse errors name the line") {
  const std::string head = std::string(kPacketCsvHeader) + "\n";
  const auto line_of = [](const std::exception& e) { return std::string(e.what()); };

  try {
    (void)parse_packet_csv(head + "1000,10.0.0.1,70000,10.0.0.2,80,tcp,40,100,0x18,512\n");
    FAIL("expected parse error");
  } catch (const FormatError& e) {
    CHECK(line_of(e).find("line 2") != std::string::npos);
    CHECK(line_of(e).find("src_port") != std::string::npos);
  }
  try {
    (void)parse_packet_csv(head + "1000,10.0.0.1,80,10.0.0.2,81,tcp,40,100,0x18,512\n" +
                           "oops,10.0.0.1,80,10.0.0.2,81,tcp,40,100,0x18,512\n");
    FAIL("expected parse error");
  } catch (const FormatError& e) {
    CHECK(line_of(e).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS((void)parse_packet_csv("not,the,header\n"), FormatError);
  CHECK_THROWS_AS((void)parse_packet_csv(""), FormatError);
  // Non-TCP with TCP-only fields set.
  CHECK_THROWS_AS((void)parse_packet_csv(head + "1,10.0.0.1,0,10.0.0.2,0,2,20,8,0x10,0\n"), FormatError);
  // Zero-length packet.
  CHECK_THROWS_AS((void)parse_packet_csv(head + "1,10.0.0.1,80,10.0.0.2,81,tcp,0,0,0x00,0\n"), FormatError);
}

TEST_CASE("two packets one second apart form one flow") {
  const std::vector<PacketRecord> pkts = {make_packet(0, "10.0.0.1", 1234, "10.0.0.2", 80),
                                          make_packet(1'000'000, "10.0.0.2", 80, "10.0.0.1", 1234)};
  const auto flows = assemble_flows(pkts);
  REQUIRE(flows.size() == 1);
  CHECK(flows[0].size() == 2);
  CHECK(flows[0].packets[0].forward);
  CHECK_FALSE(flows[0].packets[1].forward);  // reversed tuple joins as backward
  CHECK(flows[0].start_ts == 0);
  CHECK(flows[0].end_ts == 1'000'000);
}

TEST_CASE("idle timeout splits a conversation") {
  const std::vector<PacketRecord> pkts = {make_packet(0, "10.0.0.1", 1234, "10.0.0.2", 80),
                                          make_packet(120'000'000, "10.0.0.1", 1234, "10.0.0.2", 80)};
  const auto flows = assemble_flows(pkts, {60.0, 120.0});
  REQUIRE(flows.size() == 2);
  CHECK(flows[0].size() == 1);
  CHECK(flows[1].size() == 1);
}

TEST_CASE("active timeout closes a busy flow") {
  std::vector<PacketRecord> pkts;
  for (int i = 0; i <= 13; ++i)  // every 10 s; age exceeds 120 s at t=130
    pkts.push_back(make_packet(i * 10'000'000LL, "10.0.0.1", 1234, "10.0.0.2", 80));
  const auto flows = assemble_flows(pkts, {60.0, 120.0});
  REQUIRE(flows.size() == 2);
  CHECK(flows[0].size() == 13);
  CHECK(flows[1].size() == 1);
}

TEST_CASE("fin exchange closes and the next packet reopens") {
  const std::vector<PacketRecord> pkts = {
      make_packet(0, "10.0.0.1", 1234, "10.0.0.2", 80, tcpflag::kSyn),
      make_packet(1000, "10.0.0.2", 80, "10.0.0.1", 1234, tcpflag::kSyn | tcpflag::kAck),
      make_packet(2000, "10.0.0.1", 1234, "10.0.0.2", 80, tcpflag::kFin | tcpflag::kAck),
      make_packet(3000, "10.0.0.2", 80, "10.0.0.1", 1234, tcpflag::kFin | tcpflag::kAck),
      make_packet(4000, "10.0.0.1", 1234, "10.0.0.2", 80, tcpflag::kAck),
  };
  const auto flows = assemble_flows(pkts);
  REQUIRE(flows.size() == 2);
  CHECK(flows[0].size() == 4);
  CHECK(flows[1].size() == 1);
}

TEST_CASE("rst closes immediately") {
  const std::vector<PacketRecord> pkts = {
      make_packet(0, "10.0.0.1", 1234, "10.0.0.2", 80, tcpflag::kSyn),
      make_packet(1000, "10.0.0.2", 80, "10.0.0.1", 1234, tcpflag::kRst),
      make_packet(2000, "10.0.0.1", 1234, "10.0.0.2", 80, tcpflag::kSyn),
  };
  const auto flows = assemble_flows(pkts);
  REQUIRE(flows.size() == 2);
  CHECK(flows[0].size() == 2);
  CHECK(flows[1].size() == 1);
}

TEST_CASE("packet partition and start_ts ordering") {
  std::vector<PacketRecord> pkts;
  // Interleaved conversations, second one starts first.
  pkts.push_back(make_packet(500, "10.0.0.3", 999, "10.0.0.4", 443));
  pkts.push_back(make_packet(1000, "10.0.0.1", 1234, "10.0.0.2", 80));
  pkts.push_back(make_packet(1500, "10.0.0.4", 443, "10.0.0.3", 999));
  pkts.push_back(make_packet(2000, "10.0.0.2", 80, "10.0.0.1", 1234));
  const auto flows = assemble_flows(pkts);
  REQUIRE(flows.size() == 2);
  std::size_t total = 0;
  for (const auto& f : flows) total += f.size();
  CHECK(total == pkts.size());
  CHECK(flows[0].start_ts <= flows[1].start_ts);
  // Canonical endpoint order: smaller IP first; same IP falls back to port.
  CHECK(flows[0].key.a.ip.to_string() == "10.0.0.3");
  CHECK(flows[0].key.a.port == 999);
  const auto same_ip = FlowKey::from_packet(make_packet(0, "10.0.0.9", 5000, "10.0.0.9", 80));
  CHECK(same_ip.a.port == 80);
}

TEST_CASE("assembly validates timeout configuration") {
  CHECK_THROWS_AS((void)assemble_flows({}, {0.0, 120.0}), UsageError);
  CHECK_THROWS_AS((void)assemble_flows({}, {60.0, 30.0}), UsageError);
  CHECK(assemble_flows({}, {60.0, 120.0}).empty());
}

TEST_CASE("flow json export carries packet fields and direction") {
  const std::vector<PacketRecord> pkts = {make_packet(0, "10.0.0.1", 1234, "10.0.0.2", 80),
                                          make_packet(1000, "10.0.0.2", 80, "10.0.0.1", 1234)};
  const auto flows = assemble_flows(pkts);
  const std::string j = flow_to_json(flows[0]);
  CHECK(j.find("\"timestamp_us\":0") != std::string::npos);
  CHECK(j.find("\"direction\":\"backward\"") != std::string::npos);
  CHECK(j.find("\"port_a\":1234") != std::string::npos);  // 10.0.0.1 is the smaller endpoint
}
