// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace uad {

// IPv4 addresses are stored v4-mapped (::ffff:a.b.c.d) so one byte order
// covers both families and key canonicalization is a plain byte compare.
struct IpAddress {
  std::array<std::uint8_t, 16> bytes{};
  bool v4 = true;

  static IpAddress v4_from(std::uint32_t host_order);
  static IpAddress parse(const std::string& text);  // throws FormatError
  std::string to_string() const;

  auto operator<=>(const IpAddress& o) const { return bytes <=> o.bytes; }
  bool operator==(const IpAddress& o) const { return bytes == o.bytes; }
};

namespace proto {
inline constexpr std::uint8_t kTcp = 6;
inline constexpr std::uint8_t kUdp = 17;
}  // namespace proto

namespace tcpflag {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
inline constexpr std::uint8_t kUrg = 0x20;
inline constexpr std::uint8_t kEce = 0x40;
inline constexpr std::uint8_t kCwr = 0x80;
}  // namespace tcpflag

struct PacketRecord {
  std::int64_t timestamp_us = 0;
  IpAddress src_ip, dst_ip;
  std::uint16_t src_port = 0, dst_port = 0;  // 0 for protocols without ports
  std::uint8_t protocol = 0;                 // IP protocol number
  std::uint32_t header_len = 0;              // network + transport header bytes
  std::uint32_t payload_len = 0;
  std::uint8_t tcp_flags = 0;   // zero for non-TCP
  std::uint32_t window_size = 0;  // zero for non-TCP

  bool is_tcp() const { return protocol == proto::kTcp; }
  bool is_udp() const { return protocol == proto::kUdp; }
  bool has_ports() const { return is_tcp() || is_udp(); }
};

struct Endpoint {
  IpAddress ip;
  std::uint16_t port = 0;

  auto operator<=>(const Endpoint&) const = default;
};

// Canonical bidirectional 5-tuple: the lexicographically smaller
// (ip, port) endpoint is stored first, so key(A->B) == key(B->A).
struct FlowKey {
  Endpoint a, b;
  std::uint8_t protocol = 0;

  static FlowKey from_packet(const PacketRecord& r) {
    const Endpoint s{r.src_ip, r.src_port}, d{r.dst_ip, r.dst_port};
    return s <= d ? FlowKey{s, d, r.protocol} : FlowKey{d, s, r.protocol};
  }

  auto operator<=>(const FlowKey&) const = default;
};

struct FlowPacket {
  PacketRecord rec;
  bool forward = true;
};

struct Flow {
  FlowKey key;
  Endpoint initiator;  // source endpoint of the first packet; defines forward
  std::vector<FlowPacket> packets;
  std::int64_t start_ts = 0, end_ts = 0;  // microseconds

  std::size_t size() const { return packets.size(); }
  double duration_seconds() const { return static_cast<double>(end_ts - start_ts) * 1e-6; }
};

}  // namespace uad
