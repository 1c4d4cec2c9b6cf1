// SPDX-License-Identifier: Apache-2.0
#include "uad/net/ingest.hpp"

#include <arpa/inet.h>

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "uad/errors.hpp"

namespace uad {

IpAddress IpAddress::v4_from(std::uint32_t host_order) {
  IpAddress a;
  a.v4 = true;
  a.bytes[10] = 0xff;
  a.bytes[11] = 0xff;
  a.bytes[12] = static_cast<std::uint8_t>(host_order >> 24);
  a.bytes[13] = static_cast<std::uint8_t>(host_order >> 16);
  a.bytes[14] = static_cast<std::uint8_t>(host_order >> 8);
  a.bytes[15] = static_cast<std::uint8_t>(host_order);
  return a;
}

IpAddress IpAddress::parse(const std::string& text) {
  IpAddress a;
  in_addr v4{};
  if (inet_pton(AF_INET, text.c_str(), &v4) == 1) {
    std::uint32_t net = 0;
    std::memcpy(&net, &v4, 4);
    return v4_from(ntohl(net));
  }
  in6_addr v6{};
  if (inet_pton(AF_INET6, text.c_str(), &v6) == 1) {
    a.v4 = false;
    std::memcpy(a.bytes.data(), &v6, 16);
    return a;
  }
  throw FormatError("invalid IP address: " + text);
}

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  if (v4) {
    in_addr v{};
    std::memcpy(&v, bytes.data() + 12, 4);
    inet_ntop(AF_INET, &v, buf, sizeof buf);
  } else {
    in6_addr v{};
    std::memcpy(&v, bytes.data(), 16);
    inet_ntop(AF_INET6, &v, buf, sizeof buf);
  }
  return buf;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw IoError("read failure: " + path);
  return bytes;
}

std::string read_file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure: " + path);
  return ss.str();
}

void write_file_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << text;
  out.flush();
  if (!out) throw IoError("write failure: " + path);
}

namespace {

struct ByteReader {
  const std::uint8_t* p;
  std::size_t len;
  bool swap;  // file endianness differs from host

  std::uint32_t u32(std::size_t off) const {
    std::uint32_t v = 0;
    std::memcpy(&v, p + off, 4);
    return swap ? __builtin_bswap32(v) : v;
  }
  std::uint16_t u16be(std::size_t off) const {
    return static_cast<std::uint16_t>((p[off] << 8) | p[off + 1]);
  }
};

constexpr std::uint32_t kMagicUs = 0xa1b2c3d4u;
constexpr std::uint32_t kMagicUsSwap = 0xd4c3b2a1u;
constexpr std::uint32_t kMagicNs = 0xa1b23c4du;
constexpr std::uint32_t kMagicNsSwap = 0x4d3cb2a1u;

constexpr int kLinkEthernet = 1;
constexpr int kLinkRawIp = 101;

// Fills the transport-layer fields of rec from the IP payload at ip[0..n).
// Returns false when the frame cannot be interpreted (fragment, truncation).
bool parse_ip(const std::uint8_t* ip, std::size_t n, PacketRecord& rec) {
  if (n < 1) return false;
  const int version = ip[0] >> 4;
  std::size_t l3 = 0;      // network header bytes (incl. extension headers)
  std::size_t l3_total = 0;  // network header + payload per the IP header
  std::uint8_t next = 0;
  if (version == 4) {
    const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    if (ihl < 20 || n < ihl) return false;
    const std::uint16_t total = static_cast<std::uint16_t>((ip[2] << 8) | ip[3]);
    if (total < ihl) return false;
    const std::uint16_t frag = static_cast<std::uint16_t>((ip[6] << 8) | ip[7]);
    if ((frag & 0x1fff) != 0) return false;  // non-first fragment: no transport header
    rec.src_ip = IpAddress::v4_from((std::uint32_t(ip[12]) << 24) | (std::uint32_t(ip[13]) << 16) |
                                    (std::uint32_t(ip[14]) << 8) | ip[15]);
    rec.dst_ip = IpAddress::v4_from((std::uint32_t(ip[16]) << 24) | (std::uint32_t(ip[17]) << 16) |
                                    (std::uint32_t(ip[18]) << 8) | ip[19]);
    l3 = ihl;
    l3_total = total;
    next = ip[9];
  } else if (version == 6) {
    if (n < 40) return false;
    const std::uint16_t plen = static_cast<std::uint16_t>((ip[4] << 8) | ip[5]);
    rec.src_ip.v4 = false;
    rec.dst_ip.v4 = false;
    std::memcpy(rec.src_ip.bytes.data(), ip + 8, 16);
    std::memcpy(rec.dst_ip.bytes.data(), ip + 24, 16);
    next = ip[6];
    std::size_t off = 40;
    // Walk extension headers only far enough to find the transport header.
    for (;;) {
      if (next == 0 || next == 43 || next == 60) {  // hop-by-hop, routing, dst opts
        if (n < off + 8) return false;
        const std::uint8_t nh = ip[off];
        off += (static_cast<std::size_t>(ip[off + 1]) + 1) * 8;
        next = nh;
      } else if (next == 44) {  // fragment
        if (n < off + 8) return false;
        const std::uint16_t frag = static_cast<std::uint16_t>((ip[off + 2] << 8) | ip[off + 3]);
        if ((frag & 0xfff8) != 0) return false;
        const std::uint8_t nh = ip[off];
        off += 8;
        next = nh;
      } else {
        break;
      }
      if (off > n) return false;
    }
    l3 = off;
    l3_total = 40 + plen;
    if (l3_total < l3) return false;
  } else {
    return false;
  }

  rec.protocol = next;
  rec.tcp_flags = 0;
  rec.window_size = 0;
  rec.src_port = 0;
  rec.dst_port = 0;
  if (next == proto::kTcp) {
    if (n < l3 + 20) return false;
    const std::uint8_t* t = ip + l3;
    const std::size_t doff = static_cast<std::size_t>(t[12] >> 4) * 4;
    if (doff < 20 || l3 + doff > l3_total) return false;
    rec.src_port = static_cast<std::uint16_t>((t[0] << 8) | t[1]);
    rec.dst_port = static_cast<std::uint16_t>((t[2] << 8) | t[3]);
    rec.tcp_flags = t[13];
    rec.window_size = static_cast<std::uint32_t>((t[14] << 8) | t[15]);
    rec.header_len = static_cast<std::uint32_t>(l3 + doff);
    rec.payload_len = static_cast<std::uint32_t>(l3_total - l3 - doff);
  } else if (next == proto::kUdp) {
    if (n < l3 + 8 || l3 + 8 > l3_total) return false;
    const std::uint8_t* t = ip + l3;
    rec.src_port = static_cast<std::uint16_t>((t[0] << 8) | t[1]);
    rec.dst_port = static_cast<std::uint16_t>((t[2] << 8) | t[3]);
    rec.header_len = static_cast<std::uint32_t>(l3 + 8);
    rec.payload_len = static_cast<std::uint32_t>(l3_total - l3 - 8);
  } else {
    rec.header_len = static_cast<std::uint32_t>(l3);
    rec.payload_len = static_cast<std::uint32_t>(l3_total - l3);
  }
  return true;
}

}  // namespace

IngestResult parse_pcap(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 24) throw FormatError("truncated pcap header: file has " + std::to_string(bytes.size()) + " bytes");
  std::uint32_t magic = 0;
  std::memcpy(&magic, bytes.data(), 4);
  bool swap = false, nanos = false;
  switch (magic) {
    case kMagicUs: break;
    case kMagicUsSwap: swap = true; break;
    case kMagicNs: nanos = true; break;
    case kMagicNsSwap: swap = true; nanos = true; break;
    default: {
      char hex[16];
      std::snprintf(hex, sizeof hex, "0x%08x", magic);
      throw FormatError(std::string("not a pcap file: bad magic ") + hex);
    }
  }
  const ByteReader r{bytes.data(), bytes.size(), swap};
  const std::uint32_t linktype = r.u32(20);
  if (linktype != kLinkEthernet && linktype != kLinkRawIp)
    throw FormatError("unsupported pcap link type " + std::to_string(linktype));

  IngestResult out;
  std::size_t off = 24;
  while (off < bytes.size()) {
    if (bytes.size() - off < 16)
      throw FormatError("truncated pcap record header at offset " + std::to_string(off));
    const std::uint32_t ts_sec = r.u32(off);
    const std::uint32_t ts_frac = r.u32(off + 4);
    const std::uint32_t incl = r.u32(off + 8);
    off += 16;
    if (bytes.size() - off < incl)
      throw FormatError("truncated pcap packet data at offset " + std::to_string(off));
    const std::uint8_t* frame = bytes.data() + off;
    off += incl;

    PacketRecord rec;
    rec.timestamp_us = static_cast<std::int64_t>(ts_sec) * 1'000'000 +
                       (nanos ? ts_frac / 1000 : ts_frac);

    const std::uint8_t* ip = frame;
    std::size_t iplen = incl;
    if (linktype == kLinkEthernet) {
      std::size_t l2 = 14;
      if (incl < l2) {
        ++out.skipped_frames;
        continue;
      }
      std::uint16_t ethertype = static_cast<std::uint16_t>((frame[12] << 8) | frame[13]);
      if (ethertype == 0x8100 && incl >= 18) {  // 802.1Q tag
        ethertype = static_cast<std::uint16_t>((frame[16] << 8) | frame[17]);
        l2 = 18;
      }
      if (ethertype != 0x0800 && ethertype != 0x86dd) {
        ++out.skipped_frames;
        continue;
      }
      ip = frame + l2;
      iplen = incl - l2;
    }
    if (parse_ip(ip, iplen, rec))
      out.packets.push_back(rec);
    else
      ++out.skipped_frames;
  }
  return out;
}

namespace {

[[noreturn]] void row_error(std::size_t line, const std::string& what) {
  throw FormatError("line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::int64_t parse_int(const std::string& s, std::size_t line, const std::string& field, std::int64_t lo,
                       std::int64_t hi, int base = 10) {
  const std::string t = trim(s);
  std::int64_t v = 0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (base == 16 && t.starts_with("0x")) begin += 2;
  const auto [ptr, ec] = std::from_chars(begin, end, v, base);
  if (ec != std::errc() || ptr != end || begin == end) row_error(line, "invalid " + field + ": '" + s + "'");
  if (v < lo || v > hi)
    row_error(line, field + " out of range [" + std::to_string(lo) + "," + std::to_string(hi) + "]: " + t);
  return v;
}

std::uint8_t parse_protocol(const std::string& s, std::size_t line) {
  std::string t = trim(s);
  for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "tcp") return proto::kTcp;
  if (t == "udp") return proto::kUdp;
  return static_cast<std::uint8_t>(parse_int(t, line, "protocol", 0, 255));
}

}  // namespace

IngestResult parse_packet_csv(const std::string& text) {
  IngestResult out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!saw_header) {
      if (trim(line) != kPacketCsvHeader)
        row_error(lineno, std::string("expected header '") + kPacketCsvHeader + "'");
      saw_header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 10) row_error(lineno, "expected 10 fields, got " + std::to_string(f.size()));
    PacketRecord rec;
    rec.timestamp_us = parse_int(f[0], lineno, "timestamp_us", 0, std::numeric_limits<std::int64_t>::max());
    try {
      rec.src_ip = IpAddress::parse(trim(f[1]));
      rec.dst_ip = IpAddress::parse(trim(f[3]));
    } catch (const FormatError& e) {
      row_error(lineno, e.what());
    }
    rec.src_port = static_cast<std::uint16_t>(parse_int(f[2], lineno, "src_port", 0, 65535));
    rec.dst_port = static_cast<std::uint16_t>(parse_int(f[4], lineno, "dst_port", 0, 65535));
    rec.protocol = parse_protocol(f[5], lineno);
    rec.header_len = static_cast<std::uint32_t>(parse_int(f[6], lineno, "header_len", 0, 0xffffffffLL));
    rec.payload_len = static_cast<std::uint32_t>(parse_int(f[7], lineno, "payload_len", 0, 0xffffffffLL));
    rec.tcp_flags = static_cast<std::uint8_t>(parse_int(f[8], lineno, "tcp_flags_hex", 0, 255, 16));
    rec.window_size = static_cast<std::uint32_t>(parse_int(f[9], lineno, "window_size", 0, 0xffffffffLL));
    if (rec.header_len + rec.payload_len == 0) row_error(lineno, "header_len + payload_len must be positive");
    if (!rec.is_tcp() && (rec.tcp_flags != 0 || rec.window_size != 0))
      row_error(lineno, "tcp_flags and window_size must be zero for non-TCP protocols");
    if (!rec.has_ports() && (rec.src_port != 0 || rec.dst_port != 0))
      row_error(lineno, "ports must be zero for protocols without ports");
    out.packets.push_back(rec);
  }
  if (!saw_header) throw FormatError("line 1: missing packet-csv header row");
  return out;
}

IngestResult ingest_packets(const std::string& path, CaptureFormat format) {
  if (format == CaptureFormat::kPcap) return parse_pcap(read_file_bytes(path));
  return parse_packet_csv(read_file_text(path));
}

std::string packet_to_csv_row(const PacketRecord& r) {
  char flags[8];
  std::snprintf(flags, sizeof flags, "0x%02x", r.tcp_flags);
  const std::string proto_name = r.is_tcp() ? "tcp" : r.is_udp() ? "udp" : std::to_string(int(r.protocol));
  std::ostringstream ss;
  ss << r.timestamp_us << ',' << r.src_ip.to_string() << ',' << r.src_port << ',' << r.dst_ip.to_string() << ','
     << r.dst_port << ',' << proto_name << ',' << r.header_len << ',' << r.payload_len << ',' << flags << ','
     << r.window_size;
  return ss.str();
}

void write_packet_csv(const std::string& path, const std::vector<PacketRecord>& packets) {
  std::ostringstream ss;
  ss << kPacketCsvHeader << '\n';
  for (const auto& p : packets) ss << packet_to_csv_row(p) << '\n';
  write_file_text(path, ss.str());
}

}  // namespace uad
