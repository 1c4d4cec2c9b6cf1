// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "uad/net/packet.hpp"

namespace uad {

enum class CaptureFormat { kPcap, kPacketCsv };

struct IngestResult {
  std::vector<PacketRecord> packets;   // file order
  std::size_t skipped_frames = 0;      // pcap frames that are not parseable IP
};

// Reads a capture file (libpcap classic, microsecond or nanosecond variant)
// or a packet-csv log with the canonical header row. Parse failures name the
// offending line (csv) or byte offset (pcap).
IngestResult ingest_packets(const std::string& path, CaptureFormat format);

IngestResult parse_pcap(const std::vector<std::uint8_t>& bytes);
IngestResult parse_packet_csv(const std::string& text);

inline constexpr const char* kPacketCsvHeader =
    "timestamp_us,src_ip,src_port,dst_ip,dst_port,protocol,header_len,payload_len,tcp_flags_hex,window_size";

std::string packet_to_csv_row(const PacketRecord& r);
void write_packet_csv(const std::string& path, const std::vector<PacketRecord>& packets);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
std::string read_file_text(const std::string& path);
void write_file_text(const std::string& path, const std::string& text);

}  // namespace uad
