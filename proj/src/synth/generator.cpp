// SPDX-License-Identifier: Apache-2.0
#include "uad/synth/generator.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "uad/errors.hpp"
#include "uad/net/ingest.hpp"
#include "uad/rng.hpp"

namespace uad {
namespace {

// Class geometry is fixed (independent of SyntheticSpec::seed) so that a
// given class id means the same traffic shape across corpora.
struct ClassProfile {
  double d_pay = 0, d_gap = 0, d_win = 0, d_dir = 0, d_psh = 0;
};

ClassProfile class_profile(int class_id) {
  ClassProfile p;
  if (class_id == 0) return p;  // class 0 is the baseline
  Rng rng = Rng(0x5EEDC1A5u).derive("class", static_cast<std::uint64_t>(class_id));
  p.d_pay = rng.uniform_real(-1.0, 1.0);
  p.d_gap = rng.uniform_real(-1.0, 1.0);
  p.d_win = rng.uniform_real(-1.0, 1.0);
  p.d_dir = rng.uniform_real(-1.0, 1.0);
  p.d_psh = rng.uniform_real(-1.0, 1.0);
  return p;
}

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

std::uint32_t lognormal_bytes(Rng& rng, double mu, double sigma, double cap) {
  const double v = std::exp(rng.normal() * sigma + mu);
  return static_cast<std::uint32_t>(std::llround(clampd(v, 0.0, cap)));
}

// Reorders sorted-ascending values into one of eight shapes. Every shape is a
// permutation, so marginal distributions are identical across classes.
std::vector<std::uint32_t> apply_order_pattern(std::vector<std::uint32_t> asc, int pattern) {
  const std::size_t n = asc.size();
  std::vector<std::uint32_t> out;
  out.reserve(n);
  switch (pattern % 8) {
    case 1:  // ascending
      return asc;
    case 2:  // descending
      return {asc.rbegin(), asc.rend()};
    case 3: {  // peak: rise through the low half, fall through the high half
      const std::size_t half = n / 2;
      for (std::size_t i = 0; i < half; ++i) out.push_back(asc[i]);
      for (std::size_t i = n; i > half; --i) out.push_back(asc[i - 1]);
      return out;
    }
    case 4: {  // valley: mirror of peak
      const std::size_t half = n / 2;
      for (std::size_t i = n; i > half; --i) out.push_back(asc[i - 1]);
      for (std::size_t i = 0; i < half; ++i) out.push_back(asc[i]);
      return out;
    }
    case 5: {  // zigzag small/large
      std::size_t lo = 0, hi = n;
      while (lo < hi) {
        out.push_back(asc[lo++]);
        if (lo < hi) out.push_back(asc[--hi]);
      }
      return out;
    }
    case 6: {  // zigzag large/small
      std::size_t lo = 0, hi = n;
      while (lo < hi) {
        out.push_back(asc[--hi]);
        if (lo < hi) out.push_back(asc[lo++]);
      }
      return out;
    }
    case 7: {  // halves swapped
      const std::size_t half = n / 2;
      for (std::size_t i = half; i < n; ++i) out.push_back(asc[i]);
      for (std::size_t i = 0; i < half; ++i) out.push_back(asc[i]);
      return out;
    }
    default:  // pattern 0: draw order (asc arrives pre-shuffled by the caller)
      return asc;
  }
}

PacketRecord make_packet(std::int64_t ts_us, const Endpoint& src, const Endpoint& dst,
                         std::uint32_t header_len, std::uint32_t payload_len,
                         std::uint8_t flags, std::uint32_t window) {
  PacketRecord r;
  r.timestamp_us = ts_us;
  r.src_ip = src.ip;
  r.src_port = src.port;
  r.dst_ip = dst.ip;
  r.dst_port = dst.port;
  r.protocol = proto::kTcp;
  r.header_len = header_len;
  r.payload_len = payload_len;
  r.tcp_flags = flags;
  r.window_size = window;
  return r;
}

Flow build_flow(const std::vector<PacketRecord>& packets) {
  Flow f;
  f.key = FlowKey::from_packet(packets.front());
  f.initiator = {packets.front().src_ip, packets.front().src_port};
  f.start_ts = packets.front().timestamp_us;
  f.end_ts = packets.back().timestamp_us;
  for (const auto& rec : packets)
    f.packets.push_back({rec, Endpoint{rec.src_ip, rec.src_port} == f.initiator});
  return f;
}

Flow synth_flow(const SyntheticSpec& spec, int class_id, int flow_index, int ordinal) {
  const std::uint64_t sub =
      (static_cast<std::uint64_t>(class_id) << 32) | static_cast<std::uint32_t>(flow_index);
  Rng rng = Rng(spec.seed).derive("flow", sub);
  const ClassProfile prof = class_profile(class_id);
  const double sep = spec.class_separation;

  // `ordinal` is globally unique; it keys the endpoint so 5-tuples never collide.
  const Endpoint client{IpAddress::v4_from(0x0A000000u + static_cast<std::uint32_t>(ordinal)),
                        static_cast<std::uint16_t>(40000 + (ordinal % 20000))};
  const Endpoint server{IpAddress::v4_from(0xAC100001u), 443};

  const int n = static_cast<int>(rng.uniform_int(2, 40));
  const std::int64_t base_ts =
      1'700'000'000'000'000LL + static_cast<std::int64_t>(ordinal) * 1'000;

  std::vector<PacketRecord> packets;
  packets.reserve(static_cast<std::size_t>(n));

  if (spec.temporal_signal) {
    // Shared marginals: every class draws sizes from the same distribution
    // and the class identity lives only in the ordering of those sizes.
    std::vector<std::uint32_t> sizes(static_cast<std::size_t>(n - 1));
    for (auto& s : sizes) s = lognormal_bytes(rng, std::log(300.0), 0.5, 1460.0);
    if (class_id % 8 != 0) std::sort(sizes.begin(), sizes.end());
    sizes = apply_order_pattern(std::move(sizes), class_id);

    std::int64_t ts = base_ts;
    packets.push_back(make_packet(ts, client, server, 40, 0, tcpflag::kSyn, 4096));
    for (int i = 1; i < n; ++i) {
      ts += 50'000;  // constant 50 ms gap
      const bool fwd = (i % 2 == 0);
      std::uint8_t flags = tcpflag::kAck;
      if (i == n - 1) flags |= tcpflag::kFin;
      packets.push_back(make_packet(ts, fwd ? client : server, fwd ? server : client, 32,
                                    sizes[static_cast<std::size_t>(i - 1)], flags, 4096));
    }
    return build_flow(packets);
  }

  const double mu_pay = std::log(250.0) + 0.8 * sep * prof.d_pay;
  const double mu_gap = std::log(0.04) + 0.5 * sep * prof.d_gap;
  const double win_base = clampd(4096.0 * std::exp(0.2 * sep * prof.d_win), 512.0, 60000.0);
  const double p_fwd = clampd(0.5 + 0.08 * sep * prof.d_dir, 0.1, 0.9);
  const double p_psh = clampd(0.3 + 0.08 * sep * prof.d_psh, 0.05, 0.95);

  std::int64_t ts = base_ts;
  packets.push_back(make_packet(ts, client, server, 40, 0, tcpflag::kSyn,
                                static_cast<std::uint32_t>(win_base)));
  for (int i = 1; i < n; ++i) {
    const double gap_s = clampd(std::exp(rng.normal() * 0.5 + mu_gap), 0.001, 2.0);
    ts += static_cast<std::int64_t>(std::llround(gap_s * 1e6));
    const bool fwd = rng.uniform01() < p_fwd;
    const std::uint32_t pay = lognormal_bytes(rng, mu_pay, 0.6, 1460.0);
    const std::uint32_t win = static_cast<std::uint32_t>(
        clampd(win_base + static_cast<double>(rng.uniform_int(0, 256)), 1.0, 65535.0));
    std::uint8_t flags = tcpflag::kAck;
    if (rng.uniform01() < p_psh) flags |= tcpflag::kPsh;
    if (i == n - 1) flags |= tcpflag::kFin;
    packets.push_back(
        make_packet(ts, fwd ? client : server, fwd ? server : client, 32, pay, flags, win));
  }
  return build_flow(packets);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_classes < 2) throw UsageError("synthetic spec: n_classes must be >= 2");
  if (flows_per_class < 1) throw UsageError("synthetic spec: flows_per_class must be >= 1");
  if (normal_flows < 0) throw UsageError("synthetic spec: normal_flows must be >= 0");
  if (!(class_separation >= 0.0))
    throw UsageError("synthetic spec: class_separation must be >= 0");
}

std::vector<LabeledFlow> generate_flows(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<LabeledFlow> out;
  int ordinal = 0;
  for (int c = 0; c < spec.n_classes; ++c) {
    const int count = c == 0 ? spec.normal_count() : spec.flows_per_class;
    for (int i = 0; i < count; ++i) out.push_back({synth_flow(spec, c, i, ordinal++), c});
  }
  return out;
}

namespace {

// Floor 70/30 split of the sorted anomaly ids, both sides kept non-empty.
void split_task_classes(const std::vector<int>& anomaly_ids, TaskFamily& fam) {
  const int n_anomaly = static_cast<int>(anomaly_ids.size());
  int n_train = static_cast<int>(std::floor(0.7 * n_anomaly));
  n_train = std::max(1, std::min(n_train, n_anomaly - 1));
  for (int i = 0; i < n_anomaly; ++i)
    (i < n_train ? fam.train_classes : fam.novel_classes).push_back(anomaly_ids[i]);
}

}  // namespace

TaskFamily generate_task_family(const SyntheticSpec& spec) {
  if (spec.n_classes < 4)
    throw UsageError("task family needs n_classes >= 4, got " + std::to_string(spec.n_classes));
  TaskFamily fam;
  fam.flows = generate_flows(spec);
  std::vector<int> ids;
  for (int c = 1; c < spec.n_classes; ++c) ids.push_back(c);
  split_task_classes(ids, fam);
  return fam;
}

TaskFamily task_family_from_flows(std::vector<LabeledFlow> flows) {
  std::set<int> ids;
  for (const auto& lf : flows)
    if (lf.class_id != 0) ids.insert(lf.class_id);
  if (ids.size() < 2)
    throw DataError("task family needs at least 2 anomaly classes, got " +
                    std::to_string(ids.size()));
  TaskFamily fam;
  fam.flows = std::move(flows);
  split_task_classes(std::vector<int>(ids.begin(), ids.end()), fam);
  return fam;
}

std::vector<PacketRecord> flows_to_packets(const std::vector<LabeledFlow>& flows) {
  std::vector<PacketRecord> out;
  std::size_t total = 0;
  for (const auto& lf : flows) total += lf.flow.packets.size();
  out.reserve(total);
  for (const auto& lf : flows)
    for (const auto& fp : lf.flow.packets) out.push_back(fp.rec);
  std::stable_sort(out.begin(), out.end(),
                   [](const PacketRecord& x, const PacketRecord& y) {
                     return x.timestamp_us < y.timestamp_us;
                   });
  return out;
}

void write_flow_labels_csv(const std::string& path, const std::vector<LabeledFlow>& flows) {
  std::ostringstream os;
  os << kFlowLabelsCsvHeader << '\n';
  for (const auto& lf : flows) {
    const FlowKey& k = lf.flow.key;
    os << k.a.ip.to_string() << ',' << k.a.port << ',' << k.b.ip.to_string() << ',' << k.b.port
       << ',' << static_cast<int>(k.protocol) << ',' << lf.flow.start_ts << ',' << lf.class_id
       << '\n';
  }
  write_file_text(path, os.str());
}

std::vector<FlowLabel> read_flow_labels_csv(const std::string& path) {
  const std::string text = read_file_text(path);
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kFlowLabelsCsvHeader)
    throw FormatError(path + ": missing flow labels header row");
  std::vector<FlowLabel> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (cols.size() != 7)
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected 7 columns");
    try {
      FlowLabel fl;
      fl.key.a = {IpAddress::parse(cols[0]), static_cast<std::uint16_t>(std::stoul(cols[1]))};
      fl.key.b = {IpAddress::parse(cols[2]), static_cast<std::uint16_t>(std::stoul(cols[3]))};
      fl.key.protocol = static_cast<std::uint8_t>(std::stoul(cols[4]));
      fl.start_ts = std::stoll(cols[5]);
      fl.class_id = std::stoi(cols[6]);
      out.push_back(fl);
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": malformed value");
    }
  }
  return out;
}

}  // namespace uad
