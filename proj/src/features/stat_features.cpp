// SPDX-License-Identifier: Apache-2.0
#include "uad/features/stat_features.hpp"

#include <algorithm>
#include <cmath>

#include "uad/errors.hpp"

namespace uad {

namespace {

// Population statistics over a value list; n == 0 marks the group missing.
struct Stats {
  double total = 0, min = 0, max = 0, mean = 0, stddev = 0;
  bool present = false;
};

Stats compute_stats(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  s.present = true;
  s.min = xs[0];
  s.max = xs[0];
  double sum = 0, sumsq = 0;
  for (double x : xs) {
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
    sum += x;
    sumsq += x * x;
  }
  s.total = sum;
  const double n = static_cast<double>(xs.size());
  s.mean = sum / n;
  s.stddev = std::sqrt(std::max(0.0, sumsq / n - s.mean * s.mean));
  return s;
}

struct Writer {
  StatFeatureVector& out;
  int idx = 0;

  void value(double v) {
    out.values[idx] = v;
    out.missing[idx] = false;
    ++idx;
  }
  void missing() {
    out.values[idx] = 0.0;
    out.missing[idx] = true;
    ++idx;
  }
  void group(const Stats& s) {
    if (!s.present) {
      for (int k = 0; k < 5; ++k) missing();
      return;
    }
    value(s.total);
    value(s.min);
    value(s.max);
    value(s.mean);
    value(s.stddev);
  }
  // Bwd total / Fwd total; undefined without a positive denominator. An
  // absent numerator group reads as total 0.
  void ratio(const Stats& bwd, const Stats& fwd) {
    if (!fwd.present || fwd.total == 0.0)
      missing();
    else
      value((bwd.present ? bwd.total : 0.0) / fwd.total);
  }
};

std::vector<double> iats_seconds(const std::vector<std::int64_t>& ts) {
  std::vector<double> out;
  for (std::size_t i = 1; i < ts.size(); ++i) out.push_back(static_cast<double>(ts[i] - ts[i - 1]) * 1e-6);
  return out;
}

}  // namespace

StatFeatureVector extract_stat_features(const Flow& flow) {
  if (flow.packets.empty()) throw DataError("extract_stat_features: empty flow");

  std::vector<double> fwd_hdr, bwd_hdr, all_hdr;
  std::vector<double> fwd_pay, bwd_pay, all_pay;
  std::vector<double> fwd_ones, bwd_ones, all_ones;
  std::vector<std::int64_t> fwd_ts, bwd_ts, all_ts;
  int fwd_psh = 0, fwd_urg = 0, bwd_psh = 0, bwd_urg = 0;
  int fin = 0, syn = 0, rst = 0, psh = 0, ack = 0, urg = 0, cwr = 0, ece = 0;
  bool any_bwd = false;

  for (const auto& [rec, forward] : flow.packets) {
    const double hdr = rec.header_len, pay = rec.payload_len;
    all_hdr.push_back(hdr);
    all_pay.push_back(pay);
    all_ones.push_back(1.0);
    all_ts.push_back(rec.timestamp_us);
    if (forward) {
      fwd_hdr.push_back(hdr);
      fwd_pay.push_back(pay);
      fwd_ones.push_back(1.0);
      fwd_ts.push_back(rec.timestamp_us);
    } else {
      any_bwd = true;
      bwd_hdr.push_back(hdr);
      bwd_pay.push_back(pay);
      bwd_ones.push_back(1.0);
      bwd_ts.push_back(rec.timestamp_us);
    }
    const auto f = rec.tcp_flags;
    if (f & tcpflag::kPsh) (forward ? fwd_psh : bwd_psh)++;
    if (f & tcpflag::kUrg) (forward ? fwd_urg : bwd_urg)++;
    fin += bool(f & tcpflag::kFin);
    syn += bool(f & tcpflag::kSyn);
    rst += bool(f & tcpflag::kRst);
    psh += bool(f & tcpflag::kPsh);
    ack += bool(f & tcpflag::kAck);
    urg += bool(f & tcpflag::kUrg);
    cwr += bool(f & tcpflag::kCwr);
    ece += bool(f & tcpflag::kEce);
  }

  const double duration = flow.duration_seconds();
  const Stats fwd_cnt = compute_stats(fwd_ones), bwd_cnt = compute_stats(bwd_ones), all_cnt = compute_stats(all_ones);
  const Stats fwd_h = compute_stats(fwd_hdr), bwd_h = compute_stats(bwd_hdr), all_h = compute_stats(all_hdr);
  const Stats fwd_p = compute_stats(fwd_pay), bwd_p = compute_stats(bwd_pay), all_p = compute_stats(all_pay);
  const Stats fwd_iat = compute_stats(iats_seconds(fwd_ts));
  const Stats bwd_iat = compute_stats(iats_seconds(bwd_ts));
  const Stats all_iat = compute_stats(iats_seconds(all_ts));

  StatFeatureVector v;
  Writer w{v};

  w.value(duration);  // 1: Flow duration
  if (duration > 0.0) {
    w.value((all_h.total + all_p.total) / duration);          // 2: Flow byte/s
    w.value(static_cast<double>(fwd_ones.size()) / duration); // 3: Fwd packets/s
    w.value(static_cast<double>(bwd_ones.size()) / duration); // 4: Bwd packets/s
    w.value(static_cast<double>(all_ones.size()) / duration); // 5: Flow packets/s
  } else {
    for (int k = 0; k < 4; ++k) w.missing();
  }

  w.group(fwd_cnt);          // 6-10
  w.group(bwd_cnt);          // 11-15
  w.group(all_cnt);          // 16-20
  w.ratio(bwd_cnt, fwd_cnt); // 21

  w.group(fwd_h);            // 22-26
  w.group(bwd_h);            // 27-31
  w.group(all_h);            // 32-36
  w.ratio(bwd_h, fwd_h);     // 37

  w.group(fwd_p);            // 38-42
  w.group(bwd_p);            // 43-47
  w.group(all_p);            // 48-52
  w.ratio(bwd_p, fwd_p);     // 53

  w.group(fwd_iat);            // 54-58
  w.group(bwd_iat);            // 59-63
  w.group(all_iat);            // 64-68
  w.ratio(bwd_iat, fwd_iat);   // 69

  w.value(fwd_psh);  // 70
  w.value(fwd_urg);  // 71
  if (any_bwd) {     // 72-73: Bwd flag counts follow the empty-direction rule
    w.value(bwd_psh);
    w.value(bwd_urg);
  } else {
    w.missing();
    w.missing();
  }
  w.value(fin);  // 74
  w.value(syn);  // 75
  w.value(rst);  // 76
  w.value(psh);  // 77
  w.value(ack);  // 78
  w.value(urg);  // 79
  w.value(cwr);  // 80
  w.value(ece);  // 81

  return v;
}

const std::array<std::string, kStatFeatureCount>& stat_feature_names() {
  static const std::array<std::string, kStatFeatureCount> names = [] {
    std::array<std::string, kStatFeatureCount> n;
    int i = 0;
    const auto put = [&](const std::string& s) { n[i++] = s; };
    const auto stat_group = [&](const std::string& base) {
      for (const char* s : {"Total", "Min", "Max", "Mean", "Std"}) put(base + ": " + s);
    };
    put("Flow duration");
    put("Flow byte/s: Mean");
    put("Fwd packets/s: Mean");
    put("Bwd packets/s: Mean");
    put("Flow packets/s: Mean");
    stat_group("Fwd packet count");
    stat_group("Bwd packet count");
    stat_group("Flow packet count");
    put("Bwd/Fwd packet total count ratio");
    stat_group("Fwd header Length");
    stat_group("Bwd header Length");
    stat_group("Flow header Length");
    put("Bwd/Fwd header total length ratio");
    stat_group("Fwd packet Length");
    stat_group("Bwd packet Length");
    stat_group("Flow packet Length");
    put("Bwd/Fwd packet total length ratio");
    stat_group("Fwd IAT");
    stat_group("Bwd IAT");
    stat_group("Flow IAT");
    put("Bwd/Fwd total IAT ratio");
    put("Fwd flag count: PSH");
    put("Fwd flag count: URG");
    put("Bwd flag count: PSH");
    put("Bwd flag count: URG");
    put("Flow flag count: FIN");
    put("Flow flag count: SYN");
    put("Flow flag count: RST");
    put("Flow flag count: PSH");
    put("Flow flag count: ACK");
    put("Flow flag count: URG");
    put("Flow flag count: CWR");
    put("Flow flag count: ECE");
    return n;
  }();
  return names;
}

const std::vector<int>& selected_feature_indices() {
  static const std::vector<int> idx = {10, 13, 15, 18, 20, 21, 26, 31, 36, 37, 39, 40, 41, 42, 44, 45, 46,
                                       47, 49, 50, 51, 52, 54, 55, 56, 57, 60, 61, 63, 65, 66, 69, 77};
  return idx;
}

std::vector<double> project_selected(const StatFeatureVector& v, const std::vector<int>& selection) {
  if (static_cast<int>(selection.size()) != kSelectedFeatureCount)
    throw UsageError("selection must have exactly " + std::to_string(kSelectedFeatureCount) + " indices, got " +
                     std::to_string(selection.size()));
  std::vector<double> out;
  out.reserve(selection.size());
  for (int i : selection) {
    if (i < 0 || i >= kStatFeatureCount)
      throw UsageError("selection index out of range: " + std::to_string(i));
    out.push_back(v.missing[i] ? 0.0 : v.values[i]);
  }
  return out;
}

}  // namespace uad
