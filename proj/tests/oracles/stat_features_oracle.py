#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Independent oracle for the 81 flow statistics.

Computes the expected feature vectors for five hand-built flows directly
from the documented definitions (population Std; masking rules for empty
directions, zero durations, and zero-denominator ratios) and freezes them
to tests/data/stat_oracle.json. Regenerate with:

    python3 tests/oracles/stat_features_oracle.py
"""
import json
import math
import os

FIN, SYN, RST, PSH, ACK, URG, ECE, CWR = 0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80

MISSING = object()


def stats(xs):
    """Total, Min, Max, Mean, population Std; all missing when xs is empty."""
    if not xs:
        return [MISSING] * 5
    n = len(xs)
    mean = sum(xs) / n
    var = sum((x - mean) ** 2 for x in xs) / n
    return [sum(xs), min(xs), max(xs), mean, math.sqrt(var)]


def ratio(bwd_stats, fwd_stats):
    fwd_total = fwd_stats[0]
    if fwd_total is MISSING or fwd_total == 0.0:
        return MISSING
    bwd_total = 0.0 if bwd_stats[0] is MISSING else bwd_stats[0]
    return bwd_total / fwd_total


def iats(ts_us):
    return [(b - a) / 1e6 for a, b in zip(ts_us, ts_us[1:])]


def features(packets):
    """packets: list of (ts_us, fwd: bool, hdr, pay, flags)."""
    fwd = [p for p in packets if p[1]]
    bwd = [p for p in packets if not p[1]]
    out = []

    duration = (packets[-1][0] - packets[0][0]) / 1e6
    out.append(duration)  # 1
    if duration > 0:
        total_bytes = sum(p[2] + p[3] for p in packets)
        out += [total_bytes / duration, len(fwd) / duration, len(bwd) / duration, len(packets) / duration]  # 2-5
    else:
        out += [MISSING] * 4

    cnt_f, cnt_b, cnt_a = stats([1.0] * len(fwd)), stats([1.0] * len(bwd)), stats([1.0] * len(packets))
    out += cnt_f + cnt_b + cnt_a + [ratio(cnt_b, cnt_f)]  # 6-21

    hdr_f, hdr_b, hdr_a = stats([p[2] for p in fwd]), stats([p[2] for p in bwd]), stats([p[2] for p in packets])
    out += hdr_f + hdr_b + hdr_a + [ratio(hdr_b, hdr_f)]  # 22-37

    pay_f, pay_b, pay_a = stats([p[3] for p in fwd]), stats([p[3] for p in bwd]), stats([p[3] for p in packets])
    out += pay_f + pay_b + pay_a + [ratio(pay_b, pay_f)]  # 38-53

    iat_f = stats(iats([p[0] for p in fwd]))
    iat_b = stats(iats([p[0] for p in bwd]))
    iat_a = stats(iats([p[0] for p in packets]))
    out += iat_f + iat_b + iat_a + [ratio(iat_b, iat_f)]  # 54-69

    def count(pkts, flag):
        return float(sum(1 for p in pkts if p[4] & flag))

    out += [count(fwd, PSH), count(fwd, URG)]  # 70-71
    if bwd:
        out += [count(bwd, PSH), count(bwd, URG)]  # 72-73
    else:
        out += [MISSING, MISSING]
    out += [count(packets, f) for f in (FIN, SYN, RST, PSH, ACK, URG, CWR, ECE)]  # 74-81

    assert len(out) == 81, len(out)
    return {
        "values": [0.0 if x is MISSING else float(x) for x in out],
        "missing": [x is MISSING for x in out],
    }


# (ts_us, fwd, header_len, payload_len, tcp_flags)
FLOWS = {
    "single_packet": [(0, True, 40, 100, SYN)],
    "zero_duration": [
        (5_000_000, True, 40, 50, ACK),
        (5_000_000, False, 32, 10, ACK | PSH),
    ],
    "four_packet": [
        (0, True, 40, 100, ACK),
        (1_000_000, False, 40, 300, ACK),
        (2_500_000, True, 32, 200, PSH | ACK),
        (4_000_000, False, 32, 0, FIN | ACK),
    ],
    "fwd_iat": [
        (0, True, 40, 10, ACK),
        (2_000_000, True, 40, 20, ACK),
        (6_000_000, True, 40, 30, ACK),
    ],
    "flag_zoo": [
        (0, True, 40, 0, SYN),
        (100_000, False, 40, 0, SYN | ACK | ECE),
        (250_000, True, 32, 500, ACK | PSH | URG),
        (400_000, False, 32, 1460, ACK | PSH),
        (650_000, True, 32, 120, ACK | CWR),
        (900_000, False, 32, 0, FIN | ACK | URG),
    ],
}


def main():
    out = {name: features(pkts) for name, pkts in FLOWS.items()}
    # Spot checks straight from the feature definitions.
    fp = out["four_packet"]["values"]
    assert fp[40] == 150.0, fp[40]  # Fwd packet Length Mean
    assert fp[52] == 1.0, fp[52]    # Bwd/Fwd packet total length ratio
    fi = out["fwd_iat"]["values"]
    assert fi[53:58] == [6.0, 2.0, 4.0, 3.0, 1.0], fi[53:58]
    sp = out["single_packet"]
    assert all(sp["missing"][53:69]) and sp["values"][0] == 0.0 and sp["values"][5] == 1.0

    path = os.path.join(os.path.dirname(__file__), "..", "data", "stat_oracle.json")
    with open(path, "w") as f:
        json.dump(out, f, indent=1, sort_keys=True)
    print(f"wrote {os.path.normpath(path)}")


if __name__ == "__main__":
    main()
