"""Accelerated loops for bulk-statistics experiments.

The sweep experiments (detection thresholds, minimum flow sizes, size
invariance, robustness grids) need hundreds of millions of packets, far
beyond what the event simulator can push through one core in reasonable
time. Two observations make a shortcut sound:

  * A prioritized measured flow's spine choice depends only on the flow's
    own spray stream and its cumulative usage counters, never on queue
    state, so cross traffic cannot perturb it. Its per-spine arrival
    counts are therefore a function of (seed, flow, usable spines, link
    drop rates) alone and can be produced by a tight loop.
  * A single unprioritized flow on an otherwise idle fabric sees queueing
    only from its own packets, so the port service windows can be tracked
    arithmetically.

Both loops reproduce the event simulator's random streams draw for draw:
with no drops the per-spine counts match the simulator exactly; with
drops the retransmission interleaving differs, so counts agree only
statistically (the test suite pins both properties). Decisions are made
by the same `DeficitDetector` the simulator uses, fed through its bulk
`ingest_counts` path.
"""

from __future__ import annotations

import zlib
from collections import deque

from ..topology import Topology, up_id, down_id
from ..spray import flow_spray_rng, link_drop_rng, QUANTUM
from ..spraycheck import DeficitDetector, DetectorConfig, PathFailureReport

BITS = 8 * 10**9

DATA_PAYLOAD = 4096
DATA_HEADER = 58
ANN_SIZE = DATA_HEADER + 17
ANNOUNCE_COPIES = 2


def measured_flow_counts(
    topo: Topology,
    seed: int,
    qp: int,
    src_host: int,
    dst_host: int,
    n_packets: int,
    payload_bytes: int = DATA_PAYLOAD,
    header_bytes: int = DATA_HEADER,
    announce_copies: int = ANNOUNCE_COPIES,
    policy: str = "usage",
) -> tuple[dict[int, int], int]:
    """Per-spine arrival counts of one prioritized measured flow.

    Returns (counts at the destination leaf, packets dropped in the
    fabric). Dropped packets are retransmitted with fresh spray decisions
    until everything is delivered, like the selective-repeat transport
    does; drops on a retransmission re-queue it again.

    policy selects the spray rule: "usage" (default) is the two-choice
    comparison on cumulative bytes the measurement plane uses; "uniform"
    is plain random spraying, kept for calibration comparisons.
    """
    if policy not in ("usage", "uniform"):
        raise ValueError(f"unknown spray policy: {policy}")
    uniform = policy == "uniform"
    src_leaf = topo.leaf_of_host(src_host)
    dst_leaf = topo.leaf_of_host(dst_host)
    cands = topo.usable_spines(src_leaf, dst_leaf)
    nc = len(cands)
    if nc == 0:
        raise ValueError("no usable spines between the leaves")
    size = payload_bytes + header_bytes

    rng = flow_spray_rng(seed, qp * 2)
    r = rng.random
    if nc > 1:
        # announcement copies ride the occupancy-spray path first and
        # consume two draws each
        for _ in range(2 * announce_copies):
            r()

    # per-candidate drop state, indexed by position to keep the loop tight
    up_rate = []
    dn_rate = []
    up_draw = []
    dn_draw = []
    for s in cands:
        ul = topo.links[up_id(src_leaf, s)]
        dl = topo.links[down_id(s, dst_leaf)]
        up_rate.append(ul.drop_rate)
        dn_rate.append(dl.drop_rate)
        up_draw.append(link_drop_rng(seed, zlib.crc32(ul.link_id.encode())).random
                       if ul.drop_rate else None)
        dn_draw.append(link_drop_rng(seed, zlib.crc32(dl.link_id.encode())).random
                       if dl.drop_rate else None)
    any_loss = any(up_rate) or any(dn_rate)

    usage = [0] * nc
    counts = [0] * nc
    dropped = 0

    if nc == 1:
        # single usable path: no draws at all, everything lands on it
        counts[0] = n_packets
        if any_loss:
            ud, dd = up_draw[0], dn_draw[0]
            pend = n_packets
            counts[0] = 0
            while pend:
                if ud is not None and ud() < up_rate[0]:
                    dropped += 1
                    continue
                if dd is not None and dd() < dn_rate[0]:
                    dropped += 1
                    continue
                counts[0] += 1
                pend -= 1
        return {cands[i]: counts[i] for i in range(nc)}, dropped

    pend = deque(range(n_packets)) if any_loss else None
    if not any_loss:
        # pure placement: po2c on cumulative usage
        for _ in range(n_packets):
            i = int(r() * nc)
            if not uniform:
                j = int(r() * nc)
                if usage[j] < usage[i]:
                    i = j
                usage[i] += size
            counts[i] += 1
    else:
        while pend:
            pend.popleft()
            i = int(r() * nc)
            if not uniform:
                j = int(r() * nc)
                if usage[j] < usage[i]:
                    i = j
                usage[i] += size
            ud = up_draw[i]
            if ud is not None and ud() < up_rate[i]:
                dropped += 1
                pend.append(-1)
                continue
            dd = dn_draw[i]
            if dd is not None and dd() < dn_rate[i]:
                dropped += 1
                pend.append(-1)
                continue
            counts[i] += 1
    return {cands[i]: counts[i] for i in range(nc)}, dropped


def detect_flow(
    topo: Topology,
    seed: int,
    qp: int,
    src_host: int,
    dst_host: int,
    n_packets: int,
    det_cfg: DetectorConfig,
    now: int = 0,
) -> tuple[list[PathFailureReport], dict[int, int]]:
    """Run one measured flow through the accelerated path and hand its
    counters to a fresh destination-leaf detector. Returns (reports,
    counts)."""
    src_leaf = topo.leaf_of_host(src_host)
    dst_leaf = topo.leaf_of_host(dst_host)
    counts, dropped = measured_flow_counts(topo, seed, qp, src_host, dst_host, n_packets)
    det = DeficitDetector(dst_leaf, det_cfg)
    spines = topo.usable_spines(src_leaf, dst_leaf)
    reports = det.ingest_counts(qp, n_packets, src_leaf, spines, counts,
                                now, nacks=dropped)
    return reports, counts


def spray_study_counts(
    seed: int,
    qp: int,
    n_spines: int,
    n_packets: int,
    policy: str,
    host_rate_bps: int = 800 * 10**9,
    fabric_rate_bps: int = 100 * 10**9,
    prop_ns: int = 500,
    payload_bytes: int = DATA_PAYLOAD,
    header_bytes: int = DATA_HEADER,
    announce_lead_ns: int = 3_000,
    announce_gap_ns: int = 200,
    announce_copies: int = ANNOUNCE_COPIES,
) -> list[int]:
    """Spine choice counts of one unprioritized flow under a user-plane
    spray policy, with uplink service windows modeled arithmetically.

    Mirrors the event simulator's arithmetic exactly for the
    single-flow-on-idle-fabric case: packet arrival times follow the host
    pacing chain, and a packet occupies its chosen uplink (full size)
    from arrival until its serialization there completes. The simulator
    equivalence test pins this claim.
    """
    size = payload_bytes + header_bytes
    ser_host = size * BITS // host_rate_bps
    ser_up = size * BITS // fabric_rate_bps
    ann_ser_host = ANN_SIZE * BITS // host_rate_bps
    ann_ser_up = ANN_SIZE * BITS // fabric_rate_bps
    pace = ser_host

    rng = flow_spray_rng(seed, qp * 2)
    r = rng.random
    n = n_spines

    clear = [0] * n          # when each uplink finishes everything placed on it
    occ_end: list[deque] = [deque() for _ in range(n)]
    occ_bytes = [0] * n
    counts = [0] * n

    def occupancy(i: int, t: int) -> int:
        dq = occ_end[i]
        while dq and dq[0][0] <= t:
            occ_bytes[i] -= dq.popleft()[1]
        return occ_bytes[i]

    def choose(t: int) -> int:
        if policy == "uniform":
            return int(r() * n)
        if policy == "po2c":
            i = int(r() * n)
            j = int(r() * n)
            if occupancy(j, t) < occupancy(i, t):
                i = j
            return i
        if policy == "quantized":
            occs = [occupancy(i, t) for i in range(n)]
            lo = min(occs) // QUANTUM
            picks = [i for i in range(n) if occs[i] // QUANTUM == lo]
            return picks[int(r() * len(picks))]
        raise ValueError(f"unknown spray policy: {policy}")

    def place(i: int, t: int, ser: int, sz: int) -> None:
        start = clear[i] if clear[i] > t else t
        end = start + ser
        clear[i] = end
        occ_end[i].append((end, sz))
        occ_bytes[i] += sz

    # announcement copies go out first, at host time 0 and the gap
    host_free = 0
    for cpy in range(announce_copies):
        at = cpy * announce_gap_ns
        tx = at if at > host_free else host_free
        host_free = tx + ann_ser_host
        t_arr = tx + ann_ser_host + prop_ns
        place(choose(t_arr), t_arr, ann_ser_up, ANN_SIZE)

    # paced data stream
    for k in range(n_packets):
        emit = announce_lead_ns + k * pace
        tx = emit if emit > host_free else host_free
        host_free = tx + ser_host
        t_arr = tx + ser_host + prop_ns
        i = choose(t_arr)
        counts[i] += 1
        place(i, t_arr, ser_up, size)
    return counts
