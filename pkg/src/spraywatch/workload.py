"""Workload builders and the flow-announcement wire format.

Flows are declared as FlowSpec records the simulator consumes. Builders
here cover the traffic patterns the experiments need: neighbor rings as a
stand-in for ring collectives, random permutations, and constant-rate
background flows for bisection load.

Announcements are tiny control packets sent ahead of a flow so switches
on the path can set up per-flow accounting without touching the data path.
The payload is a fixed 17-byte struct; switches snoop it in flight.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field

ANNOUNCE_VERSION = 1
ANNOUNCE_FMT = ">BIQHH"      # version, qp, flow bytes, src leaf, dst host
ANNOUNCE_LEN = struct.calcsize(ANNOUNCE_FMT)   # 17


def encode_announcement(qp: int, flow_bytes: int, src_leaf: int, dst_host: int) -> bytes:
    return struct.pack(ANNOUNCE_FMT, ANNOUNCE_VERSION, qp, flow_bytes, src_leaf, dst_host)


@dataclass
class Announcement:
    version: int
    qp: int
    flow_bytes: int
    src_leaf: int
    dst_host: int


def decode_announcement(payload: bytes) -> Announcement:
    if len(payload) != ANNOUNCE_LEN:
        raise ValueError(f"announcement must be {ANNOUNCE_LEN} bytes, got {len(payload)}")
    v, qp, fb, sl, dh = struct.unpack(ANNOUNCE_FMT, payload)
    if v != ANNOUNCE_VERSION:
        raise ValueError(f"unknown announcement version {v}")
    return Announcement(v, qp, fb, sl, dh)


@dataclass
class FlowSpec:
    qp: int
    src_host: int
    dst_host: int
    n_packets: int
    start_ns: int = 0
    rate_bps: int | None = None      # None = pace at the host link rate
    prio: int = 3
    measure_eligible: bool = True
    start_after: tuple[int, ...] = ()  # qps that must complete first


def ring_flows(
    n_ranks: int,
    pair_bytes: int,
    *,
    qps_per_pair: int = 2,
    payload_bytes: int = 4096,
    hosts: list[int] | None = None,
    start_ns: int = 0,
    qp_base: int = 1,
    rounds: int = 1,
    prio: int = 3,
) -> list[FlowSpec]:
    """Neighbor-ring traffic: rank i streams to rank (i+1) % n.

    Each neighbor pair moves pair_bytes, split evenly over qps_per_pair
    queue pairs. With rounds > 1 consecutive rounds are barrier-separated:
    every flow of round r starts only after all flows of round r-1
    completed, which is how iterative collectives behave.
    """
    if hosts is None:
        hosts = list(range(n_ranks))
    if len(hosts) != n_ranks:
        raise ValueError("hosts list must match n_ranks")
    per_flow = pair_bytes // qps_per_pair
    n_packets = per_flow // payload_bytes
    if n_packets < 1:
        raise ValueError("pair_bytes too small for one packet per qp")
    flows: list[FlowSpec] = []
    qp = qp_base
    prev_round: tuple[int, ...] = ()
    for r in range(rounds):
        this_round = []
        for i in range(n_ranks):
            src = hosts[i]
            dst = hosts[(i + 1) % n_ranks]
            for _ in range(qps_per_pair):
                flows.append(FlowSpec(
                    qp=qp, src_host=src, dst_host=dst, n_packets=n_packets,
                    start_ns=start_ns, prio=prio, start_after=prev_round,
                ))
                this_round.append(qp)
                qp += 1
        prev_round = tuple(this_round)
    return flows


def permutation_flows(
    n_hosts: int,
    flow_bytes: int,
    seed: int,
    *,
    payload_bytes: int = 4096,
    start_ns: int = 0,
    jitter_ns: int = 0,
    qp_base: int = 1,
    prio: int = 3,
) -> list[FlowSpec]:
    """Random permutation: every host sends one flow, nobody to itself."""
    rng = random.Random(seed)
    targets = list(range(n_hosts))
    rng.shuffle(targets)
    for i in range(n_hosts):
        if targets[i] == i:
            j = (i + 1) % n_hosts
            targets[i], targets[j] = targets[j], targets[i]
    n_packets = max(flow_bytes // payload_bytes, 1)
    flows = []
    for i in range(n_hosts):
        start = start_ns + (rng.randrange(jitter_ns) if jitter_ns else 0)
        flows.append(FlowSpec(
            qp=qp_base + i, src_host=i, dst_host=targets[i],
            n_packets=n_packets, start_ns=start, prio=prio,
        ))
    return flows


def bisection_flow(
    qp: int,
    src_host: int,
    dst_host: int,
    rate_bps: int,
    duration_ns: int,
    *,
    wire_bytes: int = 4154,
    payload_bytes: int = 4096,
    start_ns: int = 0,
    prio: int = 1,
) -> FlowSpec:
    """Constant-rate filler flow sized to run for roughly duration_ns.

    wire_bytes is the on-the-wire packet size (payload + headers); the
    packet count comes from the byte budget rate * duration.
    """
    budget_bytes = rate_bps * duration_ns // (8 * 10**9)
    n_packets = max(int(budget_bytes // wire_bytes), 1)
    return FlowSpec(
        qp=qp, src_host=src_host, dst_host=dst_host, n_packets=n_packets,
        start_ns=start_ns, rate_bps=rate_bps, prio=prio,
        measure_eligible=False,
    )


def bisection_traffic(
    hosts_a: list[int],
    hosts_b: list[int],
    rate_bps: int,
    duration_ns: int,
    *,
    qp_base: int = 9000,
    both_ways: bool = True,
    **kw,
) -> list[FlowSpec]:
    """Pairwise filler between two host groups (a[i] <-> b[i])."""
    if len(hosts_a) != len(hosts_b):
        raise ValueError("host groups must pair up")
    flows = []
    qp = qp_base
    for a, b in zip(hosts_a, hosts_b):
        flows.append(bisection_flow(qp, a, b, rate_bps, duration_ns, **kw))
        qp += 1
        if both_ways:
            flows.append(bisection_flow(qp, b, a, rate_bps, duration_ns, **kw))
            qp += 1
    return flows
