"""Packet-level event simulator for the leaf/spine fabric.

Integer-nanosecond event engine on a binary heap. Store-and-forward
switches with eight strict-priority levels per output port, per-packet
spraying at the source leaf, a selective-repeat transport with
nack-driven retransmission, and a simplified ECN/rate-control loop.

Scale notes, since experiments push hundreds of millions of packets
through this on one core:

  * A delivered data packet on an uncongested path costs two heap
    events: sender emit and arrival at the source leaf. When an output
    port is idle with an empty queue, the hop is served synchronously
    ("fused"): the service window is reserved on the port and the packet
    moves straight to the next hop at its computed departure time, so
    the up/down/host-link departures never touch the heap. The moment a
    port has anything queued or in committed service, fusion stops and
    honest per-packet queueing takes over, which is exactly the regime
    where timing matters.
  * Ports otherwise commit the next service at enqueue/departure time
    and schedule the departure directly ("commit-at-enqueue"). Both the
    commitment and the fused reservation can run ahead of a packet that
    shows up during the in-flight window; the resulting priority or
    FIFO inversion is bounded by roughly one path time (a few
    microseconds) and does not survive into any counted statistic.
  * A fused reservation stays visible to the queue-occupancy signal
    (busy_until/cur_size on the port), so adaptive spraying sees
    in-service packets the same way it would with real queue objects.
  * Host NICs are arithmetic (a free-time watermark), not event objects.

Failure model: a link can be administratively disabled (spray avoids it)
or carry a gray drop rate (spray cannot see it; packets die in flight).
Drops happen at departure, after serialization, which places them
correctly relative to the counting points: an uplink/downlink drop is
never counted at the destination leaf, a host-link drop happens after
leaf counting, which is exactly why host-link failures need their own
checks.
"""

from __future__ import annotations

import json
import zlib
from collections import deque
from dataclasses import dataclass, field
from heapq import heappush, heappop

from .topology import Topology, up_id, down_id, h2l_id, l2h_id
from .spray import spray_select, flow_spray_rng, link_drop_rng
from .spraycheck import (
    MeasureSelector, DeficitDetector, DetectorConfig, CONTROL_PRIO, MEASURE_PRIO,
)
from .workload import FlowSpec, encode_announcement, decode_announcement

# packet kinds
DATA = 0
ACK = 1
NACK = 2
CNP = 3
ANN = 4

# event kinds
EV_EMIT = 0
EV_ARRIVE_LEAF = 1
EV_DEPART = 2
EV_FLOW_START = 3
EV_RTIMER = 4
EV_STIMER = 5
EV_RECOVER = 6
EV_LINK = 7
EV_EPOCH = 8
EV_SAMPLE = 9

NS = 10**9
BITS = 8 * NS   # bytes -> ns numerator at rate in bit/s
_PRIO_SCAN = (7, 6, 5, 4, 3, 2, 1, 0)


@dataclass
class SimConfig:
    payload_bytes: int = 4096
    header_bytes: int = 58
    ctl_bytes: int = 64
    # transport
    window_packets: int = 128
    reorder_slack: int = 64
    nack_batch: int = 64
    nack_repeat_ns: int = 200_000
    tail_timeout_ns: int = 100_000
    probe_timeout_ns: int = 300_000
    ack_every: int = 8
    # congestion control
    dcqcn: bool = True
    ecn_threshold_bytes: int = 131_072
    cnp_interval_ns: int = 50_000
    min_rate_bps: int = 2_000_000_000
    recover_add_bps: int = 5_000_000_000
    recover_interval_ns: int = 100_000
    # announcements
    announce_copies: int = 2
    announce_gap_ns: int = 200
    announce_lead_ns: int = 3_000
    # measurement plane
    detector_enabled: bool = True
    measurement_signal: str = "usage"    # "usage" | "occupancy"
    prioritize_measured: bool = True
    spray_policy: str = "po2c"
    epoch_ns: int = 60_000_000_000
    rr_wrap: bool = True
    # run control
    horizon_ns: int | None = None
    max_events: int | None = None
    port_sample_interval_ns: int = 0
    count_spray: bool = False

    @property
    def data_bytes(self) -> int:
        return self.payload_bytes + self.header_bytes

    @property
    def ann_bytes(self) -> int:
        return self.header_bytes + 17


class Packet:
    __slots__ = ("kind", "qp", "psn", "size", "prio", "src", "dst", "n",
                 "spine", "measured", "ecn", "payload")

    def __init__(self, kind, qp, psn, size, prio, src, dst, n=0, payload=None):
        self.kind = kind
        self.qp = qp
        self.psn = psn
        self.size = size
        self.prio = prio
        self.src = src
        self.dst = dst
        self.n = n
        self.spine = -1
        self.measured = False
        self.ecn = False
        self.payload = payload


class Port:
    __slots__ = ("link", "kind", "rate_bps", "prop_ns", "queues", "qbytes",
                 "total_bytes", "busy_until", "serving", "cur_prio",
                 "fused_end", "fused_size", "fused_prio",
                 "drop_rng", "ser_cache", "tx_packets", "tx_bytes", "dropped")

    def __init__(self, link, seed):
        self.link = link
        self.kind = link.kind
        self.rate_bps = link.rate_bps
        self.prop_ns = link.prop_ns
        self.queues = tuple(deque() for _ in range(8))
        self.qbytes = [0] * 8
        self.total_bytes = 0
        self.busy_until = 0
        self.serving = False
        self.cur_prio = 0
        # the service window of the most recent fused hop; packets served
        # that way never sit in qbytes, so occupancy readers add this back
        # while the window is open
        self.fused_end = 0
        self.fused_size = 0
        self.fused_prio = 0
        self.drop_rng = link_drop_rng(seed, zlib.crc32(link.link_id.encode()))
        self.ser_cache: dict[int, int] = {}
        self.tx_packets = 0
        self.tx_bytes = 0
        self.dropped = 0


class _Flow:
    __slots__ = ("spec", "n", "next_new", "retx", "retx_set", "emitted",
                 "n_recv_known", "done", "emitting", "rate_bps", "base_rate",
                 "pace_ns", "recover_armed", "sel_tried", "started",
                 "t_start", "t_done", "retransmits", "drops", "cnps",
                 "probe_armed", "probe_known", "dup_delivered")

    def __init__(self, spec: FlowSpec):
        self.spec = spec
        self.n = spec.n_packets
        self.next_new = 0
        self.retx = deque()
        self.retx_set = set()
        self.emitted = 0
        self.n_recv_known = 0
        self.done = False
        self.emitting = False
        self.rate_bps = 0
        self.base_rate = 0
        self.pace_ns = 0
        self.recover_armed = False
        self.sel_tried = False
        self.started = False
        self.t_start = -1
        self.t_done = -1
        self.retransmits = 0
        self.drops = 0
        self.cnps = 0
        self.probe_armed = False
        self.probe_known = -1
        self.dup_delivered = 0


class _Recv:
    __slots__ = ("qp", "n", "next_missing", "got", "n_received", "max_seen",
                 "max_reorder", "nacked", "last_cnp", "completed",
                 "tail_deadline", "tail_armed", "nacks_sent", "last_dup_ack")

    def __init__(self, qp, n):
        self.qp = qp
        self.n = n
        self.next_missing = 0
        self.got = set()
        self.n_received = 0
        self.max_seen = -1
        self.max_reorder = 0
        self.nacked = {}
        self.last_cnp = -(1 << 60)
        self.completed = False
        self.tail_deadline = 0
        self.tail_armed = False
        self.nacks_sent = 0
        self.last_dup_ack = -(1 << 60)


class ScenarioError(RuntimeError):
    pass


@dataclass
class SimTrace:
    """Run summary: per-flow records, detector output, port stats."""
    seed: int
    final_ns: int = 0
    events: int = 0
    flows: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)
    access_findings: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    port_rows: list = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    spray_counts: dict = field(default_factory=dict)

    def collective_cct_ns(self, qps=None) -> int:
        recs = [r for qp, r in self.flows.items() if qps is None or qp in qps]
        if not recs or any(r["t_done"] < 0 for r in recs):
            raise ScenarioError("collective did not complete")
        return max(r["t_done"] for r in recs) - min(r["start_ns"] for r in recs)

    def to_json(self, path) -> None:
        doc = {
            "seed": self.seed,
            "final_ns": self.final_ns,
            "events": self.events,
            "totals": self.totals,
            "flows": {str(k): v for k, v in self.flows.items()},
            "reports": self.reports,
            "access_findings": self.access_findings,
            "samples": self.samples,
        }
        with open(path, "w") as f:
            json.dump(doc, f, indent=1)

    def write_ports_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("time_ns,port,packets,bytes\n")
            for row in self.port_rows:
                f.write("%d,%s,%d,%d\n" % row)


class Sim:
    def __init__(self, topo: Topology, flows: list[FlowSpec],
                 cfg: SimConfig | None = None,
                 det_cfg: DetectorConfig | None = None,
                 seed: int = 0,
                 link_events: list[tuple[int, str, bool | None, float | None]] | None = None):
        self.topo = topo
        self.cfg = cfg or SimConfig()
        self.det_cfg = det_cfg or DetectorConfig()
        self.seed = seed
        self.now = 0
        self.heap: list = []
        self.seq = 0
        self.events = 0

        c = self.cfg
        self.data_size = c.data_bytes
        self.ports: dict[str, Port] = {}
        for lid, link in topo.links.items():
            if link.kind != "h2l":
                self.ports[lid] = Port(link, seed)
        self.up_ports = [[self.ports[up_id(l, s)] for s in range(topo.n_spines)]
                         for l in range(topo.n_leaves)]
        self.down_ports = [[self.ports[down_id(s, l)] for l in range(topo.n_leaves)]
                           for s in range(topo.n_spines)]
        self.l2h_ports = {h: self.ports[l2h_id(topo.leaf_of_host(h), h)]
                          for h in range(topo.n_hosts)}
        self.h2l_links = {h: topo.links[h2l_id(topo.leaf_of_host(h), h)]
                          for h in range(topo.n_hosts)}
        self.h2l_rng = {h: link_drop_rng(seed, zlib.crc32(self.h2l_links[h].link_id.encode()))
                        for h in range(topo.n_hosts)}

        self.host_free = [0] * topo.n_hosts
        self.host_leaf = [topo.leaf_of_host(h) for h in range(topo.n_hosts)]
        self.selectors = [MeasureSelector(l, topo.n_leaves, c.epoch_ns, c.rr_wrap)
                          for l in range(topo.n_leaves)]
        self.detectors = [DeficitDetector(l, self.det_cfg) for l in range(topo.n_leaves)]
        # cumulative bytes the measurement class placed per (src leaf, dst leaf, spine)
        self.usage = [[[0] * topo.n_spines for _ in range(topo.n_leaves)]
                      for _ in range(topo.n_leaves)]

        self.flows: dict[int, _Flow] = {}
        self.recvs: dict[int, _Recv] = {}
        self.fwd_rng = {}
        self.rev_rng = {}
        self.dep_count: dict[int, int] = {}
        self.dependents: dict[int, list[int]] = {}
        self.unfinished = 0
        self.topo_version = 0
        self._usable_cache: dict[tuple[int, int], tuple[int, ...]] = {}

        self.det_on = c.detector_enabled
        self.meas_usage = c.prioritize_measured and c.measurement_signal == "usage"
        self.count_spray = c.count_spray
        self.spray_counts: dict[int, list[int]] = {}
        self.last_activity = 0
        self.emitted_data = 0
        self.delivered_new = 0
        self.delivered_dup = 0
        self.dropped_data = 0
        self.unroutable = 0

        qps = set()
        for spec in flows:
            if spec.qp in qps:
                raise ScenarioError(f"duplicate qp {spec.qp}")
            qps.add(spec.qp)
            fl = _Flow(spec)
            host_rate = self.h2l_links[spec.src_host].rate_bps
            fl.base_rate = int(min(spec.rate_bps or host_rate, host_rate))
            fl.rate_bps = fl.base_rate
            fl.pace_ns = self.data_size * BITS // fl.rate_bps
            self.flows[spec.qp] = fl
            self.recvs[spec.qp] = _Recv(spec.qp, spec.n_packets)
            self.fwd_rng[spec.qp] = flow_spray_rng(seed, spec.qp * 2)
            self.rev_rng[spec.qp] = flow_spray_rng(seed, spec.qp * 2 + 1)
            if c.count_spray:
                self.spray_counts[spec.qp] = [0] * topo.n_spines
            self.unfinished += 1
            deps = [q for q in spec.start_after]
            if deps:
                self.dep_count[spec.qp] = len(deps)
                for d in deps:
                    self.dependents.setdefault(d, []).append(spec.qp)
            else:
                self._push(spec.start_ns, EV_FLOW_START, spec.qp)

        for ev in link_events or []:
            t, lid, enabled, drop = ev
            self._push(t, EV_LINK, (lid, enabled, drop))

        if c.detector_enabled and c.epoch_ns:
            self._push(c.epoch_ns, EV_EPOCH, 0)
        if c.port_sample_interval_ns:
            self._push(c.port_sample_interval_ns, EV_SAMPLE, 0)
        self.trace = SimTrace(seed=seed)

    # -- plumbing ------------------------------------------------------------

    def _push(self, t: int, kind: int, arg) -> None:
        heappush(self.heap, (t, self.seq, kind, arg))
        self.seq += 1

    def _usable(self, src_leaf: int, dst_leaf: int) -> tuple[int, ...]:
        key = (src_leaf, dst_leaf)
        got = self._usable_cache.get(key)
        if got is None:
            got = self.topo.usable_spines(src_leaf, dst_leaf)
            self._usable_cache[key] = got
        return got

    # -- port service --------------------------------------------------------

    def _enqueue(self, port: Port, prio: int, ts: int, pkt: Packet) -> None:
        if not port.total_bytes and not port.serving and port.busy_until <= ts:
            # idle wire, empty queue: serve synchronously (fused hop)
            ser = port.ser_cache.get(pkt.size)
            if ser is None:
                ser = pkt.size * BITS // port.rate_bps
                port.ser_cache[pkt.size] = ser
            until = ts + ser
            port.busy_until = until
            port.fused_end = until
            port.fused_size = pkt.size
            port.fused_prio = prio
            self._forward(port, pkt, until)
            return
        if port.total_bytes > self.cfg.ecn_threshold_bytes:
            pkt.ecn = True
        port.queues[prio].append((ts, pkt))
        port.qbytes[prio] += pkt.size
        port.total_bytes += pkt.size
        if not port.serving:
            self._commit(port)

    def _commit(self, port: Port) -> None:
        qb = port.qbytes
        for prio in _PRIO_SCAN:
            if qb[prio]:
                ts0, pkt = port.queues[prio][0]
                start = ts0 if ts0 > port.busy_until else port.busy_until
                ser = port.ser_cache.get(pkt.size)
                if ser is None:
                    ser = pkt.size * BITS // port.rate_bps
                    port.ser_cache[pkt.size] = ser
                until = start + ser
                port.busy_until = until
                port.serving = True
                port.cur_prio = prio
                heappush(self.heap, (until, self.seq, EV_DEPART, port))
                self.seq += 1
                return

    def _occupancy(self, port: Port, min_prio: int) -> int:
        occ = sum(port.qbytes[min_prio:])
        if port.fused_end > self.now and port.fused_prio >= min_prio:
            occ += port.fused_size
        return occ

    # -- event loop ------------------------------------------------------------

    def run(self) -> SimTrace:
        heap = self.heap
        cfg = self.cfg
        horizon = cfg.horizon_ns
        max_events = cfg.max_events
        n_ev = 0
        while heap:
            t, _, kind, arg = heappop(heap)
            self.now = t
            if horizon is not None and t > horizon:
                break
            n_ev += 1
            if max_events is not None and n_ev > max_events:
                raise ScenarioError("event budget exhausted")
            if kind == EV_DEPART:
                self._depart(arg)
            elif kind == EV_ARRIVE_LEAF:
                self._arrive_leaf(arg)
            elif kind == EV_EMIT:
                self._emit(arg)
            elif kind == EV_FLOW_START:
                self._flow_start(arg)
            elif kind == EV_RTIMER:
                self._rtimer(arg)
            elif kind == EV_STIMER:
                self._stimer(arg)
            elif kind == EV_RECOVER:
                self._recover(arg)
            elif kind == EV_LINK:
                self._apply_link(arg)
            elif kind == EV_EPOCH:
                if self.unfinished:
                    for sel in self.selectors:
                        sel.epoch_reset(t)
                    self._push(t + cfg.epoch_ns, EV_EPOCH, 0)
            elif kind == EV_SAMPLE:
                self._sample_ports(t)
                if self.unfinished:
                    self._push(t + cfg.port_sample_interval_ns, EV_SAMPLE, 0)
        self.events = n_ev
        if self.unfinished and horizon is None:
            raise ScenarioError(
                f"{self.unfinished} flows stuck with an empty event queue")
        return self._build_trace()

    # -- handlers ------------------------------------------------------------

    def _flow_start(self, qp: int) -> None:
        fl = self.flows[qp]
        spec = fl.spec
        fl.started = True
        fl.t_start = self.now
        src_leaf = self.topo.leaf_of_host(spec.src_host)
        dst_leaf = self.topo.leaf_of_host(spec.dst_host)
        cfg = self.cfg
        if dst_leaf != src_leaf:
            if not self._usable(src_leaf, dst_leaf):
                # with no usable spine the transport would retry forever;
                # a scenario that starts a flow into a partition is broken
                raise ScenarioError(
                    f"qp {qp}: no usable spine from leaf {src_leaf} "
                    f"to leaf {dst_leaf}")
            payload = encode_announcement(
                qp, spec.n_packets * cfg.payload_bytes, src_leaf, spec.dst_host)
            for cpy in range(cfg.announce_copies):
                pkt = Packet(ANN, qp, 0, cfg.ann_bytes, CONTROL_PRIO,
                             spec.src_host, spec.dst_host, spec.n_packets, payload)
                self._host_tx(spec.src_host, pkt, self.now + cpy * cfg.announce_gap_ns)
        self._push(self.now + cfg.announce_lead_ns, EV_EMIT, qp)
        fl.emitting = True

    def _host_tx(self, host: int, pkt: Packet, at: int) -> bool:
        """Serialize a packet out of a host NIC; returns False if it died
        on the access link."""
        link = self.h2l_links[host]
        tx = at if at > self.host_free[host] else self.host_free[host]
        ser = pkt.size * BITS // link.rate_bps
        self.host_free[host] = tx + ser
        if not link.enabled or (link.drop_rate and
                                self.h2l_rng[host].random() < link.drop_rate):
            if pkt.kind == DATA:
                self.flows[pkt.qp].drops += 1
                self.dropped_data += 1
            return False
        self._push(tx + ser + link.prop_ns, EV_ARRIVE_LEAF, pkt)
        return True

    def _emit(self, qp: int) -> None:
        fl = self.flows[qp]
        if fl.done:
            fl.emitting = False
            return
        spec = fl.spec
        if fl.retx:
            psn = fl.retx.popleft()
            fl.retx_set.discard(psn)
            fl.retransmits += 1
        elif (fl.next_new < fl.n and
              fl.next_new - fl.n_recv_known < self.cfg.window_packets):
            psn = fl.next_new
            fl.next_new += 1
        else:
            fl.emitting = False
            if fl.next_new >= fl.n and not fl.probe_armed:
                fl.probe_armed = True
                fl.probe_known = fl.n_recv_known
                self._push(self.now + self.cfg.probe_timeout_ns, EV_STIMER, qp)
            return
        pkt = Packet(DATA, qp, psn, self.data_size, spec.prio,
                     spec.src_host, spec.dst_host, fl.n)
        fl.emitted += 1
        self.emitted_data += 1
        self._host_tx(spec.src_host, pkt, self.now)
        self._push(self.now + fl.pace_ns, EV_EMIT, qp)

    def _arrive_leaf(self, pkt: Packet) -> None:
        """A packet is fully received at the leaf of its emitting host."""
        leaf = self.host_leaf[pkt.src]
        dst_leaf = self.host_leaf[pkt.dst]
        cfg = self.cfg
        kind = pkt.kind
        prio = pkt.prio
        if kind == DATA:
            fl = self.flows[pkt.qp]
            # selection and prioritization are forwarding-plane policy and
            # stay active whether or not anyone reads the counters
            if fl.spec.measure_eligible and dst_leaf != leaf:
                sel = self.selectors[leaf]
                if not fl.sel_tried:
                    fl.sel_tried = True
                    sel.select_next_flow(pkt.qp, dst_leaf, self.now)
                if sel.current == pkt.qp:
                    pkt.measured = True
                    if cfg.prioritize_measured:
                        prio = MEASURE_PRIO
        elif kind == ANN:
            self.selectors[leaf].on_announcement_at_source(dst_leaf, self.now)
        elif kind == NACK:
            if self.det_on:
                self.detectors[leaf].on_nack_seen(pkt.qp, pkt.n, self.now)

        if dst_leaf == leaf:
            self._enqueue(self.l2h_ports[pkt.dst], pkt.prio, self.now, pkt)
            return
        cands = self._usable(leaf, dst_leaf)
        nc = len(cands)
        if not nc:
            self.unroutable += 1
            if kind == DATA:
                self.flows[pkt.qp].drops += 1
                self.dropped_data += 1
            return
        if nc == 1:
            spine = cands[0]
        elif cfg.spray_policy != "po2c":
            rng = self.rev_rng[pkt.qp] if kind in (ACK, NACK, CNP) else self.fwd_rng[pkt.qp]
            if pkt.measured and self.meas_usage:
                uvec = self.usage[leaf][dst_leaf]
                occ = [uvec[s] for s in cands]
            else:
                ups = self.up_ports[leaf]
                occ = [self._occupancy(ups[s], prio) for s in cands]
            spine = spray_select(cfg.spray_policy, cands, occ, rng)
        elif pkt.measured and self.meas_usage:
            # hot path: po2c on cumulative usage, inlined
            r = self.fwd_rng[pkt.qp].random
            uvec = self.usage[leaf][dst_leaf]
            si = cands[int(r() * nc)]
            sj = cands[int(r() * nc)]
            spine = sj if uvec[sj] < uvec[si] else si
        else:
            # hot path: po2c on instantaneous queue occupancy, inlined
            # (a fused in-service packet counts while its window is open)
            r = (self.rev_rng[pkt.qp] if kind in (ACK, NACK, CNP)
                 else self.fwd_rng[pkt.qp]).random
            now = self.now
            ups = self.up_ports[leaf]
            pi = ups[cands[int(r() * nc)]]
            pj = ups[cands[int(r() * nc)]]
            oi = sum(pi.qbytes[prio:])
            if pi.fused_end > now and pi.fused_prio >= prio:
                oi += pi.fused_size
            oj = sum(pj.qbytes[prio:])
            if pj.fused_end > now and pj.fused_prio >= prio:
                oj += pj.fused_size
            spine = pj.link.dst if oj < oi else pi.link.dst
        if pkt.measured:
            self.usage[leaf][dst_leaf][spine] += pkt.size
        if self.count_spray and kind == DATA:
            self.spray_counts[pkt.qp][spine] += 1
        pkt.spine = spine
        self._enqueue(self.up_ports[leaf][spine], prio, self.now, pkt)

    def _depart(self, port: Port) -> None:
        prio = port.cur_prio
        ts, pkt = port.queues[prio].popleft()
        port.qbytes[prio] -= pkt.size
        port.total_bytes -= pkt.size
        port.serving = False
        self._forward(port, pkt, self.now)
        if port.total_bytes:
            self._commit(port)

    def _forward(self, port: Port, pkt: Packet, t_end: int) -> None:
        """Serialization on `port` finishes at `t_end`: account for the
        transmission, roll the drop dice, and move the packet one hop."""
        if t_end > self.last_activity:
            self.last_activity = t_end
        port.tx_packets += 1
        port.tx_bytes += pkt.size
        link = port.link
        alive = link.enabled
        if alive and link.drop_rate:
            alive = port.drop_rng.random() >= link.drop_rate
        if not alive:
            port.dropped += 1
            if pkt.kind == DATA:
                self.flows[pkt.qp].drops += 1
                self.dropped_data += 1
            return
        pkind = port.kind
        at = t_end + port.prop_ns
        if pkind == "up":
            self._enqueue(self.down_ports[pkt.spine][self.host_leaf[pkt.dst]],
                          pkt.prio, at, pkt)
        elif pkind == "down":
            self._leaf_ingress(pkt, at)
            self._enqueue(self.l2h_ports[pkt.dst], pkt.prio, at, pkt)
        else:  # l2h: delivered to the host
            self._deliver(pkt, at)

    def _leaf_ingress(self, pkt: Packet, at: int) -> None:
        """Snooping done by the destination-side leaf as traffic lands.

        Counter ingest is gated by detector_enabled; the selector state
        machine is forwarding-plane and always runs.
        """
        leaf = self.host_leaf[pkt.dst]
        kind = pkt.kind
        if kind == DATA:
            if pkt.measured and self.det_on:
                self.detectors[leaf].on_marked_packet(pkt.qp, pkt.spine, pkt.psn, at)
        elif kind == ANN:
            if self.det_on:
                a = decode_announcement(pkt.payload)
                n_packets = a.flow_bytes // self.cfg.payload_bytes
                # the spine universe for this flow is what the control
                # plane can see: spines reachable through enabled links on
                # both the source-leaf and destination-leaf sides
                spines = self._usable(a.src_leaf, leaf)
                if spines:
                    self.detectors[leaf].on_announcement(
                        a.qp, n_packets, a.src_leaf, spines, at)
        elif kind == ACK:
            if pkt.n:  # completion flag rides in .n
                self.selectors[leaf].on_completion(pkt.qp, at)

    # -- host logic ------------------------------------------------------------

    def _deliver(self, pkt: Packet, at: int) -> None:
        kind = pkt.kind
        if kind == DATA:
            self._recv_data(pkt, at)
        elif kind == ACK:
            self._sender_ack(pkt, at)
        elif kind == NACK:
            self._sender_nack(pkt, at)
        elif kind == CNP:
            self._sender_cnp(pkt, at)
        # announcements carry nothing for the host

    def _ctl(self, qp: int, kind: int, src: int, dst: int, psn=0, n=0, payload=None) -> Packet:
        return Packet(kind, qp, psn, self.cfg.ctl_bytes, CONTROL_PRIO,
                      src, dst, n, payload)

    def _recv_data(self, pkt: Packet, at: int) -> None:
        rv = self.recvs[pkt.qp]
        spec = self.flows[pkt.qp].spec
        cfg = self.cfg
        psn = pkt.psn
        if rv.completed:
            self.delivered_dup += 1
            self.flows[pkt.qp].dup_delivered += 1
            if at - rv.last_dup_ack > 10_000:
                rv.last_dup_ack = at
                self._host_tx(spec.dst_host,
                              self._ctl(pkt.qp, ACK, spec.dst_host, spec.src_host,
                                        psn=rv.next_missing, n=1,
                                        payload=rv.n_received), at)
            return
        if psn < rv.next_missing or psn in rv.got:
            self.delivered_dup += 1
            self.flows[pkt.qp].dup_delivered += 1
            return
        rv.got.add(psn)
        rv.n_received += 1
        self.delivered_new += 1
        if psn > rv.max_seen:
            rv.max_seen = psn
        else:
            gap = rv.max_seen - psn
            if gap > rv.max_reorder:
                rv.max_reorder = gap
        while rv.next_missing in rv.got:
            rv.got.remove(rv.next_missing)
            rv.next_missing += 1
        if pkt.ecn and cfg.dcqcn and at - rv.last_cnp >= cfg.cnp_interval_ns:
            rv.last_cnp = at
            self._host_tx(spec.dst_host,
                          self._ctl(pkt.qp, CNP, spec.dst_host, spec.src_host), at)
        if rv.max_seen - rv.next_missing > cfg.reorder_slack:
            self._nack_missing(rv, spec, at,
                               rv.max_seen - cfg.reorder_slack)
        if rv.n_received >= rv.n:
            rv.completed = True
            self._host_tx(spec.dst_host,
                          self._ctl(pkt.qp, ACK, spec.dst_host, spec.src_host,
                                    psn=rv.next_missing, n=1,
                                    payload=rv.n_received), at)
            return
        if rv.n_received % cfg.ack_every == 0:
            self._host_tx(spec.dst_host,
                          self._ctl(pkt.qp, ACK, spec.dst_host, spec.src_host,
                                    psn=rv.next_missing, n=0,
                                    payload=rv.n_received), at)
        rv.tail_deadline = at + cfg.tail_timeout_ns
        if not rv.tail_armed:
            rv.tail_armed = True
            self._push(rv.tail_deadline, EV_RTIMER, pkt.qp)

    def _nack_missing(self, rv: _Recv, spec: FlowSpec, at: int, upto: int) -> None:
        cfg = self.cfg
        missing = []
        psn = rv.next_missing
        while psn < upto and len(missing) < cfg.nack_batch:
            if psn not in rv.got and at - rv.nacked.get(psn, -(1 << 60)) >= cfg.nack_repeat_ns:
                missing.append(psn)
                rv.nacked[psn] = at
            psn += 1
        if missing:
            rv.nacks_sent += len(missing)
            self._host_tx(spec.dst_host,
                          self._ctl(rv.qp, NACK, spec.dst_host, spec.src_host,
                                    n=len(missing), payload=tuple(missing)), at)

    def _rtimer(self, qp: int) -> None:
        rv = self.recvs[qp]
        if rv.completed:
            rv.tail_armed = False
            return
        if self.now < rv.tail_deadline:
            self._push(rv.tail_deadline, EV_RTIMER, qp)
            return
        if rv.max_seen >= 0:
            self._nack_missing(rv, self.flows[qp].spec, self.now, rv.n)
        rv.tail_deadline = self.now + self.cfg.tail_timeout_ns
        self._push(rv.tail_deadline, EV_RTIMER, qp)

    def _sender_ack(self, pkt: Packet, at: int) -> None:
        fl = self.flows[pkt.qp]
        delivered = pkt.payload or 0
        if delivered > fl.n_recv_known:
            fl.n_recv_known = delivered
        if pkt.n and not fl.done:   # completion
            fl.done = True
            fl.t_done = at
            self.unfinished -= 1
            for dep in self.dependents.get(pkt.qp, ()):
                self.dep_count[dep] -= 1
                if self.dep_count[dep] == 0:
                    start = max(at, self.flows[dep].spec.start_ns)
                    self._push(start, EV_FLOW_START, dep)
            return
        if not fl.done and not fl.emitting:
            fl.emitting = True
            self._push(at, EV_EMIT, pkt.qp)

    def _sender_nack(self, pkt: Packet, at: int) -> None:
        fl = self.flows[pkt.qp]
        if fl.done:
            return
        for psn in pkt.payload:
            if psn < fl.next_new and psn not in fl.retx_set:
                fl.retx_set.add(psn)
                fl.retx.append(psn)
        if fl.retx and not fl.emitting:
            fl.emitting = True
            self._push(at, EV_EMIT, pkt.qp)

    def _sender_cnp(self, pkt: Packet, at: int) -> None:
        fl = self.flows[pkt.qp]
        cfg = self.cfg
        fl.cnps += 1
        fl.rate_bps = max(fl.rate_bps * 3 // 4, cfg.min_rate_bps)
        fl.pace_ns = self.data_size * BITS // fl.rate_bps
        if not fl.recover_armed:
            fl.recover_armed = True
            self._push(at + cfg.recover_interval_ns, EV_RECOVER, pkt.qp)

    def _recover(self, qp: int) -> None:
        fl = self.flows[qp]
        if fl.done or fl.rate_bps >= fl.base_rate:
            fl.recover_armed = False
            return
        fl.rate_bps = min(fl.rate_bps + self.cfg.recover_add_bps, fl.base_rate)
        fl.pace_ns = self.data_size * BITS // fl.rate_bps
        self._push(self.now + self.cfg.recover_interval_ns, EV_RECOVER, qp)

    def _stimer(self, qp: int) -> None:
        """Sender-side completion probe: if a flow went quiet without the
        completion ack, retransmit the last packet to shake an answer loose."""
        fl = self.flows[qp]
        if fl.done:
            fl.probe_armed = False
            return
        if fl.n_recv_known != fl.probe_known or fl.emitting or fl.retx:
            fl.probe_known = fl.n_recv_known
            self._push(self.now + self.cfg.probe_timeout_ns, EV_STIMER, qp)
            return
        psn = fl.n - 1
        if psn not in fl.retx_set:
            fl.retx_set.add(psn)
            fl.retx.append(psn)
        fl.emitting = True
        self._push(self.now, EV_EMIT, qp)
        self._push(self.now + self.cfg.probe_timeout_ns, EV_STIMER, qp)

    # -- control-plane events ------------------------------------------------

    def _apply_link(self, arg) -> None:
        lid, enabled, drop = arg
        link = self.topo.links[lid]
        if enabled is not None:
            link.enabled = enabled
        if drop is not None:
            link.drop_rate = drop
        self.topo_version += 1
        self._usable_cache.clear()

    def _sample_ports(self, t: int) -> None:
        for lid in sorted(self.ports):
            p = self.ports[lid]
            self.trace.port_rows.append((t, lid, p.tx_packets, p.tx_bytes))

    # -- wrap-up ------------------------------------------------------------

    def _build_trace(self) -> SimTrace:
        tr = self.trace
        tr.final_ns = self.last_activity
        tr.events = self.events
        for qp, fl in self.flows.items():
            tr.flows[qp] = {
                "src": fl.spec.src_host, "dst": fl.spec.dst_host,
                "n_packets": fl.n, "start_ns": fl.t_start,
                "t_done": fl.t_done,
                "cct_ns": (fl.t_done - fl.t_start) if fl.t_done >= 0 else -1,
                "retransmits": fl.retransmits, "drops": fl.drops,
                "cnps": fl.cnps, "dup_delivered": fl.dup_delivered,
                "nacks_recv": self.recvs[qp].nacks_sent,
                "max_reorder": self.recvs[qp].max_reorder,
            }
        if self.spray_counts:
            tr.spray_counts = {qp: list(v) for qp, v in self.spray_counts.items()}
        for det in self.detectors:
            tr.reports.extend(r.to_dict() for r in det.reports)
            tr.access_findings.extend(a.to_dict() for a in det.access_findings)
            for s in det.samples:
                tr.samples.append({
                    "qp": s.qp, "src_leaf": s.src_leaf, "dst_leaf": s.dst_leaf,
                    "n_packets": s.n_packets, "k": s.k,
                    "counters": {str(k): v for k, v in sorted(s.counters.items())},
                    "finalized_ns": s.finalized_ns,
                    "missed": s.missed,
                })
        self._sample_ports(self.now)
        tr.totals = {
            "emitted_data": self.emitted_data,
            "delivered_new": self.delivered_new,
            "delivered_dup": self.delivered_dup,
            "dropped_data": self.dropped_data,
            "unroutable": self.unroutable,
            "fabric_bytes": sum(p.tx_bytes for p in self.ports.values()),
            "fabric_packets": sum(p.tx_packets for p in self.ports.values()),
        }
        return tr


def run_scenario(topo, flows, cfg=None, det_cfg=None, seed=0, link_events=None) -> SimTrace:
    """One-call convenience: build, run, return the trace."""
    return Sim(topo, flows, cfg, det_cfg, seed, link_events).run()
