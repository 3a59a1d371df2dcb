"""Passive spray-balance checking.

The idea: when a flow's packets are sprayed evenly over k spines, the
destination leaf should see about n/k of them per spine. A lossy (gray)
link starves exactly the spines behind it, so a per-spine count falling
short of a statistical lower bound is evidence of a path failure, with no
probe traffic spent.

Pieces, bottom of file upward:

  compute_threshold / weighted_thresholds
      the lower bound t = floor(lam - s*sqrt(lam)) per spine, lam = n/k
      (or lam_i = w_i * n when spines are weighted unevenly).
  MeasureSelector
      per source leaf; picks at most one in-flight flow per destination
      leaf to mark and lift to the measurement priority, round-robin over
      destinations, driven by snooped announcements and completion acks.
  DeficitDetector
      per destination leaf; builds per-spine counters for marked flows,
      finalizes on the last sequence number, optionally pools flows from
      the same source leaf until enough packets accumulated, then compares
      counts against the threshold and emits PathFailureReport records.
      Also keeps receiver-side state to flag access-link (host link)
      trouble which per-spine counts cannot see.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

MEASURE_PRIO = 7
CONTROL_PRIO = 6

COUNTER_WIDTH = 16          # narrow hardware counter mode wraps at 2**16
COUNTER_MOD = 1 << COUNTER_WIDTH


def compute_threshold(n_packets: int, k: int, s: float) -> int:
    """Per-spine lower bound for a flow of n_packets over k equal spines.

    Clamped at zero: tiny flows or huge s make the bound vacuous rather
    than negative.
    """
    if n_packets <= 0 or k <= 0:
        raise ValueError("n_packets and k must be positive")
    lam = n_packets / k
    t = math.floor(lam - s * math.sqrt(lam))
    return max(t, 0)


def weighted_thresholds(n_packets: int, weights: list[float], s: float) -> list[int]:
    """Per-spine bounds when spray weights are uneven (sum ~ 1)."""
    out = []
    for w in weights:
        lam = w * n_packets
        if lam <= 0:
            out.append(0)
            continue
        out.append(max(math.floor(lam - s * math.sqrt(lam)), 0))
    return out


def unwrap_counter(value: int, expected: float, mod: int = COUNTER_MOD) -> int:
    """Recover a wide count from a counter stored mod `mod`.

    Valid while the true count is within mod/2 of the expectation, which
    holds for any plausible flow: the deficit a failure can produce is a
    small fraction of lam.
    """
    base = math.floor((expected - value) / mod + 0.5)
    return value + mod * max(base, 0)


@dataclass
class PathFailureReport:
    time_ns: int
    src_leaf: int
    dst_leaf: int
    spine: int
    qp: int
    deficit: float          # lam - observed
    threshold: int
    observed: int

    def to_dict(self) -> dict:
        return {
            "time_ns": self.time_ns,
            "src_leaf": self.src_leaf,
            "dst_leaf": self.dst_leaf,
            "spine": self.spine,
            "qp": self.qp,
            "deficit": self.deficit,
            "threshold": self.threshold,
            "observed": self.observed,
        }


@dataclass
class AccessLinkFinding:
    time_ns: int
    leaf: int
    qp: int
    kind: str               # "receiver_access" | "sender_access"
    total_counted: int
    n_packets: int
    nacks: int

    def to_dict(self) -> dict:
        return {
            "time_ns": self.time_ns,
            "leaf": self.leaf,
            "qp": self.qp,
            "kind": self.kind,
            "total_counted": self.total_counted,
            "n_packets": self.n_packets,
            "nacks": self.nacks,
        }


@dataclass
class FlowSample:
    """Finalized per-flow counter snapshot, kept for offline analysis."""
    qp: int
    src_leaf: int
    dst_leaf: int
    n_packets: int
    k: int
    counters: dict[int, int]
    finalized_ns: int
    missed: int = 0


class MeasureSelector:
    """Source-leaf side: decide which flow carries the measurement mark.

    At most one flow is marked at a time per source leaf. Destinations
    become eligible when an announcement for a cross-leaf flow is snooped
    going up; a destination is "covered" once a marked flow to it
    completes (its completion ack is snooped coming down). When every
    eligible destination is covered the covered set wraps so measurement
    keeps cycling instead of going dark until the next epoch.
    """

    def __init__(self, leaf: int, n_leaves: int, epoch_ns: int = 60_000_000_000,
                 rr_wrap: bool = True):
        self.leaf = leaf
        self.n_leaves = n_leaves
        self.epoch_ns = epoch_ns
        self.rr_wrap = rr_wrap
        self.available = 0      # bitmap over destination leaves
        self.covered = 0
        self.current: int | None = None   # qp of the marked flow
        self.current_dst: int | None = None
        self.selected_at = 0
        self.epochs = 0

    def on_announcement_at_source(self, dst_leaf: int, now: int) -> None:
        if dst_leaf != self.leaf:
            self.available |= 1 << dst_leaf

    def select_next_flow(self, qp: int, dst_leaf: int, now: int) -> bool:
        """Called on a flow-start event at this leaf; True if qp got marked."""
        if self.current is not None or dst_leaf == self.leaf:
            return False
        bit = 1 << dst_leaf
        if not (self.available & bit):
            return False
        if self.rr_wrap and self.available and not (self.available & ~self.covered):
            self.covered = 0
        if self.covered & bit:
            return False
        self.current = qp
        self.current_dst = dst_leaf
        self.selected_at = now
        return True

    def is_selected(self, qp: int) -> bool:
        return self.current == qp

    def mark_and_prioritize(self, qp: int, user_prio: int) -> tuple[int, bool]:
        """Effective uplink priority and mark bit for a packet of qp."""
        if self.current == qp:
            return MEASURE_PRIO, True
        return user_prio, False

    def on_completion(self, qp: int, now: int) -> None:
        if self.current == qp:
            self.covered |= 1 << self.current_dst
            self.current = None
            self.current_dst = None

    def epoch_reset(self, now: int) -> None:
        """Forget eligibility and coverage; re-learn from fresh traffic."""
        self.available = 0
        self.covered = 0
        self.current = None
        self.current_dst = None
        self.epochs += 1


@dataclass
class DetectorConfig:
    s: float = 3.0
    pmin: int = 0                   # pool flows until this many packets; 0 = decide per flow
    aggregate: bool = True
    narrow_counters: bool = False
    eviction_ns: int = 60_000_000_000
    nack_floor: int = 16
    nack_frac: int = 1000           # sender-side suspicion above max(floor, n/frac)
    dup_floor: int = 4
    dup_frac: int = 10000           # receiver-side suspicion above n + max(floor, n/frac)

    def nack_threshold(self, n_packets: int) -> int:
        return max(self.nack_floor, n_packets // self.nack_frac)

    def dup_margin(self, n_packets: int) -> int:
        return max(self.dup_floor, n_packets // self.dup_frac)


class _Entry:
    __slots__ = ("qp", "src_leaf", "n_packets", "expect_max", "k", "spines",
                 "counters", "created_ns", "finalized", "missed", "nacks",
                 "sample")

    def __init__(self, qp, src_leaf, n_packets, k, spines, created_ns):
        self.qp = qp
        self.src_leaf = src_leaf
        self.n_packets = n_packets
        self.expect_max = n_packets - 1
        self.k = k
        self.spines = spines
        self.counters = {sp: 0 for sp in spines}
        self.created_ns = created_ns
        self.finalized = False
        self.missed = 0
        self.nacks = 0
        self.sample = None


class _Pool:
    __slots__ = ("src_leaf", "k", "counters", "n", "last_ns", "last_qp")

    def __init__(self, src_leaf, k, spines):
        self.src_leaf = src_leaf
        self.k = k
        self.counters = {sp: 0 for sp in spines}
        self.n = 0
        self.last_ns = 0
        self.last_qp = -1


class DeficitDetector:
    """Destination-leaf side of the passive check."""

    def __init__(self, leaf: int, cfg: DetectorConfig | None = None):
        self.leaf = leaf
        self.cfg = cfg or DetectorConfig()
        self.entries: dict[int, _Entry] = {}
        self.orphans: dict[int, tuple[dict[int, int], int]] = {}  # qp -> (counts, first_ns)
        self.pools: dict[tuple[int, int], _Pool] = {}             # (src_leaf, k) -> pool
        self.reports: list[PathFailureReport] = []
        self.access_findings: list[AccessLinkFinding] = []
        self.samples: list[FlowSample] = []
        self.missed_total = 0

    # -- ingest ------------------------------------------------------------

    def on_announcement(self, qp: int, n_packets: int, src_leaf: int,
                        spines: tuple[int, ...], now: int) -> None:
        """Create the per-flow entry. Duplicate announcements are no-ops.

        `spines` is the set of spines this leaf currently expects the flow
        on (its enabled downlinks); k is taken from its length.
        """
        if qp in self.entries:
            return
        e = _Entry(qp, src_leaf, n_packets, len(spines), tuple(spines), now)
        orphan = self.orphans.pop(qp, None)
        if orphan is not None:
            for sp, c in orphan[0].items():
                if sp in e.counters:
                    e.counters[sp] += c
        self.entries[qp] = e

    def on_marked_packet(self, qp: int, spine: int, psn: int, now: int) -> None:
        e = self.entries.get(qp)
        if e is None:
            counts, first = self.orphans.get(qp, (None, now))
            if counts is None:
                counts = {}
                self.orphans[qp] = (counts, first)
            counts[spine] = counts.get(spine, 0) + 1
            return
        if e.finalized:
            e.missed += 1
            self.missed_total += 1
            if e.sample is not None:
                e.sample.missed += 1
            return
        c = e.counters.get(spine, 0) + 1
        if self.cfg.narrow_counters:
            c &= COUNTER_MOD - 1
        e.counters[spine] = c
        if psn == e.expect_max:
            self.finalize(qp, now)

    def on_nack_seen(self, qp: int, n_psns: int, now: int) -> None:
        """Receiver-side nacks for qp observed going up through this leaf."""
        e = self.entries.get(qp)
        if e is not None:
            e.nacks += n_psns

    def ingest_counts(self, qp: int, n_packets: int, src_leaf: int,
                      spines: tuple[int, ...], counts: dict[int, int],
                      now: int, nacks: int = 0) -> list[PathFailureReport]:
        """Bulk path: accept a whole finalized counter vector at once.

        Runs the same pooling/decision/access-check flow as the
        packet-by-packet path. Used by accelerated experiment runners
        that produce counters outside the event loop.
        """
        self.on_announcement(qp, n_packets, src_leaf, spines, now)
        e = self.entries[qp]
        if e.finalized:
            return []
        mask = COUNTER_MOD - 1
        for sp, c in counts.items():
            v = e.counters.get(sp, 0) + c
            if self.cfg.narrow_counters:
                v &= mask
            e.counters[sp] = v
        e.nacks += nacks
        return self.finalize(qp, now)

    # -- decide ------------------------------------------------------------

    def _wide_counters(self, counters: dict[int, int], n: int, k: int) -> dict[int, int]:
        if not self.cfg.narrow_counters:
            return dict(counters)
        lam = n / k
        return {sp: unwrap_counter(c, lam) for sp, c in counters.items()}

    def finalize(self, qp: int, now: int) -> list[PathFailureReport]:
        """Close the books on a flow: pool or decide, and run access checks."""
        e = self.entries.get(qp)
        if e is None or e.finalized:
            return []
        e.finalized = True
        wide = self._wide_counters(e.counters, e.n_packets, e.k)
        e.sample = FlowSample(
            qp=qp, src_leaf=e.src_leaf, dst_leaf=self.leaf,
            n_packets=e.n_packets, k=e.k, counters=wide,
            finalized_ns=now,
        )
        self.samples.append(e.sample)
        new_reports = self._check_access(e, wide, now)
        if new_reports:
            # access-link suspicion: per-spine counts are polluted by
            # duplicates, do not fold this flow into path decisions
            return []
        if self.cfg.aggregate:
            key = (e.src_leaf, e.k)
            pool = self.pools.get(key)
            if pool is None:
                pool = _Pool(e.src_leaf, e.k, e.spines)
                self.pools[key] = pool
            for sp, c in wide.items():
                pool.counters[sp] = pool.counters.get(sp, 0) + c
            pool.n += e.n_packets
            pool.last_ns = now
            pool.last_qp = qp
            if pool.n >= max(self.cfg.pmin, 1):
                out = self._decide(pool.counters, pool.n, e.k, e.src_leaf, qp, now)
                del self.pools[key]
                return out
            return []
        return self._decide(wide, e.n_packets, e.k, e.src_leaf, qp, now)

    def _decide(self, counters: dict[int, int], n: int, k: int,
                src_leaf: int, qp: int, now: int) -> list[PathFailureReport]:
        t = compute_threshold(n, k, self.cfg.s)
        lam = n / k
        out = []
        for sp in sorted(counters):
            x = counters[sp]
            if x < t:
                r = PathFailureReport(
                    time_ns=now, src_leaf=src_leaf, dst_leaf=self.leaf,
                    spine=sp, qp=qp, deficit=round(lam - x, 3),
                    threshold=t, observed=x,
                )
                out.append(r)
        self.reports.extend(out)
        return out

    def _check_access(self, e: _Entry, wide: dict[int, int], now: int) -> list[AccessLinkFinding]:
        """Host-link trouble leaves fabric counters balanced; look at totals.

        Receiver access drops: every packet was already counted at this
        leaf, then dropped on the last hop and retransmitted, so the total
        counted exceeds n. Sender access drops: totals stay near n but the
        receiver had to nack heavily with no spine looking short.
        """
        total = sum(wide.values())
        n = e.n_packets
        found = []
        if total > n + self.cfg.dup_margin(n):
            found.append(AccessLinkFinding(
                time_ns=now, leaf=self.leaf, qp=e.qp, kind="receiver_access",
                total_counted=total, n_packets=n, nacks=e.nacks,
            ))
        elif e.nacks > self.cfg.nack_threshold(n):
            t = compute_threshold(n, e.k, self.cfg.s)
            if all(x >= t for x in wide.values()):
                found.append(AccessLinkFinding(
                    time_ns=now, leaf=self.leaf, qp=e.qp, kind="sender_access",
                    total_counted=total, n_packets=n, nacks=e.nacks,
                ))
        self.access_findings.extend(found)
        return found

    def check_access_links(self, qp: int, now: int) -> list[AccessLinkFinding]:
        """Re-run the access heuristics for a finalized flow (on demand)."""
        e = self.entries.get(qp)
        if e is None:
            return []
        wide = self._wide_counters(e.counters, e.n_packets, e.k)
        return self._check_access(e, wide, now)

    # -- housekeeping --------------------------------------------------------

    def evict_stale(self, now: int) -> int:
        """Drop per-flow state older than the eviction horizon."""
        horizon = self.cfg.eviction_ns
        dead = [qp for qp, e in self.entries.items() if now - e.created_ns > horizon]
        for qp in dead:
            del self.entries[qp]
        dead_o = [qp for qp, (_, first) in self.orphans.items() if now - first > horizon]
        for qp in dead_o:
            del self.orphans[qp]
        dead_p = [k for k, p in self.pools.items() if p.last_ns and now - p.last_ns > horizon]
        for k in dead_p:
            del self.pools[k]
        return len(dead) + len(dead_o) + len(dead_p)
