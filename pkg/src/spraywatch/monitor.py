"""Central localization of failed leaf-spine links from path reports.

A path failure report names a (source leaf, destination leaf, spine)
triple: somewhere on the two-hop path through that spine, packets are
being lost. One report cannot tell the uplink from the downlink. The
monitor resolves the ambiguity by combining reports that share a spine:
a leaf-spine adjacency is blamed when every minimum explanation of the
evidence agrees on it and the evidence comes from enough distinct
counterpart leaves.

Healthy observations carry weight too. A flow whose counter at a spine
came back normal proves its uplink and that spine's downlink to its
destination clean, so those ends stop being candidates for the reports
they would otherwise absorb. This is what lets two flows from the same
victim leaf pin its uplink without a third-party witness, and what keeps
blame off shared destination leaves when several sources report at once.

Blame is assigned at the undirected leaf-spine adjacency, since a bad
transceiver or cable usually degrades the physical link; the directions
the evidence actually exercised are attached as tags. Localization is a
pure function of the report store, so feeding the same reports in any
order produces the same result.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class LocalizedFailure:
    """One blamed leaf-spine adjacency plus the evidence behind it."""
    link: str
    leaf: int
    spine: int
    directions: tuple[str, ...]
    supporting_reports: tuple[int, ...]
    counterparts: tuple[int, ...]
    localized_at: int

    def to_dict(self) -> dict:
        return {
            "link": self.link,
            "leaf": self.leaf,
            "spine": self.spine,
            "directions": list(self.directions),
            "supporting_reports": list(self.supporting_reports),
            "counterparts": list(self.counterparts),
            "localized_at": self.localized_at,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def adjacency_id(leaf: int, spine: int) -> str:
    return f"L{leaf}S{spine}"


@dataclass
class _Edge:
    """Deduplicated evidence for one (src, dst) pair at one spine."""
    src: int
    dst: int
    report_ids: list[int] = field(default_factory=list)
    last_ns: int = 0

    def candidates(self, clean: set[tuple[int, str]]) -> tuple[int, ...]:
        cands = []
        if (self.src, UP) not in clean:
            cands.append(self.src)
        if (self.dst, DOWN) not in clean and self.dst != self.src:
            cands.append(self.dst)
        return tuple(cands)

    def role_of(self, leaf: int) -> str:
        return UP if leaf == self.src else DOWN

    def counterpart_of(self, leaf: int) -> int:
        return self.dst if leaf == self.src else self.src


def _min_covers(edge_cands: list[tuple[int, ...]]) -> list[frozenset[int]]:
    """All minimum-cardinality vertex covers of the candidate edges.

    Edges whose candidate set is empty are skipped by the caller; the
    branching picks an uncovered edge and tries each of its candidates,
    so the work is bounded by (max candidates)^(cover size) and stays
    tiny at fleet-report scales.
    """
    best: list[int] = [len(edge_cands) + 1]
    found: set[frozenset[int]] = set()

    def backtrack(chosen: set[int]) -> None:
        if len(chosen) > best[0]:
            return
        open_edge = None
        for cands in edge_cands:
            if not any(v in chosen for v in cands):
                open_edge = cands
                break
        if open_edge is None:
            size = len(chosen)
            if size < best[0]:
                best[0] = size
                found.clear()
            if size == best[0]:
                found.add(frozenset(chosen))
            return
        if len(chosen) == best[0]:
            return
        for v in open_edge:
            chosen.add(v)
            backtrack(chosen)
            chosen.discard(v)

    backtrack(set())
    return sorted(found, key=sorted)


class FleetMonitor:
    """Collects path failure reports and blames individual links.

    quorum is the number of distinct counterpart leaves required before
    an adjacency may be blamed. Two is the safe default; one suffices
    only when the operator also feeds healthy observations, as a lone
    report can never tell its two candidate links apart on its own.

    retention_ns, when set, drops evidence older than that window below
    the newest ingested timestamp, so a repaired link eventually stops
    being blamed in long-running fleets.
    """

    def __init__(self, quorum: int = 2, retention_ns: int | None = None):
        if quorum < 1:
            raise ValueError("quorum must be at least 1")
        self.quorum = quorum
        self.retention_ns = retention_ns
        self.reports: list[dict] = []
        self.edges: dict[int, dict[tuple[int, int], _Edge]] = {}
        self.clean: dict[int, dict[tuple[int, str], int]] = {}
        self.last_ns = 0

    # -- ingest --------------------------------------------------------

    def ingest(self, report: dict) -> int:
        """Store one path failure report (dict form, as written to JSONL).

        Returns the report id. Duplicate reports are stored too; they
        do not change the localization outcome because evidence is
        deduplicated per (src, dst) pair.
        """
        src = int(report["src_leaf"])
        dst = int(report["dst_leaf"])
        spine = int(report["spine"])
        if src == dst:
            raise ValueError("path reports cannot have src_leaf == dst_leaf")
        when = int(report.get("time_ns", 0))
        rid = len(self.reports)
        self.reports.append(dict(report))
        per_spine = self.edges.setdefault(spine, {})
        edge = per_spine.get((src, dst))
        if edge is None:
            edge = _Edge(src, dst)
            per_spine[(src, dst)] = edge
        edge.report_ids.append(rid)
        edge.last_ns = max(edge.last_ns, when)
        self.last_ns = max(self.last_ns, when)
        self._expire()
        return rid

    def ingest_many(self, reports) -> list[int]:
        return [self.ingest(r) for r in reports]

    def exonerate(self, src_leaf: int, dst_leaf: int, spine: int,
                  time_ns: int = 0) -> None:
        """Record that a flow's counter at this spine came back healthy.

        A normal count clears the whole path: the uplink from src_leaf
        and the downlink to dst_leaf stop being blame candidates.
        """
        per_spine = self.clean.setdefault(spine, {})
        for key in ((src_leaf, UP), (dst_leaf, DOWN)):
            per_spine[key] = max(per_spine.get(key, 0), time_ns)
        self.last_ns = max(self.last_ns, time_ns)
        self._expire()

    def observe_sample(self, src_leaf: int, dst_leaf: int,
                       flagged_spines, healthy_spines,
                       time_ns: int = 0) -> list[int]:
        """Feed one finalized flow decision: flagged and clean spines."""
        ids = []
        for spine in flagged_spines:
            ids.append(self.ingest({
                "time_ns": time_ns, "src_leaf": src_leaf,
                "dst_leaf": dst_leaf, "spine": spine,
            }))
        for spine in healthy_spines:
            self.exonerate(src_leaf, dst_leaf, spine, time_ns)
        return ids

    def _expire(self) -> None:
        if self.retention_ns is None:
            return
        cutoff = self.last_ns - self.retention_ns
        if cutoff <= 0:
            return
        for spine in list(self.edges):
            per_spine = self.edges[spine]
            for key in list(per_spine):
                edge = per_spine[key]
                if edge.last_ns < cutoff:
                    del per_spine[key]
            if not per_spine:
                del self.edges[spine]
        for spine in list(self.clean):
            per_spine = self.clean[spine]
            for key in list(per_spine):
                if per_spine[key] < cutoff:
                    del per_spine[key]
            if not per_spine:
                del self.clean[spine]

    # -- resolve -------------------------------------------------------

    def _spine_blame(self, spine: int) -> tuple[list[LocalizedFailure], list[_Edge]]:
        clean = set(self.clean.get(spine, ()))
        live: list[tuple[_Edge, tuple[int, ...]]] = []
        for edge in self.edges.get(spine, {}).values():
            cands = edge.candidates(clean)
            if cands:
                live.append((edge, cands))
        if not live:
            return [], []
        covers = _min_covers([c for _, c in live])
        agreed = frozenset.intersection(*covers) if covers else frozenset()
        blamed: list[LocalizedFailure] = []
        claimed: set[int] = set()
        for leaf in sorted(agreed):
            support = [e for e, c in live if leaf in c]
            counterparts = sorted({e.counterpart_of(leaf) for e in support})
            rids = sorted(r for e in support for r in e.report_ids)
            if len(counterparts) < self.quorum or len(rids) < min(self.quorum, 2):
                continue
            directions = tuple(sorted({e.role_of(leaf) for e in support}))
            blamed.append(LocalizedFailure(
                link=adjacency_id(leaf, spine), leaf=leaf, spine=spine,
                directions=directions, supporting_reports=tuple(rids),
                counterparts=tuple(counterparts),
                localized_at=max(e.last_ns for e in support),
            ))
            claimed.add(leaf)
        unexplained = [e for e, c in live if not any(v in claimed for v in c)]
        return blamed, unexplained

    def localize(self) -> list[LocalizedFailure]:
        """Blame adjacencies every minimum explanation agrees on."""
        out: list[LocalizedFailure] = []
        for spine in sorted(self.edges):
            out.extend(self._spine_blame(spine)[0])
        return out

    def shadowing_check(self) -> list[dict]:
        """Spines with reports no blamed link explains.

        These are the formations where the evidence cannot yet separate
        the candidate links (shared-spine double failures seen through
        too few flows, or lone reports). One group per affected spine,
        with the unexplained pairs and their surviving candidates.
        """
        groups = []
        for spine in sorted(self.edges):
            _, unexplained = self._spine_blame(spine)
            if not unexplained:
                continue
            clean = set(self.clean.get(spine, ()))
            groups.append({
                "spine": spine,
                "pairs": [(e.src, e.dst) for e in unexplained],
                "report_ids": sorted(r for e in unexplained
                                     for r in e.report_ids),
                "candidates": sorted({(v, e.role_of(v))
                                      for e in unexplained
                                      for v in e.candidates(clean)}),
            })
        return groups

    # -- state ---------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "quorum": self.quorum,
            "retention_ns": self.retention_ns,
            "n_reports": len(self.reports),
            "reports": [dict(r) for r in self.reports],
            "clean": {
                str(spine): sorted([leaf, d, ns]
                                   for (leaf, d), ns in per.items())
                for spine, per in self.clean.items()
            },
            "localized": [f.to_dict() for f in self.localize()],
            "shadowed": self.shadowing_check(),
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.state_dict(), sort_keys=True, indent=indent)

    def reset(self) -> None:
        self.reports.clear()
        self.edges.clear()
        self.clean.clear()
        self.last_ns = 0
