"""Two-level leaf/spine fabric model.

Every leaf connects to every spine. Hosts hang off leaves. Links are
directed: the uplink leaf->spine and the downlink spine->leaf are separate
objects so that a failure can be injected in one direction only, which is
how gray failures usually present. A full cable failure is expressed by
disabling both directions.

Link ids are strings ("up:L0:S3", "down:S3:L1", "h2l:L0:H2", "l2h:L0:H2")
so they can be written straight into traces and reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field


DEFAULT_RATE_BPS = 100 * 10**9
DEFAULT_PROP_NS = 500


@dataclass
class Link:
    link_id: str
    kind: str               # "up" | "down" | "h2l" | "l2h"
    src: int                # leaf / spine / host index depending on kind
    dst: int
    rate_bps: int = DEFAULT_RATE_BPS
    prop_ns: int = DEFAULT_PROP_NS
    enabled: bool = True
    drop_rate: float = 0.0  # gray-failure drop probability, 0 = healthy


def up_id(leaf: int, spine: int) -> str:
    return f"up:L{leaf}:S{spine}"


def down_id(spine: int, leaf: int) -> str:
    return f"down:S{spine}:L{leaf}"


def h2l_id(leaf: int, host: int) -> str:
    return f"h2l:L{leaf}:H{host}"


def l2h_id(leaf: int, host: int) -> str:
    return f"l2h:L{leaf}:H{host}"


@dataclass
class Topology:
    n_leaves: int
    n_spines: int
    hosts_per_leaf: int
    links: dict[str, Link] = field(default_factory=dict)

    # -- host/leaf mapping ------------------------------------------------
    # Hosts are numbered globally: leaf L owns hosts
    # [L*hosts_per_leaf, (L+1)*hosts_per_leaf).

    def leaf_of_host(self, host: int) -> int:
        return host // self.hosts_per_leaf

    def hosts_of_leaf(self, leaf: int) -> range:
        lo = leaf * self.hosts_per_leaf
        return range(lo, lo + self.hosts_per_leaf)

    @property
    def n_hosts(self) -> int:
        return self.n_leaves * self.hosts_per_leaf

    # -- link lookup -------------------------------------------------------

    def link(self, link_id: str) -> Link:
        return self.links[link_id]

    def up_link(self, leaf: int, spine: int) -> Link:
        return self.links[up_id(leaf, spine)]

    def down_link(self, spine: int, leaf: int) -> Link:
        return self.links[down_id(spine, leaf)]

    # -- reachability ------------------------------------------------------

    def usable_spines(self, src_leaf: int, dst_leaf: int) -> tuple[int, ...]:
        """Spines that can carry src_leaf -> dst_leaf traffic right now.

        A spine is usable when both the uplink from the source leaf and the
        downlink to the destination leaf are enabled. Gray (lossy but up)
        links still count as usable; that is the whole problem.
        """
        out = []
        for s in range(self.n_spines):
            if not self.links[up_id(src_leaf, s)].enabled:
                continue
            if not self.links[down_id(s, dst_leaf)].enabled:
                continue
            out.append(s)
        return tuple(out)

    def path_links(self, src_host: int, dst_host: int, spine: int | None) -> list[Link]:
        """Ordered links a packet traverses from src_host to dst_host.

        `spine` may be None only for intra-leaf traffic, which never enters
        the fabric.
        """
        src_leaf = self.leaf_of_host(src_host)
        dst_leaf = self.leaf_of_host(dst_host)
        path = [self.links[h2l_id(src_leaf, src_host)]]
        if src_leaf != dst_leaf:
            if spine is None:
                raise ValueError("cross-leaf path needs a spine")
            path.append(self.links[up_id(src_leaf, spine)])
            path.append(self.links[down_id(spine, dst_leaf)])
        path.append(self.links[l2h_id(dst_leaf, dst_host)])
        return path


def build_fat_tree(
    n_leaves: int,
    n_spines: int,
    hosts_per_leaf: int = 1,
    rate_bps: int = DEFAULT_RATE_BPS,
    prop_ns: int = DEFAULT_PROP_NS,
    host_rate_bps: int | None = None,
    host_prop_ns: int | None = None,
) -> Topology:
    """Build a fully-wired two-level fabric.

    Fabric links default to 100 Gb/s with 500 ns propagation; host access
    links inherit those values unless overridden.
    """
    if n_leaves < 1 or n_spines < 1 or hosts_per_leaf < 1:
        raise ValueError("fabric dimensions must be positive")
    if host_rate_bps is None:
        host_rate_bps = rate_bps
    if host_prop_ns is None:
        host_prop_ns = prop_ns
    # timestamps are integer nanoseconds throughout; keep rates integral
    # so serialization arithmetic never drifts into floats
    rate_bps = int(rate_bps)
    host_rate_bps = int(host_rate_bps)
    prop_ns = int(prop_ns)
    host_prop_ns = int(host_prop_ns)

    topo = Topology(n_leaves=n_leaves, n_spines=n_spines, hosts_per_leaf=hosts_per_leaf)
    for leaf in range(n_leaves):
        for spine in range(n_spines):
            lid = up_id(leaf, spine)
            topo.links[lid] = Link(lid, "up", leaf, spine, rate_bps, prop_ns)
            lid = down_id(spine, leaf)
            topo.links[lid] = Link(lid, "down", spine, leaf, rate_bps, prop_ns)
        for host in topo.hosts_of_leaf(leaf):
            lid = h2l_id(leaf, host)
            topo.links[lid] = Link(lid, "h2l", host, leaf, host_rate_bps, host_prop_ns)
            lid = l2h_id(leaf, host)
            topo.links[lid] = Link(lid, "l2h", leaf, host, host_rate_bps, host_prop_ns)
    return topo


def set_link_state(
    topo: Topology,
    link_id: str,
    *,
    enabled: bool | None = None,
    drop_rate: float | None = None,
) -> Link:
    """Flip a link's administrative state and/or inject a gray drop rate."""
    link = topo.links[link_id]
    if enabled is not None:
        link.enabled = enabled
    if drop_rate is not None:
        if not 0.0 <= drop_rate <= 1.0:
            raise ValueError(f"drop_rate out of range: {drop_rate}")
        link.drop_rate = drop_rate
    return link
