import itertools
import json
import random

import pytest

from spraywatch.monitor import DOWN, UP, FleetMonitor, adjacency_id

K = 8          # spines on the test fabric
LEAVES = 6


def feed(mon, flow_pairs, victims, start=0):
    """Ideal evidence: flow (src, dst) flags exactly the victims on its
    path and exonerates every other spine."""
    t = start
    for src, dst in flow_pairs:
        flagged = {spine for role, leaf, spine in victims
                   if (role == UP and leaf == src)
                   or (role == DOWN and leaf == dst)}
        mon.observe_sample(src, dst, sorted(flagged),
                           sorted(set(range(K)) - flagged), t)
        t += 1
    return mon


def blamed_set(mon):
    return {(f.leaf, f.spine, frozenset(f.directions))
            for f in mon.localize()}


def test_single_uplink():
    mon = feed(FleetMonitor(), [(0, 1), (0, 2)], [(UP, 0, 3)])
    assert blamed_set(mon) == {(0, 3, frozenset({UP}))}
    f = mon.localize()[0]
    assert f.link == adjacency_id(0, 3) == "L0S3"
    assert f.counterparts == (1, 2)
    assert len(f.supporting_reports) == 2


def test_single_downlink():
    mon = feed(FleetMonitor(), [(1, 4), (5, 4)], [(DOWN, 4, 6)])
    assert blamed_set(mon) == {(4, 6, frozenset({DOWN}))}


def test_lone_report_below_quorum():
    mon = feed(FleetMonitor(), [(0, 1)], [(UP, 0, 3)])
    assert mon.localize() == []
    groups = mon.shadowing_check()
    assert [g["spine"] for g in groups] == [3]
    assert groups[0]["pairs"] == [(0, 1)]


def test_one_counterpart_two_flows_still_below_quorum():
    # two reports but a single counterpart leaf: not enough at quorum 2
    mon = feed(FleetMonitor(), [(0, 1), (0, 1)], [(UP, 0, 3)])
    assert mon.localize() == []


def test_quorum_one_needs_unambiguous_end():
    mon = FleetMonitor(quorum=1)
    feed(mon, [(0, 1)], [(UP, 0, 3)])
    # one report, both path ends possible: still ambiguous
    assert mon.localize() == []
    # healthy traffic through the same spine clears the destination end
    feed(mon, [(2, 1)], [(UP, 0, 3)], start=10)
    assert blamed_set(mon) == {(0, 3, frozenset({UP}))}


def test_bidirectional_same_adjacency():
    victims = [(UP, 2, 5), (DOWN, 2, 5)]
    flows = [(2, 0), (2, 1), (0, 2), (1, 2)]
    mon = feed(FleetMonitor(), flows, victims)
    assert blamed_set(mon) == {(2, 5, frozenset({UP, DOWN}))}


def test_same_leaf_up_and_down_different_spines():
    victims = [(UP, 0, 1), (DOWN, 0, 2)]
    flows = [(0, 3), (0, 4), (3, 0), (4, 0)]
    mon = feed(FleetMonitor(), flows, victims)
    assert blamed_set(mon) == {(0, 1, frozenset({UP})),
                               (0, 2, frozenset({DOWN}))}


def test_disjoint_pair():
    victims = [(UP, 1, 3), (DOWN, 4, 6)]
    flows = [(1, 0), (1, 2), (0, 4), (5, 4)]
    mon = feed(FleetMonitor(), flows, victims)
    assert blamed_set(mon) == {(1, 3, frozenset({UP})),
                               (4, 6, frozenset({DOWN}))}


def test_shared_spine_distinct_counterparts():
    victims = [(UP, 0, 3), (UP, 1, 3)]
    flows = [(0, 2), (0, 4), (1, 5), (1, 2)]
    mon = feed(FleetMonitor(), flows, victims)
    assert blamed_set(mon) == {(0, 3, frozenset({UP})),
                               (1, 3, frozenset({UP}))}


def test_shared_spine_shared_counterparts_needs_witnesses():
    victims = [(UP, 0, 3), (DOWN, 1, 3)]
    # both victims seen only via flows between leaves 0 and 1: the
    # evidence is a complete bipartite tangle, two different single-link
    # explanations cover it
    mon = feed(FleetMonitor(), [(0, 1), (0, 1)], victims)
    assert mon.localize() == []
    shadow = mon.shadowing_check()
    assert [g["spine"] for g in shadow] == [3]
    # healthy flows through spine 3 from a third leaf break the tie
    feed(mon, [(2, 4), (4, 2)], victims, start=50)
    assert mon.localize() == []     # exoneration of bystanders is not enough
    # flows touching the victims from the now-exonerated leaf 2 pin both
    feed(mon, [(0, 2), (2, 1)], victims, start=60)
    assert blamed_set(mon) == {(0, 3, frozenset({UP})),
                               (1, 3, frozenset({DOWN}))}


def test_no_healthy_adjacency_ever_blamed():
    rng = random.Random(0)
    roles = (UP, DOWN)
    for _ in range(200):
        victims = [(rng.choice(roles), rng.randrange(LEAVES), rng.randrange(K))
                   for _ in range(rng.randrange(1, 4))]
        flows = [tuple(rng.sample(range(LEAVES), 2)) for _ in range(12)]
        mon = feed(FleetMonitor(), flows, victims)
        adj = {(leaf, spine) for _, leaf, spine in victims}
        for f in mon.localize():
            assert (f.leaf, f.spine) in adj, (victims, flows)


def test_order_independence():
    victims = [(UP, 0, 3), (DOWN, 4, 3)]
    flows = [(0, 1), (0, 2), (1, 4), (2, 4), (5, 1), (1, 5)]
    want = None
    for perm in itertools.permutations(flows):
        mon = feed(FleetMonitor(), list(perm), victims)
        got = blamed_set(mon)
        if want is None:
            want = got
        assert got == want
    assert want == {(0, 3, frozenset({UP})), (4, 3, frozenset({DOWN}))}


def test_more_witnesses_never_hurt():
    victims = [(UP, 0, 3)]
    mon = feed(FleetMonitor(), [(0, 1), (0, 2)], victims)
    base = blamed_set(mon)
    extra = [(src, dst) for src in range(1, LEAVES)
             for dst in range(LEAVES) if src != dst]
    mon2 = feed(FleetMonitor(), [(0, 1), (0, 2)] + extra, victims)
    assert blamed_set(mon2) == base


def test_duplicate_reports_do_not_double_count():
    mon = FleetMonitor()
    r = {"src_leaf": 0, "dst_leaf": 1, "spine": 3, "time_ns": 5}
    mon.ingest_many([r, r, r])
    assert len(mon.reports) == 3
    assert mon.localize() == []     # still one counterpart


def test_rejects_self_path():
    mon = FleetMonitor()
    with pytest.raises(ValueError):
        mon.ingest({"src_leaf": 2, "dst_leaf": 2, "spine": 0})


def test_retention_expires_stale_evidence():
    mon = FleetMonitor(retention_ns=100)
    feed(mon, [(0, 1), (0, 2)], [(UP, 0, 3)], start=0)
    assert blamed_set(mon) == {(0, 3, frozenset({UP}))}
    # a much later healthy sample advances the clock past the horizon
    mon.observe_sample(4, 5, [], list(range(K)), 500)
    assert mon.localize() == []
    assert mon.shadowing_check() == []


def test_state_dict_and_json():
    mon = feed(FleetMonitor(), [(0, 1), (0, 2)], [(UP, 0, 3)])
    state = mon.state_dict()
    assert state["n_reports"] == 2
    assert state["localized"][0]["link"] == "L0S3"
    assert state["localized"][0]["directions"] == [UP]
    parsed = json.loads(mon.to_json())
    assert parsed["n_reports"] == 2
    mon.reset()
    assert mon.localize() == [] and mon.reports == []


def test_localized_failure_serializes():
    mon = feed(FleetMonitor(), [(0, 1), (0, 2)], [(UP, 0, 3)])
    f = mon.localize()[0]
    d = json.loads(f.to_json())
    assert d["leaf"] == 0 and d["spine"] == 3 and d["link"] == "L0S3"
