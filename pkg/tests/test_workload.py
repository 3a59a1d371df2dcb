import pytest

from spraywatch.workload import (FlowSpec, bisection_traffic,
                                 permutation_flows, ring_flows)


def test_ring_flows_sizes():
    flows = ring_flows(8, 2 << 30, qps_per_pair=2)
    assert len(flows) == 16
    assert all(f.n_packets == 262_144 for f in flows)
    assert {f.qp for f in flows} == set(range(1, 17))
    # rank i sends to rank (i+1) % 8, both qps of a pair share endpoints
    by_src = {}
    for f in flows:
        by_src.setdefault(f.src_host, set()).add(f.dst_host)
    assert by_src == {i: {(i + 1) % 8} for i in range(8)}


def test_ring_flows_host_mapping():
    flows = ring_flows(3, 4096 * 10, qps_per_pair=1, hosts=[0, 2, 4])
    assert [(f.src_host, f.dst_host) for f in flows] == [(0, 2), (2, 4), (4, 0)]
    assert all(f.n_packets == 10 for f in flows)


def test_ring_flows_rounds_barrier():
    flows = ring_flows(3, 4096, qps_per_pair=1, rounds=2)
    first = [f for f in flows if f.qp <= 3]
    second = [f for f in flows if f.qp > 3]
    assert all(f.start_after == () for f in first)
    # every round-2 flow waits for all of round 1
    assert all(set(f.start_after) == {1, 2, 3} for f in second)


def test_ring_flows_rejects_tiny_pair():
    with pytest.raises(ValueError):
        ring_flows(4, 100, qps_per_pair=2, payload_bytes=4096)


def test_permutation_flows_derangement():
    flows = permutation_flows(16, 4096 * 4, seed=3)
    assert len(flows) == 16
    assert all(f.src_host != f.dst_host for f in flows)
    assert sorted(f.dst_host for f in flows) == list(range(16))


def test_bisection_traffic_budget():
    flows = bisection_traffic([0, 1], [4, 5], rate_bps=10**9,
                              duration_ns=8_000_000)
    # 1 Gb/s for 8 ms is 1 MB per direction per pair
    assert len(flows) == 4
    per = 10**9 * 8_000_000 // (8 * 10**9)
    assert all(f.n_packets == per // 4154 for f in flows)
    assert all(not f.measure_eligible for f in flows)
    assert all(f.rate_bps == 10**9 for f in flows)
    back = [(f.src_host, f.dst_host) for f in flows]
    assert (4, 0) in back and (5, 1) in back


def test_bisection_traffic_one_way():
    flows = bisection_traffic([0], [2], 10**9, 4_000_000, both_ways=False)
    assert [(f.src_host, f.dst_host) for f in flows] == [(0, 2)]


def test_flowspec_defaults():
    f = FlowSpec(qp=1, src_host=0, dst_host=1, n_packets=5)
    assert f.measure_eligible and f.start_after == ()
    assert f.prio == 3 and f.rate_bps is None
