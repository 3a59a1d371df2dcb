"""The accelerated counter generator must agree with the event simulator:
exactly when nothing is lost (same RNG stream, same decisions), and
statistically when a gray link drops packets (retransmit timing differs,
loss totals must not)."""

import math

from spraywatch.harness.fastlane import (detect_flow, measured_flow_counts,
                                         spray_study_counts)
from spraywatch.sim import SimConfig, run_scenario
from spraywatch.spraycheck import DetectorConfig, compute_threshold
from spraywatch.topology import build_fat_tree, set_link_state, up_id
from spraywatch.workload import FlowSpec


def sim_counts(topo, seed, qp, src, dst, n, **cfg_kw):
    flows = [FlowSpec(qp=qp, src_host=src, dst_host=dst, n_packets=n)]
    det = DetectorConfig(s=3.0, pmin=0)
    tr = run_scenario(topo, flows, SimConfig(**cfg_kw), det, seed)
    smp = [s for s in tr.samples if s["qp"] == qp]
    assert len(smp) == 1
    return {int(k): v for k, v in smp[0]["counters"].items()}, tr


def test_exact_match_lossless():
    for seed in (0, 1, 2):
        topo = build_fat_tree(2, 8, hosts_per_leaf=1)
        fast, dropped = measured_flow_counts(topo, seed, 1, 0, 1, 4096)
        slow, _ = sim_counts(topo, seed, 1, 0, 1, 4096)
        assert dropped == 0
        assert fast == slow, f"seed {seed}"


def test_exact_match_with_disabled_links():
    topo = build_fat_tree(2, 8, hosts_per_leaf=1)
    set_link_state(topo, up_id(0, 2), enabled=False)
    set_link_state(topo, up_id(0, 6), enabled=False)
    fast, _ = measured_flow_counts(topo, 3, 1, 0, 1, 4096)
    slow, _ = sim_counts(topo, 3, 1, 0, 1, 4096)
    assert fast == slow
    assert 2 not in fast and 6 not in fast


def test_statistical_match_with_gray_link():
    n, k, rate = 65536, 8, 0.1
    lam = n / k
    topo = build_fat_tree(2, k, hosts_per_leaf=1)
    set_link_state(topo, up_id(0, 3), drop_rate=rate)
    fast, f_drops = measured_flow_counts(topo, 5, 1, 0, 1, n)
    slow, tr = sim_counts(topo, 5, 1, 0, 1, n)
    assert sum(fast.values()) == sum(slow.values()) == n
    assert f_drops > 0 and tr.totals["dropped_data"] > 0
    # both lanes show the same deficit shape: spine 3 short by about
    # lam * rate, everyone else within noise of lam
    for counts in (fast, slow):
        deficit = lam - counts[3]
        assert abs(deficit - lam * rate) < 5 * math.sqrt(lam * rate)
        for sp in range(k):
            if sp != 3:
                assert abs(counts[sp] - lam) < 5 * math.sqrt(lam)


def test_detect_flow_matches_detector_semantics():
    topo = build_fat_tree(2, 8, hosts_per_leaf=1)
    set_link_state(topo, up_id(0, 3), drop_rate=0.2)
    det = DetectorConfig(s=3.0, pmin=0)
    reports, counts = detect_flow(topo, 0, 1, 0, 1, 32768, det)
    assert [r.spine for r in reports] == [3]
    assert reports[0].observed == counts[3]
    assert reports[0].threshold == compute_threshold(32768, 8, 3.0)


def test_spray_study_matches_sim_spray_counts():
    # one unmeasured flow, fixed window, no congestion control: the
    # arithmetic occupancy model walks the identical decision sequence.
    # The sim counts every data transmission, so the comparison needs a
    # regime with no spurious retransmits: po2c keeps queues balanced
    # even oversubscribed; uniform needs the host matched to the fabric
    # rate or its skewed queues trip reorder nacks.
    n, k = 2048, 8
    for policy, host_bps in (("uniform", 100 * 10**9),
                             ("po2c", 800 * 10**9)):
        study = spray_study_counts(0, 1, k, n, policy,
                                   host_rate_bps=host_bps)
        topo = build_fat_tree(2, k, hosts_per_leaf=1,
                              host_rate_bps=host_bps)
        flows = [FlowSpec(qp=1, src_host=0, dst_host=1, n_packets=n,
                          measure_eligible=False)]
        cfg = SimConfig(count_spray=True, dcqcn=False, window_packets=n,
                        spray_policy=policy)
        tr = run_scenario(topo, flows, cfg, None, 0)
        assert tr.flows[1]["retransmits"] == 0, policy
        assert study == tr.spray_counts[1], policy


def test_fastlane_rng_is_flow_scoped():
    topo = build_fat_tree(2, 8, hosts_per_leaf=1)
    a, _ = measured_flow_counts(topo, 0, 1, 0, 1, 4096)
    b, _ = measured_flow_counts(topo, 0, 2, 0, 1, 4096)
    assert a != b
    c, _ = measured_flow_counts(topo, 0, 1, 0, 1, 4096)
    assert a == c
