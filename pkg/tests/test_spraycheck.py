import math

import pytest

from spraywatch.spraycheck import (COUNTER_MOD, DeficitDetector,
                                   DetectorConfig, MeasureSelector,
                                   compute_threshold, unwrap_counter,
                                   weighted_thresholds)


def test_threshold_frozen_values():
    # floor(N/k - s * sqrt(N/k)) worked out by hand for two sizes
    assert compute_threshold(100_000, 32, 3.0) == 2957
    assert compute_threshold(262_144, 8, 4.0) == 32043


def test_threshold_matches_formula():
    for n, k, s in [(4096, 4, 2.0), (70_000, 7, 3.5), (10**6, 64, 1.0)]:
        lam = n / k
        assert compute_threshold(n, k, s) == math.floor(lam - s * math.sqrt(lam))


def test_threshold_never_negative():
    assert compute_threshold(16, 16, 5.0) == 0


def test_weighted_thresholds():
    got = weighted_thresholds(400, [0.5, 0.25, 0.25], 2.0)
    assert got == [171, 80, 80]


def test_weighted_thresholds_zero_weight():
    assert weighted_thresholds(400, [1.0, 0.0], 2.0) == [360, 0]


def test_unwrap_counter():
    lam = 3 * COUNTER_MOD + 100.0
    assert unwrap_counter(90, lam) == 3 * COUNTER_MOD + 90
    # a wrapped value far below expectation resolves to the nearest lap
    assert unwrap_counter(COUNTER_MOD - 5, lam) == 3 * COUNTER_MOD - 5
    assert unwrap_counter(42, 40.0) == 42


# -- selector ----------------------------------------------------------------


def _selector(n_leaves=4):
    return MeasureSelector(leaf=0, n_leaves=n_leaves)


def test_selector_requires_announcement():
    sel = _selector()
    assert not sel.select_next_flow(qp=1, dst_leaf=2, now=0)
    sel.on_announcement_at_source(dst_leaf=2, now=0)
    assert sel.select_next_flow(qp=1, dst_leaf=2, now=1)
    assert sel.is_selected(1)


def test_selector_one_at_a_time():
    sel = _selector()
    sel.on_announcement_at_source(1, 0)
    sel.on_announcement_at_source(2, 0)
    assert sel.select_next_flow(1, 1, 0)
    assert not sel.select_next_flow(2, 2, 0)
    sel.on_completion(1, 10)
    assert sel.select_next_flow(2, 2, 11)


def test_selector_skips_covered_until_wrap():
    sel = _selector(n_leaves=3)
    for dst in (1, 2):
        sel.on_announcement_at_source(dst, 0)
    assert sel.select_next_flow(1, 1, 0)
    sel.on_completion(1, 1)
    assert not sel.select_next_flow(2, 1, 2)   # dst 1 already covered
    assert sel.select_next_flow(3, 2, 3)
    sel.on_completion(3, 4)
    # everything announced is covered: the covered set wraps and dst 1
    # becomes measurable again
    assert sel.select_next_flow(4, 1, 5)


def test_selector_epoch_reset():
    sel = MeasureSelector(leaf=0, n_leaves=3, epoch_ns=1000)
    sel.on_announcement_at_source(1, 0)
    assert sel.select_next_flow(1, 1, 0)
    sel.on_completion(1, 10)
    sel.epoch_reset(now=2000)
    assert not sel.select_next_flow(2, 1, 2001)  # announcements cleared too
    sel.on_announcement_at_source(1, 2002)
    assert sel.select_next_flow(2, 1, 2003)


def test_selector_mark_and_prioritize():
    sel = _selector()
    sel.on_announcement_at_source(1, 0)
    sel.select_next_flow(5, 1, 0)
    prio, marked = sel.mark_and_prioritize(5, user_prio=3)
    assert marked and prio > 3
    prio2, marked2 = sel.mark_and_prioritize(6, user_prio=3)
    assert not marked2 and prio2 == 3


# -- detector ----------------------------------------------------------------


def _feed_flow(det, qp, n, k, spines, per_spine, now=0, last_psn=None):
    det.on_announcement(qp, n, src_leaf=1, spines=spines, now=now)
    psn = 0
    for sp in spines:
        for _ in range(per_spine[sp]):
            det.on_marked_packet(qp, sp, psn, now)
            psn += 1
    if last_psn is not None:
        det.on_marked_packet(qp, spines[0], last_psn, now)


def test_detector_flags_short_spine():
    cfg = DetectorConfig(s=3.0, pmin=0, aggregate=False)
    det = DeficitDetector(leaf=0, cfg=cfg)
    n, k = 4000, 4
    spines = (0, 1, 2, 3)
    per = {0: 1000, 1: 1000, 2: 1000, 3: 800}
    det.on_announcement(1, n, 1, spines, 0)
    reports = det.ingest_counts(1, n, 1, spines, per, now=5)
    assert [r.spine for r in reports] == [3]
    assert reports[0].observed == 800
    assert reports[0].threshold == compute_threshold(n, k, 3.0)


def test_detector_healthy_silent():
    cfg = DetectorConfig(s=3.0, pmin=0, aggregate=False)
    det = DeficitDetector(leaf=0, cfg=cfg)
    per = {0: 998, 1: 1003, 2: 1001, 3: 998}
    reports = det.ingest_counts(1, 4000, 1, (0, 1, 2, 3), per, now=5)
    assert reports == []
    assert len(det.samples) == 1
    assert det.samples[0].counters == per


def test_detector_finalizes_on_last_psn():
    det = DeficitDetector(0, DetectorConfig(s=3.0, pmin=0, aggregate=False))
    n = 40
    det.on_announcement(1, n, 1, (0, 1), now=0)
    for psn in range(n):
        det.on_marked_packet(1, psn % 2, psn, now=psn)
    assert det.samples and det.samples[0].finalized_ns == n - 1
    # late packets after finalization are counted as missed
    det.on_marked_packet(1, 0, 5, now=100)
    assert det.samples[0].missed == 1
    assert det.missed_total == 1


def test_detector_orphan_counts_survive_late_announcement():
    det = DeficitDetector(0, DetectorConfig(pmin=0, aggregate=False))
    det.on_marked_packet(7, spine=2, psn=0, now=0)
    det.on_marked_packet(7, spine=3, psn=1, now=1)
    det.on_announcement(7, 100, 1, (2, 3), now=2)
    assert det.entries[7].counters == {2: 1, 3: 1}


def test_detector_pooling_waits_for_pmin():
    cfg = DetectorConfig(s=3.0, pmin=8000, aggregate=True)
    det = DeficitDetector(0, cfg)
    spines = (0, 1, 2, 3)
    bad = {0: 1025, 1: 1025, 2: 1050, 3: 900}
    assert det.ingest_counts(1, 4000, 1, spines, bad, now=1) == []
    reports = det.ingest_counts(2, 4000, 1, spines, bad, now=2)
    assert [r.spine for r in reports] == [3]
    assert reports[0].qp == 2
    # the pool was consumed by the decision
    assert det.pools == {}


def test_detector_narrow_counters_unwrap():
    cfg = DetectorConfig(s=3.0, pmin=0, aggregate=False, narrow_counters=True)
    det = DeficitDetector(0, cfg)
    n = 4 * (COUNTER_MOD + 1000)
    lam = n // 4
    wrapped = lam & (COUNTER_MOD - 1)
    counts = {sp: wrapped for sp in range(4)}
    det.ingest_counts(1, n, 1, (0, 1, 2, 3), counts, now=0)
    assert det.samples[0].counters == {sp: lam for sp in range(4)}


def test_detector_receiver_access_excluded_from_path_decisions():
    # duplicate deliveries push the total over n: blame the access link,
    # not a spine
    cfg = DetectorConfig(s=3.0, pmin=0, aggregate=False)
    det = DeficitDetector(0, cfg)
    per = {0: 1300, 1: 1000, 2: 1000, 3: 1000}
    reports = det.ingest_counts(1, 4000, 1, (0, 1, 2, 3), per, now=3)
    assert reports == []
    assert [f.kind for f in det.access_findings] == ["receiver_access"]


def test_detector_sender_access_on_heavy_nacks():
    cfg = DetectorConfig(s=3.0, pmin=0, aggregate=False)
    det = DeficitDetector(0, cfg)
    per = {sp: 1000 for sp in range(4)}
    det.ingest_counts(1, 4000, 1, (0, 1, 2, 3), per, now=3, nacks=500)
    assert [f.kind for f in det.access_findings] == ["sender_access"]
    assert det.reports == []


def test_detector_eviction():
    cfg = DetectorConfig(pmin=0, aggregate=False, eviction_ns=1000)
    det = DeficitDetector(0, cfg)
    det.on_announcement(1, 100, 1, (0, 1), now=0)
    det.on_marked_packet(9, 0, 0, now=0)          # orphan
    assert det.evict_stale(now=5000) >= 1
    assert 1 not in det.entries and 9 not in det.orphans


# -- announcement wire format -------------------------------------------------


def test_announcement_roundtrip_and_length():
    from spraywatch.workload import (ANNOUNCE_LEN, decode_announcement,
                                     encode_announcement)
    raw = encode_announcement(qp=7, flow_bytes=1 << 30, src_leaf=3,
                              dst_host=21)
    assert len(raw) == ANNOUNCE_LEN == 17
    assert raw == (b"\x01" + b"\x00\x00\x00\x07"
                   + b"\x00\x00\x00\x00\x40\x00\x00\x00"
                   + b"\x00\x03" + b"\x00\x15")
    a = decode_announcement(raw)
    assert (a.qp, a.flow_bytes, a.src_leaf, a.dst_host) == (7, 1 << 30, 3, 21)


def test_announcement_rejects_garbage():
    from spraywatch.workload import decode_announcement
    with pytest.raises(ValueError):
        decode_announcement(b"\x00" * 16)
    with pytest.raises(ValueError):
        decode_announcement(b"\x02" + b"\x00" * 16)
