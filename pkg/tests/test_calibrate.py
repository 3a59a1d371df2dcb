import math

import pytest

from spraywatch.harness.calibrate import (LLAMA3_ITER_BYTES,
                                          PACKET_WIRE_BYTES,
                                          CalibrationSample, calibrate_s,
                                          find_min_packets,
                                          required_collective_size)


def sample(per_spine, k=4, gray=(), n=None):
    counts = dict(enumerate(per_spine))
    total = n if n is not None else sum(per_spine)
    return CalibrationSample(counts, total, k, frozenset(gray))


def test_calibrate_separates_clean_corpus():
    healthy = [sample([1000, 999, 1001, 1000], n=4000) for _ in range(3)]
    gray = [sample([1000, 1000, 1000, 800], n=4000, gray=(3,))
            for _ in range(3)]
    res = calibrate_s(healthy + gray)
    assert res.band_exists
    assert res.z_healthy_max < res.chosen_s < res.z_gray_min
    assert res.tpr == 1.0 and res.fpr == 0.0
    # every sample contributes its healthy spines, gray ones theirs
    assert res.n_healthy == 21 and res.n_gray == 3


def test_calibrate_grid_roc():
    healthy = [sample([998, 1002, 1000, 1000], n=4000)]
    gray = [sample([1000, 1000, 1000, 700], n=4000, gray=(3,))]
    res = calibrate_s(healthy + gray, grid=(0.01, 1.0, 50.0))
    pts = res.roc_points
    assert [p[0] for p in pts] == [0.01, 1.0, 50.0]
    # tiny s flags noise (fpr > 0), huge s misses the gray spine
    assert pts[0][2] > 0.0
    assert pts[-1][1] == 0.0


def test_calibrate_without_gray_runs():
    res = calibrate_s([sample([1000, 1000, 1000, 1000], n=4000)])
    assert res.n_gray == 0
    assert math.isinf(res.z_gray_min)


def test_calibrate_band_inversion_reported():
    # gray barely distinguishable: z_gray below z_healthy leaves no band
    healthy = [sample([940, 1020, 1020, 1020], n=4000)]
    gray = [sample([1000, 1000, 1000, 990], n=3990, gray=(3,))]
    res = calibrate_s(healthy + gray)
    assert not res.band_exists


def test_find_min_packets_bisects():
    calls = []

    def passes(per_spine):
        calls.append(per_spine)
        return per_spine >= 3000

    assert find_min_packets(passes, lo=128, hi=1 << 20) == 3000
    assert len(calls) < 40


def test_find_min_packets_none_when_unattainable():
    assert find_min_packets(lambda n: False, 128, 4096) is None


def test_find_min_packets_monotone_guard():
    # the bracket search assumes monotonicity; a predicate true at the
    # floor returns the floor
    assert find_min_packets(lambda n: True, 128, 4096) == 128


def test_required_collective_size_rows():
    pk, nbytes, iters = required_collective_size(7000, 64)
    assert pk == 448_000
    assert round(nbytes / 2**30, 2) == 3.91
    assert round(iters, 2) == 0.51

    pk, nbytes, iters = required_collective_size(20_000, 8)
    assert pk == 160_000
    assert round(nbytes / 2**30, 2) == 1.4
    assert round(iters, 2) == 0.18

    pk, nbytes, iters = required_collective_size(60_000, 32)
    assert pk == 1_920_000
    assert round(nbytes / 2**30, 2) == 16.74
    assert round(iters, 2) == 2.19


def test_required_collective_size_uses_wire_payload():
    pk, nbytes, _ = required_collective_size(1000, 4)
    assert nbytes == pk * PACKET_WIRE_BYTES
    assert LLAMA3_ITER_BYTES == 8_192_000_000
    with pytest.raises(ValueError):
        required_collective_size(0, 8)


def test_zscore_definition():
    from spraywatch.harness.metrics import zscores
    z = zscores({0: 90, 1: 110}, 200, 2)
    lam = 100.0
    assert z[0] == pytest.approx((lam - 90) / math.sqrt(lam))
    assert z[1] == pytest.approx((lam - 110) / math.sqrt(lam))
