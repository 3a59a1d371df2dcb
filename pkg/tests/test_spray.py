import random
from collections import Counter

import pytest

from spraywatch.spray import (QUANTUM, flow_spray_rng, link_drop_rng,
                              spray_select)


def test_uniform_deterministic_per_flow():
    a = [spray_select("uniform", [0, 1, 2, 3], [0] * 4, flow_spray_rng(7, 1))
         for _ in range(50)]
    b = [spray_select("uniform", [0, 1, 2, 3], [0] * 4, flow_spray_rng(7, 1))
         for _ in range(50)]
    assert a == b
    c = [spray_select("uniform", [0, 1, 2, 3], [0] * 4, flow_spray_rng(7, 2))
         for _ in range(50)]
    assert a != c


def test_uniform_ignores_occupancy():
    rng1 = flow_spray_rng(3, 9)
    rng2 = flow_spray_rng(3, 9)
    a = [spray_select("uniform", [5, 6, 7], [0, 0, 0], rng1)
         for _ in range(30)]
    b = [spray_select("uniform", [5, 6, 7], [900, 0, 10**9], rng2)
         for _ in range(30)]
    assert a == b


def test_po2c_prefers_emptier():
    rng = random.Random(0)
    picks = Counter(spray_select("po2c", [0, 1], [10_000, 0], rng)
                    for _ in range(2000))
    # both candidates in every pair-draw resolve to the emptier one;
    # only the (0,0) and (1,1) draws can pick the loaded port
    assert picks[1] > picks[0] * 2


def test_po2c_consumes_two_draws():
    rng = flow_spray_rng(1, 1)
    spray_select("po2c", [0, 1, 2], [0, 0, 0], rng)
    after_two = flow_spray_rng(1, 1)
    after_two.random()
    after_two.random()
    assert rng.random() == after_two.random()


def test_quantized_picks_lowest_bucket():
    rng = random.Random(5)
    occ = [QUANTUM * 3, QUANTUM * 3, 10, QUANTUM - 1]
    picks = {spray_select("quantized", [0, 1, 2, 3], occ, rng)
             for _ in range(200)}
    # 10 and QUANTUM-1 share the lowest bucket
    assert picks == {2, 3}


def test_min_policy_no_draws():
    rng = flow_spray_rng(2, 2)
    before = rng.random()
    rng = flow_spray_rng(2, 2)
    assert spray_select("min", [4, 5, 6], [9, 1, 1], rng) == 5
    assert rng.random() == before


def test_unknown_policy():
    with pytest.raises(ValueError):
        spray_select("lowest-latency", [0, 1], [0, 0], random.Random(0))
    # one candidate short-circuits before the policy matters
    assert spray_select("lowest-latency", [4], [0], random.Random(0)) == 4
    with pytest.raises(ValueError):
        spray_select("uniform", [], [], random.Random(0))


def test_link_drop_rng_stable_across_runs():
    a = link_drop_rng(11, 1234)
    b = link_drop_rng(11, 1234)
    assert [a.random() for _ in range(10)] == [b.random() for _ in range(10)]
    assert link_drop_rng(11, 1234).random() != link_drop_rng(12, 1234).random()
