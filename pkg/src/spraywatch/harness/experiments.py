"""Scenario builders behind the CLI and the acceptance suite.

Every experiment returns one plain dict

    {"name": str, "config": {...}, "results": {...},
     "checks": [{"name": str, "pass": bool, "detail": str}, ...],
     "runtime_s": float, "ok": bool}

so a run can be dumped straight to JSON. Bulk-statistics sweeps go
through harness.fastlane; anything that depends on queueing, pacing,
congestion control, or packet ordering runs the event simulator.

Seed arguments accept an iterable of seeds or an int n meaning range(n).
quick=True shrinks sizes and seed counts roughly tenfold for smoke
runs; the shrunk variants keep the shape of every check but lose the
calibrated margins, so only full runs gate anything.
"""

from __future__ import annotations

import math
import random
import time

import numpy as np

from ..monitor import DOWN, UP, FleetMonitor
from ..sim import SimConfig, run_scenario
from ..spraycheck import DetectorConfig, MeasureSelector, compute_threshold
from ..topology import build_fat_tree, down_id, set_link_state, up_id
from ..workload import FlowSpec, bisection_traffic, ring_flows
from . import metrics
from .calibrate import (SLACK, CalibrationResult, CalibrationSample,
                        calibrate_s, find_pmin_per_spine)
from .fastlane import measured_flow_counts, spray_study_counts

GRAY_RATES = (0.02, 0.015, 0.01, 0.005)

# Per-spine collective sizes from the deployment sizing guide, used as
# the comparison anchor for the calibrated minimums: a healthy
# calibration lands within 2x of each row.
BASELINE_MIN_PER_SPINE = {0.02: 2000, 0.015: 7000, 0.01: 20000, 0.005: 60000}

S_GRID = (0.05, 0.1, 0.2, 0.35, 0.5, 0.7, 0.9, 1.2, 1.6, 2.2, 3.0, 4.0)

DATA_PAYLOAD = 4096
WIRE_BYTES = 4154


def _seeds(seeds) -> list[int]:
    if seeds is None:
        return list(range(20))
    if isinstance(seeds, int):
        return list(range(seeds))
    return list(seeds)


def _check(name: str, ok: bool, detail: str = "") -> dict:
    return {"name": name, "pass": bool(ok), "detail": detail}


def _finish(name: str, t0: float, config: dict, results: dict,
            checks: list[dict]) -> dict:
    return {
        "name": name,
        "config": config,
        "results": results,
        "checks": checks,
        "runtime_s": round(time.perf_counter() - t0, 3),
        "ok": all(c["pass"] for c in checks),
    }


# ---------------------------------------------------------------------------
# calibration of the threshold scale


def _count_samples(spines: int, per_spine: int, drop_rate: float | None,
                   seeds, policy: str, gray_spine: int) -> list[CalibrationSample]:
    """Per-spine counts of one measured flow on a two-leaf fabric, one
    sample per seed, with an optional gray uplink."""
    n = per_spine * spines
    topo = build_fat_tree(n_leaves=2, n_spines=spines, hosts_per_leaf=1)
    gray = frozenset()
    if drop_rate:
        set_link_state(topo, up_id(0, gray_spine), drop_rate=drop_rate)
        gray = frozenset({gray_spine})
    out = []
    for seed in _seeds(seeds):
        counts, _ = measured_flow_counts(topo, seed, 1, 0, 1, n, policy=policy)
        out.append(CalibrationSample(counts, n, spines, gray))
    return out


def calibration_corpus(spines: int = 8, packets_per_spine: int = 500_000,
                       drop_rates=(0.005,), seeds=20, policy: str = "usage",
                       gray_spine: int | None = None) -> list[CalibrationSample]:
    """Healthy runs plus one-gray-uplink runs per drop rate."""
    gray = spines // 2 if gray_spine is None else gray_spine
    samples = _count_samples(spines, packets_per_spine, None, seeds, policy, gray)
    for rate in drop_rates:
        samples += _count_samples(spines, packets_per_spine, rate, seeds,
                                  policy, gray)
    return samples


_S_CACHE: dict = {}


def default_s(spines: int = 8, packets_per_spine: int = 100_000,
              seeds: int = 5) -> float:
    """Threshold scale from a small healthy corpus, for experiments run
    standalone without a prior full calibration pass."""
    key = (spines, packets_per_spine, seeds)
    if key not in _S_CACHE:
        corpus = calibration_corpus(spines, packets_per_spine, (), seeds)
        _S_CACHE[key] = calibrate_s(corpus).chosen_s
    return _S_CACHE[key]


def run_calibration(spines: int = 8, packets_per_spine: int = 500_000,
                    drop_rates=(0.005, 0.004), seeds=20,
                    policy: str = "usage", grid=S_GRID) -> CalibrationResult:
    """Calibrate s on the standard corpus: healthy plus single-gray-link
    runs at each drop rate, with a TPR/FPR grid for the record."""
    samples = calibration_corpus(spines, packets_per_spine, tuple(drop_rates),
                                 seeds, policy)
    return calibrate_s(samples, grid=tuple(grid))


def calibration_sweep(spines: int = 8, packets_per_spine: int = 500_000,
                      drop_rates=(0.005, 0.004), seeds=20,
                      policy: str = "usage", grid=S_GRID,
                      quick: bool = False) -> dict:
    """Threshold-scale calibration: separation bands per drop rate, a
    ROC grid, and the healthy-count spread per spray policy."""
    t0 = time.perf_counter()
    seeds = _seeds(seeds)
    if quick:
        packets_per_spine //= 10
        seeds = seeds[:5]
    gray = spines // 2
    healthy = _count_samples(spines, packets_per_spine, None, seeds, policy, gray)
    grays = {r: _count_samples(spines, packets_per_spine, r, seeds, policy, gray)
             for r in drop_rates}

    primary = drop_rates[0]
    res = calibrate_s(healthy + grays[primary], grid=tuple(grid))

    # healthy per-spine count spread, usage-balanced vs plain random
    res.empirical_sigma["usage"] = float(np.mean(
        [metrics.sample_variance(list(sm.counts.values())) for sm in healthy]))
    uni = _count_samples(spines, packets_per_spine, None, seeds[:5], "uniform", gray)
    res.empirical_sigma["uniform"] = float(np.mean(
        [metrics.sample_variance(list(sm.counts.values())) for sm in uni]))

    bands = {}
    for rate in drop_rates:
        b = calibrate_s(healthy + grays[rate])
        bands[rate] = {"z_healthy_max": b.z_healthy_max,
                       "z_gray_min": b.z_gray_min,
                       "band_exists": b.band_exists,
                       "tpr_at_chosen": b.tpr, "fpr_at_chosen": b.fpr}

    roc = res.roc_points
    mono = all(roc[i][1] >= roc[i + 1][1] and roc[i][2] >= roc[i + 1][2]
               for i in range(len(roc) - 1))

    checks = [
        _check("band_exists_primary", bands[primary]["band_exists"],
               f"rate={primary}: z_healthy_max={res.z_healthy_max:.4f} "
               f"z_gray_min={res.z_gray_min:.4f}"),
        _check("chosen_s_perfect", res.tpr == 1.0 and res.fpr == 0.0,
               f"s={res.chosen_s:.4f} tpr={res.tpr} fpr={res.fpr}"),
        _check("roc_monotone", mono, f"{len(roc)} grid points"),
        _check("usage_counts_tighter",
               res.empirical_sigma["usage"] < res.empirical_sigma["uniform"],
               f"usage={res.empirical_sigma['usage']:.2f} "
               f"uniform={res.empirical_sigma['uniform']:.2f}"),
    ]
    for rate in drop_rates[1:]:
        checks.append(_check(f"band_exists_{rate}", bands[rate]["band_exists"],
                             f"z_gray_min={bands[rate]['z_gray_min']:.4f}"))
    cfg = {"spines": spines, "packets_per_spine": packets_per_spine,
           "drop_rates": list(drop_rates), "seeds": len(seeds),
           "policy": policy}
    results = res.to_dict()
    results["bands"] = {str(r): b for r, b in bands.items()}
    return _finish("calibration_sweep", t0, cfg, results, checks)


# ---------------------------------------------------------------------------
# minimum collective size per drop rate


def find_pmin(chosen_s: float, drop_rate: float, spines: int = 8, seeds=20,
              lo: int = 128, hi: int = 1 << 20, slack: float = SLACK,
              gray_spine: int = 3) -> int | None:
    """Smallest per-spine packet share at which every seed flags exactly
    the gray uplink and the worst seed clears the threshold by `slack`
    standard deviations of the loss noise."""
    seeds = _seeds(seeds)
    topo = build_fat_tree(n_leaves=2, n_spines=spines, hosts_per_leaf=1)
    set_link_state(topo, up_id(0, gray_spine), drop_rate=drop_rate)

    def cell(per_spine: int) -> bool:
        n = per_spine * spines
        lam = n / spines
        thr = compute_threshold(n, spines, chosen_s)
        need = (chosen_s * math.sqrt(lam)
                + slack * math.sqrt(lam * drop_rate) * (1 - 1 / spines))
        for seed in seeds:
            counts, _ = measured_flow_counts(topo, seed, 0, 0, 1, n)
            if {sp for sp, x in counts.items() if x < thr} != {gray_spine}:
                return False
            if lam - counts[gray_spine] < need:
                return False
        return True

    return find_pmin_per_spine(cell, lo, hi)


def pmin_table(chosen_s: float | None = None, rates=GRAY_RATES,
               spines: int = 8, seeds=20, quick: bool = False) -> dict:
    """Calibrated minimum per-spine sizes across drop rates."""
    t0 = time.perf_counter()
    if chosen_s is None:
        chosen_s = default_s()
    seeds = _seeds(seeds)
    if quick:
        seeds = seeds[:5]
    found = {rate: find_pmin(chosen_s, rate, spines, seeds) for rate in rates}
    ratios = {rate: (found[rate] / BASELINE_MIN_PER_SPINE[rate]
                     if found[rate] else None) for rate in rates}

    ordered = sorted(rates)
    vals = [found[r] for r in ordered]
    checks = [
        _check("all_rates_found", all(v is not None for v in vals),
               str({f"{r:.3f}": found[r] for r in rates})),
        _check("ordering_strict",
               all(v is not None for v in vals)
               and all(a > b for a, b in zip(vals, vals[1:])),
               "lower drop rate needs a strictly larger flow"),
    ]
    for rate in rates:
        r = ratios[rate]
        checks.append(_check(f"within_2x_{rate}",
                             r is not None and 0.5 <= r <= 2.0,
                             f"found={found[rate]} baseline="
                             f"{BASELINE_MIN_PER_SPINE[rate]} ratio="
                             f"{r:.3f}" if r else "no size found"))
    cfg = {"chosen_s": chosen_s, "spines": spines, "seeds": len(seeds),
           "rates": list(rates), "slack": SLACK}
    results = {"p_min_per_spine": {str(r): found[r] for r in rates},
               "baseline": {str(r): BASELINE_MIN_PER_SPINE[r] for r in rates},
               "ratios": {str(r): ratios[r] for r in rates}}
    return _finish("pmin_table", t0, cfg, results, checks)


def _verdict_cell(chosen_s: float, per_spine: int, rate: float, spines: int,
                  seeds, gray_spine: int | None = None) -> dict:
    """Plain detector verdict for one (size, rate, width) cell."""
    gray = (spines // 2 if spines > 4 else 3) if gray_spine is None else gray_spine
    n = per_spine * spines
    thr = compute_threshold(n, spines, chosen_s)
    topo = build_fat_tree(n_leaves=2, n_spines=spines, hosts_per_leaf=1)
    set_link_state(topo, up_id(0, gray), drop_rate=rate)
    cells = []
    for seed in _seeds(seeds):
        counts, _ = measured_flow_counts(topo, seed, 0, 0, 1, n)
        flagged = {sp for sp, x in counts.items() if x < thr}
        cells.append(metrics.verdict(flagged, {gray}))
    return metrics.merge_verdicts(cells)


def size_invariance(chosen_s: float | None = None, found: dict | None = None,
                    widths=(8, 16, 32, 64), seeds=20,
                    quick: bool = False) -> dict:
    """Transfer the 8-spine (s, p_min) operating point to other fabric
    widths without retuning and re-check the verdicts."""
    t0 = time.perf_counter()
    if chosen_s is None:
        chosen_s = default_s()
    seeds = _seeds(seeds)
    if quick:
        seeds = seeds[:3]
    if found is None:
        found = {rate: find_pmin(chosen_s, rate, seeds=seeds)
                 for rate in GRAY_RATES}

    table = {}
    checks = []
    for k in widths:
        for rate, per_spine in found.items():
            cell = _verdict_cell(chosen_s, per_spine, rate, k, seeds)
            table[f"k={k} rate={rate}"] = cell
            checks.append(_check(
                f"perfect_k{k}_rate{rate}",
                cell["fnr_zero"] and cell["fpr_zero"],
                f"per_spine={per_spine} missed={cell['missed']} "
                f"false={cell['false']} over {cell['n']} seeds"))
    cfg = {"chosen_s": chosen_s, "widths": list(widths),
           "found": {str(r): v for r, v in found.items()},
           "seeds": len(seeds)}
    return _finish("size_invariance", t0, cfg, {"cells": table}, checks)


def required_sizes_table(found: dict | None = None, widths=(8, 16, 32, 64),
                         quick: bool = False) -> dict:
    """Collective sizes (packets, bytes, training iterations) needed to
    feed the detector its minimum per-spine share, per rate and width."""
    from .calibrate import required_collective_size
    t0 = time.perf_counter()
    if found is None:
        found = dict(BASELINE_MIN_PER_SPINE)
    rows = []
    for rate, per_spine in sorted(found.items()):
        for k in widths:
            pk, nb, iters = required_collective_size(per_spine, k)
            rows.append({"rate": rate, "spines": k, "p_min": per_spine,
                         "packets": pk, "gib": round(nb / 2**30, 2),
                         "iterations": round(iters, 2)})
    checks = [_check("rows_present", len(rows) == len(found) * len(widths))]
    return _finish("required_sizes", t0, {"widths": list(widths)},
                   {"rows": rows}, checks)


# ---------------------------------------------------------------------------
# spray predictability (count spread per policy)


def spray_predictability(n_packets: int = 100_000, n_spines: int = 32,
                         seeds=20, quick: bool = False) -> dict:
    """Per-spine count spread of one unprioritized flow under each spray
    policy, against the binomial spread of plain random spraying."""
    t0 = time.perf_counter()
    seeds = _seeds(seeds)
    if quick:
        n_packets //= 10
        seeds = seeds[:5]
    lam = n_packets / n_spines
    binom = lam * (1 - 1 / n_spines)

    policies = ("uniform", "po2c", "quantized")
    variances: dict[str, list[float]] = {p: [] for p in policies}
    sums_ok = True
    for policy in policies:
        for seed in seeds:
            counts = spray_study_counts(seed, 1, n_spines, n_packets, policy)
            sums_ok &= sum(counts) == n_packets
            variances[policy].append(metrics.sample_variance(counts))

    mean_var = {p: float(np.mean(variances[p])) for p in policies}
    ratio = mean_var["uniform"] / binom
    po2c_lower = all(v < u for v, u in zip(variances["po2c"],
                                           variances["uniform"]))
    quant_lower = all(v < u for v, u in zip(variances["quantized"],
                                            variances["uniform"]))

    checks = [
        _check("mean_exact", sums_ok,
               f"every run placed all {n_packets} packets; mean={lam:g}"),
        _check("uniform_var_binomial", abs(ratio - 1.0) <= 0.20,
               f"mean var {mean_var['uniform']:.1f} vs binomial "
               f"{binom:.1f} (ratio {ratio:.3f})"),
        _check("po2c_below_uniform", po2c_lower,
               f"worst {max(variances['po2c']):.1f} vs uniform best "
               f"{min(variances['uniform']):.1f}"),
        _check("quantized_below_uniform", quant_lower,
               f"worst {max(variances['quantized']):.1f} vs uniform best "
               f"{min(variances['uniform']):.1f}"),
    ]
    cfg = {"n_packets": n_packets, "n_spines": n_spines, "seeds": len(seeds)}
    results = {"mean_variance": mean_var, "binomial_variance": binom,
               "uniform_ratio": ratio,
               "variance_range": {p: [min(v), max(v)]
                                  for p, v in variances.items()}}
    return _finish("spray_predictability", t0, cfg, results, checks)


# ---------------------------------------------------------------------------
# prioritization keeps measured counts workload independent


def priority_isolation(n_packets: int = 16384, seeds=12, alpha: float = 0.01,
                       quick: bool = False) -> dict:
    """Per-spine count distribution of a measured flow run alone vs next
    to a competing flow whose path lost one downlink, with and without
    measurement prioritization."""
    t0 = time.perf_counter()
    seeds = _seeds(seeds)
    if quick:
        n_packets //= 4
        seeds = seeds[:4]

    # four leaves, four spines, two hosts per leaf; the competitor's
    # destination leaf loses its downlink from spine 1, so the
    # competitor sprays over three spines and leaves spine 1 free,
    # which occupancy-driven spraying of the measured flow would chase
    dead = down_id(1, 3)
    n_spines = 4
    pace_ns = WIRE_BYTES * 8 * 10 // 1000  # one packet at 100 Gb/s
    half = n_packets * pace_ns // 2

    def topo():
        t = build_fat_tree(n_leaves=4, n_spines=n_spines, hosts_per_leaf=2)
        set_link_state(t, dead, enabled=False)
        return t

    flow_b = FlowSpec(qp=1, src_host=0, dst_host=4, n_packets=n_packets)
    flow_a = FlowSpec(qp=2, src_host=1, dst_host=6, n_packets=n_packets,
                      measure_eligible=False)
    flow_a_late = FlowSpec(qp=2, src_host=1, dst_host=6, n_packets=n_packets,
                           measure_eligible=False, start_ns=half)
    prio = SimConfig(count_spray=True)
    plain = SimConfig(count_spray=True, prioritize_measured=False)
    scenarios = {
        "alone_prio": ([flow_b], prio),
        "with_prio": ([flow_b, flow_a], prio),
        "alone_plain": ([flow_b], plain),
        "overlap_plain": ([flow_b, flow_a], plain),
        "late_plain": ([flow_b, flow_a_late], plain),
    }

    fracs: dict[str, list[float]] = {name: [] for name in scenarios}
    counts_by: dict[str, dict[int, list[int]]] = {"alone_prio": {},
                                                  "with_prio": {}}
    prio_reports = 0
    plain_reports = 0
    for seed in seeds:
        for name, (flows, cfg) in scenarios.items():
            tr = run_scenario(topo(), flows, cfg, None, seed)
            counts = tr.spray_counts[1]
            fracs[name].extend(c / n_packets for c in counts)
            if name in counts_by:
                counts_by[name][seed] = counts
            if name.endswith("prio"):
                prio_reports += len(tr.reports)
            else:
                plain_reports += len(tr.reports)

    _, p_prio = metrics.ks_two_sample(fracs["with_prio"], fracs["alone_prio"])
    _, p_overlap = metrics.ks_two_sample(fracs["overlap_plain"],
                                         fracs["alone_plain"])
    _, p_late = metrics.ks_two_sample(fracs["late_plain"],
                                      fracs["alone_plain"])
    identical = all(counts_by["with_prio"][s] == counts_by["alone_prio"][s]
                    for s in seeds)

    checks = [
        _check("ks_prioritized_passes", p_prio >= alpha,
               f"p={p_prio:.4g} at alpha={alpha}"),
        _check("ks_unprioritized_fails", min(p_overlap, p_late) < alpha,
               f"overlap p={p_overlap:.4g} late p={p_late:.4g}"),
        _check("prioritized_counts_identical", identical,
               "coexistence did not move a single packet"),
        _check("no_reports_prioritized", prio_reports == 0,
               f"{prio_reports} reports"),
    ]
    cfg = {"n_packets": n_packets, "seeds": len(seeds), "alpha": alpha,
           "disabled": dead}
    results = {"p_values": {"with_prio": p_prio, "overlap_plain": p_overlap,
                            "late_plain": p_late},
               "plain_false_reports": plain_reports}
    return _finish("priority_isolation", t0, cfg, results, checks)


# ---------------------------------------------------------------------------
# end-to-end replay: detection during a running collective


def endtoend_replay(chosen_s: float | None = None, seeds=5, reps: int = 20,
                    inject_rep: int = 12, per_qp_packets: int = 73728,
                    gray_rate: float = 0.01, quick: bool = False) -> dict:
    """Repeated 3-rank ring allreduce over a degraded fabric; a gray
    uplink appears between two repetitions and must be reported by the
    end of the repetition that first sprays across it."""
    t0 = time.perf_counter()
    seeds = _seeds(seeds)
    if quick:
        seeds = seeds[:2]
        reps, inject_rep = 8, 5
        per_qp_packets //= 8
        gray_rate = 0.05  # keep the deficit detectable at the small size

    if chosen_s is None:
        chosen_s = default_s()
    hosts = [0, 2, 4]               # one rank per leaf
    pair_bytes = per_qp_packets * DATA_PAYLOAD
    base_events = [(0, up_id(2, 4), False, None),
                   (0, down_id(0, 0), False, None)]
    gray_events = base_events + [(0, up_id(2, 1), None, gray_rate)]
    det = DetectorConfig(s=chosen_s, pmin=0)
    round_ns = int(per_qp_packets * WIRE_BYTES * 8 * 10 / 1000 * 1.3) + 2_000_000

    def phase(rounds: int, events, seed: int):
        topo = build_fat_tree(n_leaves=3, n_spines=5, hosts_per_leaf=2)
        flows = ring_flows(3, pair_bytes, qps_per_pair=1, hosts=hosts,
                           rounds=rounds)
        flows += bisection_traffic([1], [3], 5 * 10**9, rounds * round_ns,
                                   qp_base=9001)
        tr = run_scenario(topo, flows, SimConfig(), det, seed, list(events))
        ccts = []
        for r in range(rounds):
            qps = [3 * r + 1, 3 * r + 2, 3 * r + 3]
            done = max(tr.flows[q]["t_done"] for q in qps)
            start = min(tr.flows[q]["start_ns"] for q in qps)
            ccts.append(done - start)
        return tr, ccts

    pre_rounds = inject_rep - 1
    post_rounds = reps - inject_rep + 1
    per_seed = []
    checks_ok = {"no_reports_before": True, "gray_path_reported": True,
                 "reported_in_first_rep": True, "ccts_degraded": True}
    for seed in seeds:
        tr1, cct1 = phase(pre_rounds, base_events, seed)
        tr2, cct2 = phase(post_rounds, gray_events, seed)
        checks_ok["no_reports_before"] &= not tr1.reports
        good_path = bool(tr2.reports) and all(
            r["src_leaf"] == 2 and r["dst_leaf"] == 0 and r["spine"] == 1
            for r in tr2.reports)
        checks_ok["gray_path_reported"] &= good_path
        if tr2.reports:
            # the victim pair's flow in repetition r carries qp 3r+3
            first_round = min((r["qp"] - 3) // 3 for r in tr2.reports)
            rep = inject_rep + first_round
        else:
            rep = None
        checks_ok["reported_in_first_rep"] &= rep in (inject_rep,
                                                      inject_rep + 1)
        med = float(np.median(cct1))
        checks_ok["ccts_degraded"] &= all(c > med for c in cct2)
        per_seed.append({"seed": seed, "detected_rep": rep,
                         "pre_median_ms": round(med / 1e6, 3),
                         "post_min_ms": round(min(cct2) / 1e6, 3),
                         "post_max_ms": round(max(cct2) / 1e6, 3),
                         "reports": len(tr2.reports)})

    checks = [
        _check("no_reports_before_injection", checks_ok["no_reports_before"]),
        _check("gray_path_reported", checks_ok["gray_path_reported"],
               "every report names leaf2->leaf0 via spine 1"),
        _check("reported_in_first_rep", checks_ok["reported_in_first_rep"],
               f"target repetition {inject_rep} (+1 allowed)"),
        _check("post_ccts_exceed_pre_median", checks_ok["ccts_degraded"]),
    ]
    cfg = {"chosen_s": chosen_s, "seeds": len(seeds), "reps": reps,
           "inject_rep": inject_rep, "per_qp_packets": per_qp_packets,
           "gray_rate": gray_rate,
           "disabled": [e[1] for e in base_events]}
    return _finish("endtoend_replay", t0, cfg, {"per_seed": per_seed}, checks)


# ---------------------------------------------------------------------------
# localization matrix


def _oracle_flagged(src: int, dst: int, victims) -> set[int]:
    out = set()
    for role, leaf, spine in victims:
        if (role == UP and leaf == src) or (role == DOWN and leaf == dst):
            out.add(spine)
    return out


def _expected_blame(victims) -> set:
    by: dict[tuple[int, int], set] = {}
    for role, leaf, spine in victims:
        by.setdefault((leaf, spine), set()).add(role)
    return {(l, sp, frozenset(roles)) for (l, sp), roles in by.items()}


def _blamed_set(mon: FleetMonitor) -> set:
    return {(f.leaf, f.spine, frozenset(f.directions)) for f in mon.localize()}


def _feed_oracle(mon: FleetMonitor, k: int, victims, flow_pairs,
                 start: int = 0) -> None:
    t = start
    for src, dst in flow_pairs:
        flagged = _oracle_flagged(src, dst, victims)
        mon.observe_sample(src, dst, sorted(flagged),
                           sorted(set(range(k)) - flagged), t)
        t += 1


def _victim_flows(victim, cs) -> list[tuple[int, int]]:
    role, leaf, _ = victim
    if role == UP:
        return [(leaf, cs[0]), (leaf, cs[1])]
    return [(cs[0], leaf), (cs[1], leaf)]


def _others(n_leaves: int, exclude) -> list[int]:
    return [l for l in range(n_leaves) if l not in exclude]


def _healthy_subset(blamed: set, victims) -> bool:
    """True when everything blamed sits on a victim adjacency."""
    adj = {(leaf, spine) for _, leaf, spine in victims}
    return all((l, sp) in adj for l, sp, _ in blamed)


def _oracle_lane(n_leaves: int = 8, n_spines: int = 8,
                 stride: int = 1) -> dict:
    """Exhaustive single and pairwise gray placements against an ideal
    evidence feed. Returns bucket tallies plus failure examples."""
    dirlinks = [(UP, l, s) for l in range(n_leaves) for s in range(n_spines)]
    dirlinks += [(DOWN, l, s) for l in range(n_leaves) for s in range(n_spines)]
    tally = {b: {"n": 0, "exact": 0, "bad": []}
             for b in ("single", "same_leaf", "disjoint", "shared_distinct",
                       "shared_witnessed", "shared_violating")}
    healthy_clean = True

    def run(bucket, victims, flows, expect_blame=True, expect_shadow=False):
        nonlocal healthy_clean
        mon = FleetMonitor()
        _feed_oracle(mon, n_spines, victims, flows)
        blamed = _blamed_set(mon)
        healthy_clean &= _healthy_subset(blamed, victims)
        want = _expected_blame(victims) if expect_blame else set()
        ok = blamed == want
        if expect_shadow:
            spines = {sp for _, _, sp in victims}
            ok &= spines <= {g["spine"] for g in mon.shadowing_check()}
        t = tally[bucket]
        t["n"] += 1
        if ok:
            t["exact"] += 1
        elif len(t["bad"]) < 3:
            t["bad"].append({"victims": [list(v) for v in victims],
                             "blamed": sorted(str(b) for b in blamed)})

    for v in dirlinks:
        cs = _others(n_leaves, {v[1]})
        run("single", [v], _victim_flows(v, cs[:2]))

    pairs = [(a, b) for i, a in enumerate(dirlinks)
             for b in dirlinks[i + 1:]][::stride] if stride > 1 else None

    def iter_pairs():
        for i, a in enumerate(dirlinks):
            for b in dirlinks[i + 1:]:
                yield a, b

    idx = 0
    for a, b in iter_pairs():
        idx += 1
        if stride > 1 and idx % stride:
            continue
        same_leaf = a[1] == b[1]
        same_spine = a[2] == b[2]
        if same_leaf:
            cs = _others(n_leaves, {a[1]})
            run("same_leaf", [a, b],
                _victim_flows(a, cs[:2]) + _victim_flows(b, cs[2:4]))
        elif not same_spine:
            cs = _others(n_leaves, {a[1], b[1]})
            run("disjoint", [a, b],
                _victim_flows(a, cs[:2]) + _victim_flows(b, cs[2:4]))
        else:
            cs = _others(n_leaves, {a[1], b[1]})
            # distinct counterparts per victim: resolvable
            run("shared_distinct", [a, b],
                _victim_flows(a, cs[:2]) + _victim_flows(b, cs[2:4]))
            # shared counterparts: resolvable only with healthy witnesses
            shared = (_victim_flows(a, cs[:2]) + _victim_flows(b, cs[:2]))
            w = cs[2]
            witnesses = [(w, cs[0]), (w, cs[1]), (cs[0], w), (cs[1], w)]
            run("shared_witnessed", [a, b], shared + witnesses)
            # evidence only between the two victim leaves: ambiguous
            run("shared_violating", [a, b], [(a[1], b[1]), (b[1], a[1])],
                expect_blame=False, expect_shadow=True)

    out = {"buckets": {k2: {"n": v["n"], "exact": v["exact"], "bad": v["bad"]}
                       for k2, v in tally.items()},
           "healthy_never_blamed": healthy_clean}
    _ = pairs
    return out


def _fastlane_localize(chosen_s: float, n_leaves: int = 8, n_spines: int = 8,
                       n_packets: int = 65536, drop: float = 0.3,
                       seed0: int = 0) -> dict:
    """Singles exhaustively plus sampled pairs, with evidence produced by
    the accelerated packet loop instead of an ideal feed."""
    thr = compute_threshold(n_packets, n_spines, chosen_s)

    def link_of(victim) -> str:
        role, leaf, spine = victim
        return up_id(leaf, spine) if role == UP else down_id(spine, leaf)

    def run_case(victims, flow_pairs, seed, expect_blame=True,
                 expect_shadow=False) -> tuple[bool, bool]:
        topo = build_fat_tree(n_leaves=n_leaves, n_spines=n_spines,
                              hosts_per_leaf=1)
        for v in victims:
            set_link_state(topo, link_of(v), drop_rate=drop)
        mon = FleetMonitor()
        for i, (src, dst) in enumerate(flow_pairs):
            counts, _ = measured_flow_counts(topo, seed + i, 1 + i, src, dst,
                                             n_packets)
            flagged = sorted(sp for sp, x in counts.items() if x < thr)
            healthy = sorted(sp for sp in counts if sp not in flagged)
            mon.observe_sample(src, dst, flagged, healthy, i)
        blamed = _blamed_set(mon)
        clean = _healthy_subset(blamed, victims)
        want = _expected_blame(victims) if expect_blame else set()
        ok = blamed == want
        if expect_shadow:
            spines = {sp for _, _, sp in victims}
            ok &= spines <= {g["spine"] for g in mon.shadowing_check()}
        return ok, clean

    dirlinks = [(UP, l, s) for l in range(n_leaves) for s in range(n_spines)]
    dirlinks += [(DOWN, l, s) for l in range(n_leaves) for s in range(n_spines)]
    exact = 0
    total = 0
    clean_all = True
    bad = []

    for i, v in enumerate(dirlinks):
        cs = _others(n_leaves, {v[1]})
        ok, clean = run_case([v], _victim_flows(v, cs[:2]), seed0 + i)
        total += 1
        exact += ok
        clean_all &= clean
        if not ok and len(bad) < 3:
            bad.append(str(v))

    # sampled pairs, one per formation kind per stride position
    same_leaf, disjoint, shared = [], [], []
    for i, a in enumerate(dirlinks):
        for b in dirlinks[i + 1:]:
            if a[1] == b[1]:
                same_leaf.append((a, b))
            elif a[2] != b[2]:
                disjoint.append((a, b))
            else:
                shared.append((a, b))
    picks = (same_leaf[::len(same_leaf) // 16][:16]
             + disjoint[::len(disjoint) // 16][:16])
    pair_results = []
    for j, (a, b) in enumerate(picks):
        cs = _others(n_leaves, {a[1], b[1]})
        ok, clean = run_case([a, b],
                             _victim_flows(a, cs[:2]) + _victim_flows(b, cs[2:4]),
                             seed0 + 1000 + j)
        pair_results.append(ok)
        clean_all &= clean
    for j, (a, b) in enumerate(shared[::len(shared) // 8][:8]):
        cs = _others(n_leaves, {a[1], b[1]})
        w = cs[2]
        flows = (_victim_flows(a, cs[:2]) + _victim_flows(b, cs[:2])
                 + [(w, cs[0]), (w, cs[1]), (cs[0], w), (cs[1], w)])
        ok, clean = run_case([a, b], flows, seed0 + 2000 + j)
        pair_results.append(ok)
        clean_all &= clean
        ok2, clean2 = run_case([a, b], [(a[1], b[1]), (b[1], a[1])],
                               seed0 + 3000 + j, expect_blame=False,
                               expect_shadow=True)
        pair_results.append(ok2)
        clean_all &= clean2

    return {"singles_exact": exact, "singles_total": total,
            "pairs_exact": sum(pair_results), "pairs_total": len(pair_results),
            "healthy_never_blamed": clean_all, "bad_singles": bad}


def _event_localize(chosen_s: float, seeds=(0, 1, 2),
                    n_packets: int = 16384, drop: float = 0.05) -> dict:
    """A few gray placements driven end to end through the simulator:
    flows, selection, counters, reports, then fleet-level localization."""
    det = DetectorConfig(s=chosen_s, pmin=0)
    anchors = [
        ("single_up", [(UP, 1, 3)],
         [dict(qp=1, src_host=1, dst_host=3, n_packets=n_packets),
          dict(qp=2, src_host=1, dst_host=5, n_packets=n_packets,
               start_after=(1,))]),
        ("single_down", [(DOWN, 4, 6)],
         [dict(qp=1, src_host=2, dst_host=4, n_packets=n_packets),
          dict(qp=2, src_host=7, dst_host=4, n_packets=n_packets)]),
        ("bidir", [(UP, 2, 5), (DOWN, 2, 5)],
         [dict(qp=1, src_host=2, dst_host=4, n_packets=n_packets),
          dict(qp=2, src_host=2, dst_host=6, n_packets=n_packets,
               start_after=(1,)),
          dict(qp=3, src_host=4, dst_host=2, n_packets=n_packets),
          dict(qp=4, src_host=6, dst_host=2, n_packets=n_packets)]),
        ("shared_spine", [(UP, 1, 4), (UP, 3, 4)],
         [dict(qp=1, src_host=1, dst_host=0, n_packets=n_packets),
          dict(qp=2, src_host=1, dst_host=5, n_packets=n_packets,
               start_after=(1,)),
          dict(qp=3, src_host=3, dst_host=6, n_packets=n_packets),
          dict(qp=4, src_host=3, dst_host=7, n_packets=n_packets,
               start_after=(3,))]),
    ]

    def link_of(victim) -> str:
        role, leaf, spine = victim
        return up_id(leaf, spine) if role == UP else down_id(spine, leaf)

    rows = []
    all_ok = True
    for name, victims, flow_kw in anchors:
        for seed in _seeds(seeds):
            topo = build_fat_tree(n_leaves=8, n_spines=8, hosts_per_leaf=1)
            for v in victims:
                set_link_state(topo, link_of(v), drop_rate=drop)
            flows = [FlowSpec(**kw) for kw in flow_kw]
            tr = run_scenario(topo, flows, SimConfig(), det, seed)
            flagged_by_qp: dict[int, set[int]] = {}
            for r in tr.reports:
                flagged_by_qp.setdefault(r["qp"], set()).add(r["spine"])
            mon = FleetMonitor()
            for i, smp in enumerate(tr.samples):
                flagged = sorted(flagged_by_qp.get(smp["qp"], set()))
                healthy = [int(sp) for sp in smp["counters"]
                           if int(sp) not in flagged]
                mon.observe_sample(smp["src_leaf"], smp["dst_leaf"],
                                   flagged, sorted(healthy), i)
            ok = (_blamed_set(mon) == _expected_blame(victims)
                  and len(tr.samples) == len(flows))
            all_ok &= ok
            rows.append({"anchor": name, "seed": seed, "exact": ok})
    return {"anchors": rows, "all_exact": all_ok}


def localization_matrix(chosen_s: float | None = None, full: bool = True,
                        seeds=(0, 1, 2), quick: bool = False) -> dict:
    """Single and pairwise gray-link placements on an 8x8 fabric, from an
    ideal evidence feed up to full simulation, checking that the fleet
    monitor blames exactly the victim adjacencies and never a healthy
    one."""
    t0 = time.perf_counter()
    if chosen_s is None:
        chosen_s = default_s()
    if quick:
        full = False

    t_oracle = time.perf_counter()
    oracle = _oracle_lane(stride=7 if quick else 1)
    oracle_s = time.perf_counter() - t_oracle

    buckets = oracle["buckets"]
    resolvable = ("single", "same_leaf", "disjoint", "shared_distinct",
                  "shared_witnessed")
    checks = [
        _check("oracle_resolvable_exact",
               all(buckets[b]["exact"] == buckets[b]["n"] for b in resolvable),
               ", ".join(f"{b}={buckets[b]['exact']}/{buckets[b]['n']}"
                         for b in resolvable)),
        _check("oracle_ambiguous_flagged",
               buckets["shared_violating"]["exact"]
               == buckets["shared_violating"]["n"],
               f"{buckets['shared_violating']['n']} formations stayed "
               "unblamed with the shared spine shadow-flagged"),
        _check("oracle_no_healthy_blamed", oracle["healthy_never_blamed"]),
        _check("oracle_under_60s", oracle_s < 60, f"{oracle_s:.1f}s"),
    ]
    results = {"oracle": oracle, "oracle_runtime_s": round(oracle_s, 2)}

    if full:
        fast = _fastlane_localize(chosen_s)
        results["fastlane"] = fast
        checks += [
            _check("fastlane_singles_exact",
                   fast["singles_exact"] == fast["singles_total"],
                   f"{fast['singles_exact']}/{fast['singles_total']}"),
            _check("fastlane_pairs_exact",
                   fast["pairs_exact"] == fast["pairs_total"],
                   f"{fast['pairs_exact']}/{fast['pairs_total']}"),
            _check("fastlane_no_healthy_blamed",
                   fast["healthy_never_blamed"]),
        ]
        ev = _event_localize(chosen_s, seeds)
        results["event_sim"] = ev
        checks.append(_check("event_anchors_exact", ev["all_exact"],
                             f"{len(ev['anchors'])} anchor runs"))

    cfg = {"chosen_s": chosen_s, "full": full, "fabric": "8 leaves x 8 spines"}
    return _finish("localization_matrix", t0, cfg, results, checks)


# ---------------------------------------------------------------------------
# robustness suite


def _c8_sizes() -> dict:
    return {r: BASELINE_MIN_PER_SPINE[r] for r in (0.015, 0.01, 0.005)}


def _robust_multi_failure(chosen_s: float, seeds=20, spines: int = 32,
                          quick: bool = False) -> dict:
    """Four simultaneous gray links on the measured pair's path."""
    t0 = time.perf_counter()
    seeds = _seeds(seeds)
    sizes = _c8_sizes()
    if quick:
        seeds = seeds[:3]
        sizes = {0.015: sizes[0.015]}
    grays = {"up": [3, 17], "down": [8, 25]}
    gray_spines = set(grays["up"]) | set(grays["down"])

    checks = []
    table = {}
    for rate, per_spine in sizes.items():
        topo = build_fat_tree(n_leaves=2, n_spines=spines, hosts_per_leaf=1)
        for sp in grays["up"]:
            set_link_state(topo, up_id(0, sp), drop_rate=rate)
        for sp in grays["down"]:
            set_link_state(topo, down_id(sp, 1), drop_rate=rate)
        n = per_spine * spines
        thr = compute_threshold(n, spines, chosen_s)
        cells = []
        for seed in seeds:
            counts, _ = measured_flow_counts(topo, seed, 1, 0, 1, n)
            flagged = {sp for sp, x in counts.items() if x < thr}
            cells.append(metrics.verdict(flagged, gray_spines))
        cell = metrics.merge_verdicts(cells)
        table[str(rate)] = cell
        checks.append(_check(f"perfect_rate{rate}",
                             cell["fnr_zero"] and cell["fpr_zero"],
                             f"4 gray links, per_spine={per_spine}, "
                             f"{cell['n']} seeds"))
    cfg = {"chosen_s": chosen_s, "spines": spines, "seeds": len(seeds),
           "gray": {"uplinks_leaf0": grays["up"],
                    "downlinks_leaf1": grays["down"]}}
    return _finish("robustness_multi_failure", t0, cfg, {"cells": table},
                   checks)


def _robust_preexisting(chosen_s: float, seeds=20, leaves: int = 8,
                        spines: int = 32, disabled_frac: float = 0.06,
                        quick: bool = False) -> dict:
    """One gray uplink while 6% of fabric links are administratively
    down in a random pattern."""
    t0 = time.perf_counter()
    seeds = _seeds(seeds)
    sizes = _c8_sizes()
    if quick:
        seeds = seeds[:3]
        sizes = {0.015: sizes[0.015]}
    all_links = [up_id(l, s) for l in range(leaves) for s in range(spines)]
    all_links += [down_id(s, l) for l in range(leaves) for s in range(spines)]
    n_dead = int(len(all_links) * disabled_frac)

    checks = []
    table = {}
    k_seen = []
    for rate, per_spine in sizes.items():
        cells = []
        for seed in seeds:
            rng = random.Random(seed)
            while True:
                topo = build_fat_tree(n_leaves=leaves, n_spines=spines,
                                      hosts_per_leaf=1)
                for lid in rng.sample(all_links, n_dead):
                    set_link_state(topo, lid, enabled=False)
                usable = topo.usable_spines(0, 1)
                if len(usable) >= 4:
                    break
            k = len(usable)
            k_seen.append(k)
            gray = usable[k // 2]
            set_link_state(topo, up_id(0, gray), drop_rate=rate)
            n = per_spine * k
            thr = compute_threshold(n, k, chosen_s)
            counts, _ = measured_flow_counts(topo, seed, 1, 0, 1, n)
            flagged = {sp for sp, x in counts.items() if x < thr}
            cells.append(metrics.verdict(flagged, {gray}))
        cell = metrics.merge_verdicts(cells)
        table[str(rate)] = cell
        checks.append(_check(f"perfect_rate{rate}",
                             cell["fnr_zero"] and cell["fpr_zero"],
                             f"{n_dead} links down, per_spine={per_spine}, "
                             f"{cell['n']} seeds"))
    cfg = {"chosen_s": chosen_s, "fabric": f"{leaves}x{spines}",
           "disabled_links": n_dead, "seeds": len(seeds)}
    results = {"cells": table,
               "usable_spines_range": [min(k_seen), max(k_seen)]}
    return _finish("robustness_preexisting", t0, cfg, results, checks)


def _robust_congestion(chosen_s: float, seeds=3, spines: int = 8,
                       quick: bool = False) -> dict:
    """Detection while an ECN-active incast congests the fabric."""
    t0 = time.perf_counter()
    seeds = _seeds(seeds)
    sizes = _c8_sizes()
    if quick:
        seeds = seeds[:1]
        sizes = {0.015: sizes[0.015]}
    det = DetectorConfig(s=chosen_s, pmin=0)
    gray = 3

    checks_ok = {"verdicts": True, "ecn_active": True}
    rows = []
    for rate, per_spine in sizes.items():
        n = per_spine * spines
        n_bg = n * 3 // 5
        for seed in seeds:
            topo = build_fat_tree(n_leaves=2, n_spines=spines,
                                  hosts_per_leaf=3)
            set_link_state(topo, up_id(0, gray), drop_rate=rate)
            flows = [
                FlowSpec(qp=1, src_host=0, dst_host=3, n_packets=n),
                FlowSpec(qp=8, src_host=1, dst_host=5, n_packets=n_bg,
                         measure_eligible=False),
                FlowSpec(qp=9, src_host=2, dst_host=5, n_packets=n_bg,
                         measure_eligible=False),
            ]
            tr = run_scenario(topo, flows, SimConfig(), det, seed)
            flagged = {r["spine"] for r in tr.reports if r["qp"] == 1}
            stray = [r for r in tr.reports if r["qp"] != 1]
            v = metrics.verdict(flagged, {gray})
            ok = v["fnr_zero"] and v["fpr_zero"] and not stray
            cnps = tr.flows[8]["cnps"] + tr.flows[9]["cnps"]
            checks_ok["verdicts"] &= ok
            checks_ok["ecn_active"] &= cnps > 0
            rows.append({"rate": rate, "seed": seed, "exact": ok,
                         "bg_cnps": cnps})

    checks = [
        _check("verdicts_exact_under_incast", checks_ok["verdicts"]),
        _check("ecn_actually_fired", checks_ok["ecn_active"],
               "background incast produced CNPs in every run"),
    ]
    cfg = {"chosen_s": chosen_s, "spines": spines, "seeds": len(seeds),
           "gray_uplink": up_id(0, gray)}
    return _finish("robustness_congestion", t0, cfg, {"runs": rows}, checks)


def _robust_jitter(chosen_s: float, seeds=5, spines: int = 8,
                   rate: float = 0.015, quick: bool = False) -> dict:
    """Detection with jittered flow starts and unrelated cross traffic."""
    t0 = time.perf_counter()
    seeds = _seeds(seeds)
    if quick:
        seeds = seeds[:2]
    per_spine = BASELINE_MIN_PER_SPINE[rate]
    n = per_spine * spines
    det = DetectorConfig(s=chosen_s, pmin=0)
    gray = 5

    all_ok = True
    rows = []
    for seed in seeds:
        rng = random.Random(seed ^ 0x5EED)
        topo = build_fat_tree(n_leaves=2, n_spines=spines, hosts_per_leaf=2)
        set_link_state(topo, up_id(0, gray), drop_rate=rate)
        flows = [
            FlowSpec(qp=1, src_host=0, dst_host=2, n_packets=n,
                     start_ns=rng.randrange(2_000_000)),
            FlowSpec(qp=21, src_host=1, dst_host=3, n_packets=n // 3,
                     start_ns=rng.randrange(4_000_000),
                     measure_eligible=False),
            FlowSpec(qp=22, src_host=3, dst_host=1, n_packets=n // 3,
                     start_ns=rng.randrange(4_000_000),
                     measure_eligible=False),
        ]
        tr = run_scenario(topo, flows, SimConfig(), det, seed)
        flagged = {r["spine"] for r in tr.reports if r["qp"] == 1}
        v = metrics.verdict(flagged, {gray})
        ok = v["fnr_zero"] and v["fpr_zero"]
        all_ok &= ok
        rows.append({"seed": seed, "exact": ok})

    checks = [_check("verdicts_exact_with_jitter", all_ok,
                     f"{len(rows)} jittered runs at rate {rate}")]
    cfg = {"chosen_s": chosen_s, "rate": rate, "per_spine": per_spine,
           "seeds": len(seeds)}
    return _finish("robustness_jitter", t0, cfg, {"runs": rows}, checks)


def reordering_worstcase(chosen_s: float | None = None, seeds=3,
                         n_packets: int = 262144,
                         quick: bool = False) -> dict:
    """Adversarial reordering: two flows into the same destination leaf
    over 64 spines with half of each source's uplinks down, overlapping
    at exactly one spine. Checks the receive-side reorder depth and the
    counters missed after finalization."""
    t0 = time.perf_counter()
    if chosen_s is None:
        chosen_s = default_s()
    seeds = _seeds(seeds)
    if quick:
        seeds = seeds[:1]
        n_packets //= 8
    n_spines = 64
    det = DetectorConfig(s=chosen_s, pmin=0)

    def topo():
        t = build_fat_tree(n_leaves=3, n_spines=n_spines, hosts_per_leaf=2)
        for sp in range(32, 64):
            set_link_state(t, up_id(0, sp), enabled=False)
        for sp in list(range(31)) + [63]:
            set_link_state(t, up_id(1, sp), enabled=False)
        return t

    flows = [
        FlowSpec(qp=1, src_host=0, dst_host=4, n_packets=n_packets),
        FlowSpec(qp=2, src_host=2, dst_host=5, n_packets=n_packets,
                 measure_eligible=False),
    ]

    rows = []
    ok_reorder = ok_missed = ok_clean = True
    for seed in seeds:
        for prio_on in (True, False):
            cfg = SimConfig(prioritize_measured=prio_on)
            tr = run_scenario(topo(), flows, cfg, det, seed)
            worst = max(f["max_reorder"] for f in tr.flows.values())
            smp = [s for s in tr.samples if s["qp"] == 1]
            missed = smp[0]["missed"] if smp else None
            ok_reorder &= worst <= 1000
            ok_missed &= missed is not None and missed < 0.001 * n_packets
            if prio_on:
                ok_clean &= not tr.reports
            rows.append({"seed": seed, "prioritized": prio_on,
                         "max_reorder": worst, "missed": missed})

    checks = [
        _check("reorder_depth_bounded", ok_reorder,
               f"worst observed {max(r['max_reorder'] for r in rows)} "
               "(cap 1000)"),
        _check("missed_after_finalize_small", ok_missed,
               f"cap {0.001 * n_packets:.0f} of {n_packets}"),
        _check("no_false_reports_prioritized", ok_clean),
    ]
    cfg = {"chosen_s": chosen_s, "spines": n_spines, "n_packets": n_packets,
           "seeds": len(seeds), "shared_spine": 31}
    return _finish("reordering_worstcase", t0, cfg, {"runs": rows}, checks)


def robustness_suite(kind: str, chosen_s: float | None = None, seeds=None,
                     quick: bool = False, **params) -> dict:
    """Dispatch one robustness scenario family by name."""
    if chosen_s is None:
        chosen_s = default_s()
    kinds = {
        "jitter": lambda: _robust_jitter(
            chosen_s, 5 if seeds is None else seeds, quick=quick, **params),
        "preexisting": lambda: _robust_preexisting(
            chosen_s, 20 if seeds is None else seeds, quick=quick, **params),
        "multi_failure": lambda: _robust_multi_failure(
            chosen_s, 20 if seeds is None else seeds, quick=quick, **params),
        "congestion": lambda: _robust_congestion(
            chosen_s, 3 if seeds is None else seeds, quick=quick, **params),
        "reordering": lambda: reordering_worstcase(
            chosen_s, 3 if seeds is None else seeds, quick=quick, **params),
    }
    if kind not in kinds:
        raise ValueError(f"unknown robustness kind: {kind!r} "
                         f"(expected one of {sorted(kinds)})")
    return kinds[kind]()


# ---------------------------------------------------------------------------
# detector cost: zero added fabric load


def zero_added_load(chosen_s: float | None = None, seeds=3,
                    n_packets: int = 16384, quick: bool = False) -> dict:
    """Byte-identical fabric traffic with the detector on vs off, on a
    lossy ring with congestion control active."""
    t0 = time.perf_counter()
    if chosen_s is None:
        chosen_s = default_s()
    seeds = _seeds(seeds)
    if quick:
        seeds = seeds[:1]
        n_packets //= 4

    def run(seed: int, enabled: bool):
        topo = build_fat_tree(n_leaves=3, n_spines=4, hosts_per_leaf=1)
        set_link_state(topo, up_id(1, 2), drop_rate=0.05)
        flows = ring_flows(3, n_packets * DATA_PAYLOAD, qps_per_pair=1,
                           hosts=[0, 1, 2], rounds=2)
        cfg = SimConfig(detector_enabled=enabled)
        det = DetectorConfig(s=chosen_s, pmin=0)
        return run_scenario(topo, flows, cfg, det, seed)

    rows = []
    bytes_eq = packets_eq = True
    on_active = off_silent = True
    for seed in seeds:
        on = run(seed, True)
        off = run(seed, False)
        bytes_eq &= on.totals["fabric_bytes"] == off.totals["fabric_bytes"]
        packets_eq &= (on.totals["fabric_packets"]
                       == off.totals["fabric_packets"])
        on_active &= bool(on.samples) and bool(on.reports)
        off_silent &= not off.samples and not off.reports
        rows.append({"seed": seed,
                     "fabric_bytes": on.totals["fabric_bytes"],
                     "delta_bytes": on.totals["fabric_bytes"]
                     - off.totals["fabric_bytes"],
                     "reports_on": len(on.reports)})

    checks = [
        _check("fabric_bytes_identical", bytes_eq,
               "announcements ride the data plane in both runs"),
        _check("fabric_packets_identical", packets_eq),
        _check("detector_on_run_detected", on_active,
               "counters sampled and the gray uplink reported"),
        _check("detector_off_run_silent", off_silent),
    ]
    cfg = {"chosen_s": chosen_s, "seeds": len(seeds),
           "n_packets": n_packets, "gray_uplink": up_id(1, 2)}
    return _finish("zero_added_load", t0, cfg, {"runs": rows}, checks)


# ---------------------------------------------------------------------------
# tail completion time vs loss rate


def slowdown_direction(chosen_s: float | None = None,
                       rates=(0.0, 0.01, 0.02, 0.03), seeds=20,
                       ranks: int = 8, spines: int = 8,
                       pair_bytes: int = 1 << 30,
                       quick: bool = False) -> dict:
    """p99 collective completion time of a ring allreduce as one uplink's
    loss rate rises."""
    t0 = time.perf_counter()
    if chosen_s is None:
        chosen_s = default_s()
    seeds = _seeds(seeds)
    if quick:
        seeds = seeds[:3]
        pair_bytes //= 16
    det = DetectorConfig(s=chosen_s, pmin=0)

    p99 = {}
    detected = {}
    for rate in rates:
        ccts = []
        hits = 0
        for seed in seeds:
            topo = build_fat_tree(n_leaves=ranks, n_spines=spines,
                                  hosts_per_leaf=1)
            if rate:
                set_link_state(topo, up_id(0, 3), drop_rate=rate)
            flows = ring_flows(ranks, pair_bytes, hosts=list(range(ranks)))
            tr = run_scenario(topo, flows, SimConfig(), det, seed)
            ccts.extend(f["cct_ns"] for f in tr.flows.values())
            hits += any(r["spine"] == 3 for r in tr.reports)
        p99[rate] = metrics.percentile(ccts, 99)
        detected[rate] = hits

    ordered = [p99[r] for r in rates]
    checks = [
        _check("p99_strictly_increasing",
               all(a < b for a, b in zip(ordered, ordered[1:])),
               " -> ".join(f"{v / 1e6:.2f}ms" for v in ordered)),
    ]
    cfg = {"ranks": ranks, "spines": spines, "pair_bytes": pair_bytes,
           "rates": list(rates), "seeds": len(seeds)}
    results = {"p99_ms": {str(r): p99[r] / 1e6 for r in rates},
               "seeds_detected": {str(r): detected[r] for r in rates}}
    return _finish("slowdown_direction", t0, cfg, results, checks)


# ---------------------------------------------------------------------------
# prioritization impact on coexisting flows


def prioritization_impact(leaves: int = 17, flows: int = 16,
                          disabled_uplinks: int = 2, seeds=5,
                          spines: int = 32, n_packets: int = 16384,
                          quick: bool = False) -> dict:
    """Cost of prioritizing the one measured flow: completion times of
    its committed siblings with prioritization on vs off, congested and
    uncontended."""
    t0 = time.perf_counter()
    seeds = _seeds(seeds)
    if quick:
        seeds = seeds[:2]
        n_packets //= 4
    hosts_per_leaf = flows

    def flow_list():
        out = []
        for j in range(flows):
            out.append(FlowSpec(qp=1 + j, src_host=j,
                                dst_host=(1 + j) * hosts_per_leaf,
                                n_packets=n_packets,
                                measure_eligible=(j == 0)))
        return out

    def build(congested: bool):
        host_rate = 400 * 10**9 if congested else None
        topo = build_fat_tree(n_leaves=leaves, n_spines=spines,
                              hosts_per_leaf=hosts_per_leaf,
                              host_rate_bps=host_rate)
        if congested:
            for i in range(disabled_uplinks):
                set_link_state(topo, up_id(0, spines - 1 - i), enabled=False)
        return topo

    def deltas(congested: bool, seed: int) -> list[float]:
        ccts = {}
        for prio_on in (True, False):
            cfg = SimConfig(prioritize_measured=prio_on)
            tr = run_scenario(build(congested), flow_list(), cfg, None, seed)
            ccts[prio_on] = {qp: tr.flows[qp]["cct_ns"]
                             for qp in range(1, flows + 1)}
        return [ccts[True][qp] / ccts[False][qp] - 1.0
                for qp in range(1, flows + 1)]

    rows = []
    worst_sibling = -math.inf
    worst_measured = -math.inf
    worst_uncontended = 0.0
    for seed in seeds:
        d = deltas(True, seed)
        worst_measured = max(worst_measured, d[0])
        worst_sibling = max(worst_sibling, max(d[1:]))
        rows.append({"seed": seed, "scenario": "congested",
                     "measured_delta": round(d[0], 5),
                     "sibling_max_delta": round(max(d[1:]), 5),
                     "sibling_mean_delta": round(float(np.mean(d[1:])), 5)})
        du = deltas(False, seed)
        worst_uncontended = max(worst_uncontended, max(abs(x) for x in du))
        rows.append({"seed": seed, "scenario": "uncontended",
                     "max_abs_delta": round(max(abs(x) for x in du), 5)})

    checks = [
        _check("siblings_within_1pct", worst_sibling <= 0.01,
               f"worst sibling slowdown {worst_sibling * 100:.3f}%"),
        _check("measured_never_slower", worst_measured <= 0.001,
               f"measured delta {worst_measured * 100:.3f}%"),
        _check("uncontended_unaffected", worst_uncontended <= 0.002,
               f"worst |delta| {worst_uncontended * 100:.3f}%"),
    ]
    cfg = {"leaves": leaves, "flows": flows, "spines": spines,
           "disabled_uplinks": disabled_uplinks, "n_packets": n_packets,
           "seeds": len(seeds)}
    return _finish("prioritization_impact", t0, cfg, {"runs": rows}, checks)


# ---------------------------------------------------------------------------
# measurement coverage per workload shape


def coverage_experiment(kind: str = "permutation", leaves: int = 32,
                        rounds: int | None = None, seed: int = 0,
                        n_rings: int | None = None) -> dict:
    """Round-by-round coverage of the round-robin flow selector under one
    workload shape. Selection is driven directly: each round announces
    the round's flows, lets every source leaf mark at most one, and
    completes the marked flows at the round boundary."""
    rng = random.Random(seed)
    defaults = {"alltoall": leaves + 2, "permutation": 3 * leaves,
                "ring": 4, "rings": 2 * leaves}
    if kind not in defaults:
        raise ValueError(f"unknown coverage workload: {kind!r}")
    if rounds is None:
        rounds = defaults[kind]

    fixed_rings = None
    if kind == "rings":
        # a repeating job: the same few ring orders cycle forever, so a
        # leaf only ever sees the successors those orders give it
        fixed_rings = []
        for _ in range(n_rings if n_rings is not None else leaves):
            order = list(range(leaves))
            rng.shuffle(order)
            fixed_rings.append(order)

    def round_flows() -> list[tuple[int, int]]:
        if kind == "alltoall":
            return [(a, b) for a in range(leaves) for b in range(leaves)
                    if a != b]
        if kind == "permutation":
            perm = list(range(leaves))
            rng.shuffle(perm)
            return [(a, perm[a]) for a in range(leaves) if a != perm[a]]
        if kind == "ring":
            return [(a, (a + 1) % leaves) for a in range(leaves)]
        flows = []
        for order in fixed_rings:
            pos = {l: i for i, l in enumerate(order)}
            flows.extend((l, order[(pos[l] + 1) % leaves])
                         for l in range(leaves))
        return flows

    sels = [MeasureSelector(l, leaves) for l in range(leaves)]
    announced: list[set] = [set() for _ in range(leaves)]
    covered: list[set] = [set() for _ in range(leaves)]
    curve = []
    lag_free = True
    qp = 1
    for r in range(rounds):
        now = r * 1000
        flows = round_flows()
        for a, b in flows:
            sels[a].on_announcement_at_source(b, now)
            announced[a].add(b)
        picked: dict[int, tuple[int, int]] = {}
        for a, b in flows:
            if a not in picked and sels[a].select_next_flow(qp, b, now):
                picked[a] = (qp, b)
            qp += 1
        for a, (q, b) in picked.items():
            sels[a].on_completion(q, now + 999)
            covered[a].add(b)
        lag_free &= all(covered[l] == announced[l] for l in range(leaves))
        curve.append({
            "round": r,
            "mean_of_announced": float(np.mean(
                [len(covered[l]) / max(len(announced[l]), 1)
                 for l in range(leaves)])),
            "mean_of_all": float(np.mean(
                [len(covered[l]) / (leaves - 1) for l in range(leaves)])),
        })

    return {
        "kind": kind, "leaves": leaves, "rounds": rounds,
        "curve": curve,
        "lag_free": lag_free,
        "announced_sizes": [len(a) for a in announced],
        "covered_sizes": [len(c) for c in covered],
        "covered_equals_announced": all(covered[l] == announced[l]
                                        for l in range(leaves)),
        "full_coverage": all(len(c) == leaves - 1 for c in covered),
    }


def coverage_suite(leaves: int = 32, seed: int = 0,
                   quick: bool = False) -> dict:
    """Coverage curves for the standard workload shapes."""
    t0 = time.perf_counter()
    if quick:
        leaves = min(leaves, 8)
    alltoall = coverage_experiment("alltoall", leaves, seed=seed)
    perm = coverage_experiment("permutation", leaves, seed=seed)
    ring = coverage_experiment("ring", leaves, seed=seed)
    rings = coverage_experiment("rings", leaves, seed=seed)

    full_round = next((row["round"] for row in alltoall["curve"]
                       if row["mean_of_all"] == 1.0), None)
    checks = [
        _check("alltoall_full_in_one_pass",
               alltoall["full_coverage"] and full_round == leaves - 2,
               f"all {leaves - 1} destinations after {leaves - 1} rounds"),
        _check("permutation_selector_keeps_up",
               perm["covered_equals_announced"] and perm["lag_free"],
               "every announced destination measured the round it appears"),
        _check("ring_single_destination",
               all(n == 1 for n in ring["announced_sizes"])
               and ring["covered_equals_announced"],
               "one neighbor per leaf, measured, nothing else reachable"),
        _check("rings_partial_coverage",
               rings["covered_equals_announced"]
               and not rings["full_coverage"],
               "32 independent rings leave some leaf pairs unmeasured"),
    ]
    cfg = {"leaves": leaves, "seed": seed}
    results = {k: {"announced": v["announced_sizes"],
                   "covered": v["covered_sizes"],
                   "final_mean_of_all": v["curve"][-1]["mean_of_all"]}
               for k, v in (("alltoall", alltoall), ("permutation", perm),
                            ("ring", ring), ("rings", rings))}
    return _finish("coverage", t0, cfg, results, checks)


# ---------------------------------------------------------------------------

EXPERIMENTS = {
    "spray-predictability": spray_predictability,
    "priority-isolation": priority_isolation,
    "calibration": calibration_sweep,
    "pmin-table": pmin_table,
    "size-invariance": size_invariance,
    "required-sizes": required_sizes_table,
    "endtoend-replay": endtoend_replay,
    "localization": localization_matrix,
    "robustness": robustness_suite,
    "reordering": reordering_worstcase,
    "zero-added-load": zero_added_load,
    "slowdown-direction": slowdown_direction,
    "impact": prioritization_impact,
    "coverage": coverage_suite,
}
