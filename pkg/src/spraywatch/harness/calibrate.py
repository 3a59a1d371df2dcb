"""Choosing the threshold scale s and the minimum flow size.

The detector flags a spine when its count drops below
t = floor(lam - s*sqrt(lam)). Calibration replays healthy and
single-gray-link runs, converts every per-spine count to the deficit
score z = (lam - x) / sqrt(lam), and reads off the separating band:

  z_healthy_max   the worst score a healthy spine ever produced
  z_gray_min      the best score a starved spine ever produced

Any s in between gives TPR = 1 / FPR = 0 on the calibration corpus.
The shipped choice is z_healthy_max + GUARD. Healthy spread under
usage-balanced spraying is far tighter than sqrt(lam), so a guard of
most of a standard-score unit costs little sensitivity while tolerating
count noise the calibration corpus never saw (bursty coexistence,
wrapped counters, uneven spray weights). Picking the top of the band
instead would maximize robustness on paper but pushes the minimum
detectable flow an order of magnitude up, which is the wrong trade for
small collectives.

GUARD and SLACK were fixed together by sweeping both on the minimum-size
search: larger values inflate the sizes the search returns (hurting the
high-loss cells), smaller ones leave the found sizes sitting on the
knife edge where a fresh seed can miss (hurting every transfer of the
table to other fabric widths). 0.71 / 1.0 sits inside the window where
the whole size table stays stable across 20 disjoint seeds and fabric
widths of 8 through 64 spines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..spraycheck import compute_threshold

GUARD = 0.71

# The minimum-size search additionally requires the worst seed's deficit
# to clear the threshold by SLACK standard deviations of the loss noise
# sqrt(lam*p)*(1-1/k), so the returned size is not a lucky pass.
SLACK = 1.0


@dataclass
class CalibrationSample:
    """Per-spine counts of one measured flow plus ground truth."""
    counts: dict[int, int]
    n_packets: int
    k: int
    gray_spines: frozenset[int] = frozenset()


@dataclass
class CalibrationResult:
    z_healthy_max: float
    z_gray_min: float
    chosen_s: float
    n_healthy: int
    n_gray: int
    guard: float = GUARD
    # verification against the exact integer threshold at chosen_s
    tpr: float = 1.0
    fpr: float = 0.0
    grid: list[dict] = field(default_factory=list)
    # filled by the sweep drivers: minimum flow sizes per drop rate and
    # the per-policy spread of healthy per-spine counts
    p_min_table: dict = field(default_factory=dict)
    empirical_sigma: dict = field(default_factory=dict)

    @property
    def band_exists(self) -> bool:
        return self.z_healthy_max < self.z_gray_min

    @property
    def roc_points(self) -> list[tuple[float, float, float]]:
        return [(row["s"], row["tpr"], row["fpr"]) for row in self.grid]

    def to_dict(self) -> dict:
        return {
            "z_healthy_max": self.z_healthy_max,
            "z_gray_min": self.z_gray_min,
            "chosen_s": self.chosen_s,
            "guard": self.guard,
            "n_healthy": self.n_healthy,
            "n_gray": self.n_gray,
            "band_exists": self.band_exists,
            "tpr": self.tpr,
            "fpr": self.fpr,
            "grid": self.grid,
            "p_min_table": {str(k): v for k, v in self.p_min_table.items()},
            "empirical_sigma": {str(k): v for k, v in self.empirical_sigma.items()},
        }


def _rates_at(samples: list[CalibrationSample], s: float) -> tuple[float, float]:
    """Exact TPR/FPR over the corpus using the integer threshold."""
    tp = fn = fp = tn = 0
    for sm in samples:
        t = compute_threshold(sm.n_packets, sm.k, s)
        for sp, x in sm.counts.items():
            hit = x < t
            if sp in sm.gray_spines:
                tp += hit
                fn += not hit
            else:
                fp += hit
                tn += not hit
    tpr = tp / (tp + fn) if tp + fn else 1.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    return tpr, fpr


def calibrate_s(samples, guard: float = GUARD,
                grid: tuple[float, ...] = ()) -> CalibrationResult:
    """Pick the threshold scale from labelled calibration runs."""
    samples = list(samples)
    z_h = -math.inf
    z_g = math.inf
    n_h = n_g = 0
    for sm in samples:
        lam = sm.n_packets / sm.k
        rt = math.sqrt(lam)
        for sp, x in sm.counts.items():
            z = (lam - x) / rt
            if sp in sm.gray_spines:
                n_g += 1
                z_g = min(z_g, z)
            else:
                n_h += 1
                z_h = max(z_h, z)
    chosen = z_h + guard
    if n_g and chosen >= z_g:
        # guard overshoots the band: fall back to the band midpoint
        chosen = (z_h + z_g) / 2
    tpr, fpr = _rates_at(samples, chosen) if samples else (1.0, 0.0)
    res = CalibrationResult(
        z_healthy_max=z_h, z_gray_min=z_g, chosen_s=chosen,
        n_healthy=n_h, n_gray=n_g, guard=guard, tpr=tpr, fpr=fpr)
    for s in grid:
        g_tpr, g_fpr = _rates_at(samples, s)
        res.grid.append({"s": s, "tpr": g_tpr, "fpr": g_fpr})
    return res


def find_min_packets(passes, lo: int, hi: int) -> int | None:
    """Smallest n in [lo, hi] for which passes(n) holds.

    Geometric bracketing from lo, then integer bisection. Assumes the
    predicate is monotone in n, which holds for detection-margin checks
    away from knife-edge noise.
    """
    if passes(lo):
        return lo
    bad, good = lo, None
    n = lo
    while n < hi:
        n = min(n * 2, hi)
        if passes(n):
            good = n
            break
        bad = n
    if good is None:
        return None
    while good - bad > 1:
        mid = (bad + good) // 2
        if passes(mid):
            good = mid
        else:
            bad = mid
    return good


def find_pmin_per_spine(cell_passes, lo: int = 128,
                        hi: int = 1 << 20) -> int | None:
    """Minimum per-spine packet share for perfect detection.

    `cell_passes(per_spine)` must run the full seed battery at that size
    and report whether every seed detected the gray link with no false
    flags. The returned value is the per-spine lambda; multiply by k for
    the flow size.
    """
    return find_min_packets(cell_passes, lo, hi)


# On-wire bytes per sprayed packet assumed by the sizing arithmetic
# below (jumbo-frame deployment), and the bytes a single accelerator
# moves per Llama-3 70B training iteration in its gradient-sync
# collectives (4-way tensor/pipeline/data parallel split). The second
# number is kept as a fixed ratio rather than rederived from model math.
PACKET_WIRE_BYTES = 9362
LLAMA3_ITER_BYTES = 8_192_000_000


def required_collective_size(p_min: int, spines: int,
                             payload: int = PACKET_WIRE_BYTES,
                             ) -> tuple[int, int, float]:
    """Collective size needed to feed the detector p_min packets/spine.

    Returns (packets, bytes, training iterations): the flow must carry
    p_min packets for each of the spines it sprays over, and the
    iteration count says how many rounds of gradient sync a single
    accelerator needs before that much data has moved.
    """
    if p_min <= 0 or spines <= 0 or payload <= 0:
        raise ValueError("p_min, spines, and payload must be positive")
    packets = p_min * spines
    nbytes = packets * payload
    return packets, nbytes, nbytes / LLAMA3_ITER_BYTES
