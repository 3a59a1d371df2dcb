"""Shared statistical reducers for experiment outputs."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov test: (statistic, p-value)."""
    res = stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return float(res.statistic), float(res.pvalue)


def percentile(values, q: float) -> float:
    return float(np.percentile(np.asarray(values, dtype=float), q))


def sample_variance(values) -> float:
    """Unbiased (n-1) sample variance."""
    return float(np.var(np.asarray(values, dtype=float), ddof=1))


def zscores(counts: dict[int, int], n_packets: int, k: int) -> dict[int, float]:
    """Per-spine deficit scores (expected - observed) / sqrt(expected).

    Positive means the spine delivered fewer packets than its share;
    healthy spines sit at or below zero once retransmits wash back in.
    """
    lam = n_packets / k
    rt = math.sqrt(lam)
    return {sp: (lam - x) / rt for sp, x in counts.items()}


def verdict(flagged, gray) -> dict:
    """Classify one detection cell.

    fnr_zero: every gray spine was flagged. fpr_zero: nothing healthy was.
    """
    flagged = set(flagged)
    gray = set(gray)
    return {
        "missed": sorted(gray - flagged),
        "false": sorted(flagged - gray),
        "fnr_zero": gray <= flagged,
        "fpr_zero": flagged <= gray,
    }


def merge_verdicts(cells) -> dict:
    """Fold per-seed verdicts into one cell summary."""
    out = {"fnr_zero": True, "fpr_zero": True, "missed": 0, "false": 0, "n": 0}
    for v in cells:
        out["n"] += 1
        out["fnr_zero"] &= v["fnr_zero"]
        out["fpr_zero"] &= v["fpr_zero"]
        out["missed"] += len(v["missed"])
        out["false"] += len(v["false"])
    return out
