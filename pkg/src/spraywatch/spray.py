"""Per-packet spray (path selection) policies.

A spray decision picks one spine out of the usable candidates for a single
packet. The congestion signal is supplied by the caller as a vector of
"occupancies" parallel to the candidate list; what that vector means is the
caller's business (instantaneous queue bytes for ordinary traffic,
cumulative per-destination usage bytes for the measurement class).

RNG discipline matters for reproducibility: each policy consumes a fixed
number of draws per decision so that two runs with the same per-flow stream
make identical choices regardless of unrelated traffic. Draws use
Random.random() (one C call) rather than randrange, which costs two Python
frames per draw; int(r * n) is exact for any practical fan-out.

  uniform    1 draw
  po2c       2 draws, tie keeps the first draw
  quantized  1 draw: bucket occupancies by QUANTUM bytes, draw uniformly
             among the candidates in the lowest bucket
  min        0 draws, full scan, tie keeps the lowest index
"""

from __future__ import annotations

import random
from typing import Sequence

POLICIES = ("uniform", "po2c", "quantized", "min")

QUANTUM = 4096   # bucket width for the quantized policy, bytes


def spray_select(
    policy: str,
    candidates: Sequence[int],
    occupancies: Sequence[int],
    rng: random.Random,
) -> int:
    """Pick one element of `candidates` and return it.

    `occupancies[i]` is the congestion signal for `candidates[i]`. Policies
    that ignore the signal still accept it so callers do not special-case.
    """
    n = len(candidates)
    if n == 0:
        raise ValueError("no usable candidates")
    if n == 1:
        return candidates[0]
    if policy == "po2c":
        i = int(rng.random() * n)
        j = int(rng.random() * n)
        if occupancies[j] < occupancies[i]:
            i = j
        return candidates[i]
    if policy == "uniform":
        return candidates[int(rng.random() * n)]
    if policy == "quantized":
        lo = min(occupancies) // QUANTUM
        picks = [candidates[i] for i in range(n) if occupancies[i] // QUANTUM == lo]
        return picks[int(rng.random() * len(picks))]
    if policy == "min":
        best = 0
        bo = occupancies[0]
        for i in range(1, n):
            if occupancies[i] < bo:
                best = i
                bo = occupancies[i]
        return candidates[best]
    raise ValueError(f"unknown spray policy: {policy}")


def flow_spray_rng(seed: int, qp: int) -> random.Random:
    """Dedicated spray stream for one flow.

    Derivation uses only integer arithmetic so it is stable across
    interpreter runs (no str hashing involved).
    """
    return random.Random(((seed & 0xFFFFFFFF) * 0x9E3779B1 + qp * 0x85EBCA77 + 1) & 0x7FFFFFFFFFFFFFFF)


def link_drop_rng(seed: int, link_key: int) -> random.Random:
    """Dedicated drop stream for one link (key = stable integer id)."""
    return random.Random(((seed & 0xFFFFFFFF) * 0xC2B2AE35 + link_key * 0x27D4EB2F + 2) & 0x7FFFFFFFFFFFFFFF)
