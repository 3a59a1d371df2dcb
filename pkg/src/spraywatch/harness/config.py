"""Experiment configuration: YAML file plus command-line overrides."""

from __future__ import annotations

from pathlib import Path

import yaml

KNOWN_KEYS = {"experiment", "params", "out", "quick", "label"}


def load_config(path: str | Path) -> dict:
    """Read one experiment config. Unknown top-level keys are rejected
    early so a typo does not silently run defaults."""
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)} "
                         f"(expected a subset of {sorted(KNOWN_KEYS)})")
    cfg = {"experiment": raw.get("experiment"),
           "params": dict(raw.get("params") or {}),
           "out": raw.get("out"),
           "quick": bool(raw.get("quick", False)),
           "label": raw.get("label")}
    if cfg["params"] and not isinstance(cfg["params"], dict):
        raise ValueError(f"{path}: params must be a mapping")
    return cfg


def parse_override(text: str) -> tuple[str, object]:
    """Parse one KEY=VALUE override; the value side is YAML, so lists
    and numbers come through typed (rates=[0.01,0.02], seeds=5)."""
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ValueError(f"override {text!r} is not KEY=VALUE")
    return key.strip(), yaml.safe_load(value)


def apply_overrides(cfg: dict, overrides) -> dict:
    """Fold KEY=VALUE strings into cfg['params']; 'experiment', 'out',
    'quick', and 'label' address the top level."""
    out = {**cfg, "params": dict(cfg.get("params") or {})}
    for text in overrides or ():
        key, value = parse_override(text)
        if key in KNOWN_KEYS - {"params"}:
            out[key] = value
        else:
            out["params"][key] = value
    return out
