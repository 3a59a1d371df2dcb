"""Run experiments by name and persist their outputs.

Each run produces <out>/<name>.json with the full result. Any results
entry that is a list of flat records additionally lands as a CSV next
to it; records with nested fields go to JSONL instead. Rows are written
in the order the experiment produced them, which is seed order, so
reruns diff cleanly.
"""

from __future__ import annotations

import csv
import inspect
import json
from pathlib import Path

from .experiments import EXPERIMENTS

_SCALAR = (str, int, float, bool, type(None))


def resolve(name: str):
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise ValueError(f"unknown experiment {name!r} "
                         f"(expected one of {sorted(EXPERIMENTS)})") from None


def _accepted_params(fn, params: dict, quick: bool) -> dict:
    sig = inspect.signature(fn)
    names = set(sig.parameters)
    unknown = set(params) - names
    if unknown:
        raise ValueError(f"{fn.__name__} does not take {sorted(unknown)}; "
                         f"it accepts {sorted(names)}")
    out = dict(params)
    if quick and "quick" in names:
        out["quick"] = True
    return out


def _fieldnames(rows: list[dict]) -> list[str]:
    names = list(rows[0])
    for row in rows[1:]:
        names.extend(k for k in row if k not in names)
    return names


def _write_rows(base: Path, key: str, rows: list[dict]) -> Path:
    flat = all(isinstance(v, _SCALAR) for row in rows for v in row.values())
    if flat:
        path = base.with_name(f"{base.name}.{key}.csv")
        with path.open("w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=_fieldnames(rows))
            w.writeheader()
            w.writerows(rows)
    else:
        path = base.with_name(f"{base.name}.{key}.jsonl")
        with path.open("w") as f:
            for row in rows:
                f.write(json.dumps(row) + "\n")
    return path


def write_result(result: dict, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = out / result["name"]
    summary = base.with_suffix(".json")
    summary.write_text(json.dumps(result, indent=2, default=str) + "\n")
    written = [summary]
    for key, val in result.get("results", {}).items():
        if (isinstance(val, list) and val
                and all(isinstance(r, dict) for r in val)):
            written.append(_write_rows(base, key, val))
    return written


def run_experiment(name: str, params: dict | None = None,
                   out_dir: str | Path | None = None,
                   quick: bool = False) -> dict:
    """Resolve, run, optionally persist. Returns the result dict; the
    caller decides what a failed check means (the CLI exits nonzero)."""
    fn = resolve(name)
    result = fn(**_accepted_params(fn, params or {}, quick))
    if out_dir is not None:
        result["written"] = [str(p) for p in write_result(result, out_dir)]
    return result


def print_checks(result: dict) -> None:
    for c in result["checks"]:
        mark = "PASS" if c["pass"] else "FAIL"
        detail = f"  {c['detail']}" if c.get("detail") else ""
        print(f"[{mark}] {result['name']}: {c['name']}{detail}")
    print(f"{result['name']}: {'ok' if result['ok'] else 'FAILED'} "
          f"in {result['runtime_s']}s")
