"""Run records, their CSV/JSON files, and multi-seed aggregation.

CSV layout: a header line with :data:`COLUMNS`, then one row per
evaluation. Integers are written in decimal; floats with ``repr`` (the
shortest string that round-trips to the same float64); a missing value
error is an empty field. Lines end with ``\\n``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

COLUMNS = ("env_step", "updates", "normalized_return", "mean_q", "q_diff_normalized",
           "value_error", "starvation", "seed")
AGG_COLUMNS = ("env_step", "updates", "n_runs", "mean", "ci_low", "ci_high")


@dataclass(frozen=True)
class RunRecord:
    env_step: int
    updates: int
    normalized_return: float
    mean_q: float
    q_diff_normalized: float
    value_error: Optional[float]
    starvation: int
    seed: int

    def check(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"non-finite {f.name} in record at step {self.env_step}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(int(v))


def to_csv(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    buf.write(",".join(COLUMNS) + "\n")
    last = -1
    for r in records:
        r.check()
        if r.env_step < last:
            raise ValueError("records must be ordered by env_step")
        last = r.env_step
        buf.write(",".join(_fmt(v) for v in astuple(r)) + "\n")
    return buf.getvalue()


def from_csv(text: str) -> list[RunRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != COLUMNS:
        raise ValueError(f"unexpected CSV header {header!r}")
    out = []
    for row in reader:
        if not row:
            continue
        step, upd, ret, mq, qd, ve, starv, seed = row
        out.append(RunRecord(int(step), int(upd), float(ret), float(mq), float(qd),
                             float(ve) if ve else None, int(starv), int(seed)))
    return out


def emit(records: Iterable[RunRecord], path, config: Optional[dict] = None) -> Path:
    """Write ``path`` (CSV) and, with ``config``, the sidecar ``path`` + ``.json``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(to_csv(records))
    if config is not None:
        with open(str(path) + ".json", "w") as f:
            json.dump(config, f, indent=2, sort_keys=True)
            f.write("\n")
    return path


def read_records(path) -> list[RunRecord]:
    with open(path, newline="") as f:
        return from_csv(f.read())


def bootstrap_ci(values: np.ndarray, rng: np.random.Generator, n_resamples: int = 10_000,
                 level: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``values``."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 1:
        return float(values[0]), float(values[0])
    picks = rng.integers(0, len(values), size=(n_resamples, len(values)))
    means = values[picks].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def aggregate(runs: list[list[RunRecord]], metric: str = "normalized_return",
              n_resamples: int = 10_000, seed: int = 0) -> list[tuple]:
    """Per-row mean and bootstrap 95% interval across runs aligned by row position.

    Runs are truncated to the shortest one; each output row carries the
    env step and update count of the first run.
    """
    if not runs:
        return []
    rng = np.random.default_rng(seed)
    n_rows = min(len(r) for r in runs)
    out = []
    for i in range(n_rows):
        vals = np.array([getattr(r[i], metric) for r in runs], dtype=np.float64)
        lo, hi = bootstrap_ci(vals, rng, n_resamples)
        out.append((runs[0][i].env_step, runs[0][i].updates, len(runs), float(vals.mean()), lo, hi))
    return out


def aggregate_dir(in_dir, out_path, metric: str = "normalized_return",
                  n_resamples: int = 10_000) -> Path:
    """Aggregate every ``*.csv`` run file in ``in_dir`` (sorted by name) into ``out_path``."""
    names = sorted(n for n in os.listdir(in_dir) if n.endswith(".csv"))
    runs = []
    for n in names:
        try:
            runs.append(read_records(os.path.join(in_dir, n)))
        except ValueError:
            continue  # not a run file (e.g. an earlier aggregate)
    rows = aggregate(runs, metric, n_resamples)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as f:
        f.write(",".join(AGG_COLUMNS) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")
    return out_path
