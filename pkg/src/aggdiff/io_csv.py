"""CSV emission and parsing for run artifacts (17-significant-digit reals)."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .density import GridDensity, QuantileFunction
from .diagnostics import DiagnosticsRow, SteadyState


def _fmt(v) -> str:
    if v is None:
        return ""
    return f"{float(v):.17g}"


def write_density_csv(path, rho: GridDensity) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "rho"])
        for x, r in zip(rho.centers, rho.cell_avg):
            w.writerow([_fmt(x), _fmt(r)])


def read_density_csv(path) -> GridDensity:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x, r = data[:, 0], data[:, 1]
    if x.size < 2:
        raise ValueError(f"{path}: need at least two rows")
    dx = float(x[1] - x[0])
    if not np.allclose(np.diff(x), dx, rtol=0, atol=1e-9 * max(1.0, abs(dx))):
        raise ValueError(f"{path}: grid is not uniform")
    return GridDensity(float(x[0]) - 0.5 * dx, dx, r)


def write_quantile_csv(path, qf: QuantileFunction) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "u"])
        for z, u in zip(qf.nodes, qf.values):
            w.writerow([_fmt(z), _fmt(u)])


def write_diagnostics_csv(path, rows: Iterable[DiagnosticsRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DiagnosticsRow.FIELDS)
        for row in rows:
            w.writerow([_fmt(getattr(row, name)) for name in DiagnosticsRow.FIELDS])


def read_diagnostics_csv(path) -> List[DiagnosticsRow]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            vals = {
                name: (float(rec[name]) if rec.get(name) else None)
                for name in DiagnosticsRow.FIELDS
            }
            out.append(DiagnosticsRow(**vals))
    return out


def write_trajectory_csv(path, times: Sequence[float], positions: Sequence[np.ndarray]) -> None:
    """Rows t,X_1,...,X_N; one row per snapshot time."""
    n = len(positions[0]) if positions else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"X_{i + 1}" for i in range(n)])
        for t, X in zip(times, positions):
            w.writerow([_fmt(t)] + [_fmt(v) for v in X])


def write_steady_meta_csv(path, epsilon: float, steady: SteadyState) -> None:
    interval = steady.support_interval()
    left, right = interval if interval is not None else (0.0, 0.0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "C", "residual", "support_left", "support_right"])
        w.writerow(
            [
                _fmt(epsilon),
                _fmt(steady.lagrange_constant),
                _fmt(steady.residual),
                _fmt(left),
                _fmt(right),
            ]
        )


def write_summary_csv(path, summary: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        keys = list(summary)
        w.writerow(keys)
        w.writerow([summary[k] if isinstance(summary[k], str) else _fmt(summary[k]) for k in keys])


def write_series_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def snapshot_filename(t: float) -> str:
    return f"snap_t{t:g}.csv"
