"""Embedded Runge-Kutta 2(3) stepping with standard proportional step control.

Bogacki-Shampine pair: three stages give the third-order update, a fourth
evaluation at the new point gives the embedded second-order error estimate.
Used for both the particle system and the scalar two-particle reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
DT_MIN = 1e-14


class StepSizeUnderflow(RuntimeError):
    """Adaptive step fell below DT_MIN; the right-hand side is effectively singular."""


def try_step(f: Callable, y: np.ndarray, dt: float):
    """One trial step of size dt.

    Returns (y_new, err_inf): the third-order update and the max-norm of the
    embedded error estimate.
    """
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.75 * dt * k2)
    y_new = y + dt * (2.0 * k1 + 3.0 * k2 + 4.0 * k3) / 9.0
    k4 = f(y_new)
    err = dt * (-5.0 * k1 / 72.0 + k2 / 12.0 + k3 / 9.0 - k4 / 8.0)
    return y_new, float(np.abs(err).max())


def next_dt(dt: float, err: float, tol: float) -> float:
    """Proportional controller: safety 0.9, exponent 1/3, factor clamp [0.2, 5]."""
    if err == 0.0:
        return dt * MAX_FACTOR
    return dt * min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * (tol / err) ** (1.0 / 3.0)))


@dataclass
class IntegrationResult:
    t: float
    y: np.ndarray
    snapshots: list = field(default_factory=list)  # (t, y-copy) pairs
    n_accepted: int = 0
    n_rejected: int = 0
    n_rhs: int = 0


def integrate(
    f: Callable,
    y0: np.ndarray,
    t_end: float,
    tol_abs: float = 1e-6,
    tol_rel: float = 1e-6,
    dt0: float = 1e-3,
    snapshot_times=(),
    accept_extra: Optional[Callable[[np.ndarray], bool]] = None,
    step_callback: Optional[Callable[[float, np.ndarray], None]] = None,
) -> IntegrationResult:
    """Adaptively integrate y' = f(y) to t_end.

    Snapshot times are hit exactly by truncating the step.  ``accept_extra``
    may veto a step on state-validity grounds (e.g. particle ordering); a
    vetoed step is retried with half the step size.  Raises
    :class:`StepSizeUnderflow` when the controller collapses below DT_MIN.
    """
    y = np.array(y0, dtype=float)
    t = 0.0
    res = IntegrationResult(t=0.0, y=y)
    snaps = sorted(float(s) for s in snapshot_times if s <= t_end + 1e-12)
    si = 0
    while si < len(snaps) and snaps[si] <= 1e-14:
        res.snapshots.append((snaps[si], y.copy()))
        si += 1
    dt = min(dt0, t_end) if t_end > 0 else dt0

    while t < t_end - 1e-14:
        dt = min(dt, t_end - t)
        if si < len(snaps) and t + dt > snaps[si] - 1e-14:
            dt = max(snaps[si] - t, DT_MIN)
        if dt < DT_MIN:
            raise StepSizeUnderflow(f"dt={dt:.3e} at t={t:.6f}")

        y_new, err = try_step(f, y, dt)
        res.n_rhs += 4
        tol = tol_abs + tol_rel * float(np.abs(y).max())
        if err <= tol:
            if accept_extra is not None and not accept_extra(y_new):
                res.n_rejected += 1
                dt *= 0.5
                continue
            t += dt
            y = y_new
            res.n_accepted += 1
            if step_callback is not None:
                step_callback(t, y)
            if si < len(snaps) and abs(t - snaps[si]) < 1e-12:
                res.snapshots.append((snaps[si], y.copy()))
                si += 1
            dt = next_dt(dt, err, tol)
        else:
            res.n_rejected += 1
            dt = next_dt(dt, err, tol)

    res.t = t
    res.y = y
    return res
