"""Scalar two-particle reduction: bistability of a half-gap coordinate X > 0.

Two symmetric particles at -X and X obey

    dX/dt = eps / (8 X^2) + (1/2) G'(2X)

Diffusion pushes the pair apart (the 1/X^2 term), attraction pulls it
together.  For the Gaussian kernel the balance reads
eps*sqrt(pi) = 16 X^3 exp(-4 X^2), which has two roots (stable a, unstable b)
for small eps, one at the fold, and none beyond it: initial half-gaps below b
relax to a, those above b spread forever.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import rk23

SCAN_POINTS = 10_000
SCAN_LO, SCAN_HI = 1e-6, 50.0

CONVERGES_TO_A = "converges_to_a"
DIVERGES = "diverges"
ON_SEPARATRIX = "on_separatrix"


@dataclass(frozen=True)
class ToyProblem:
    epsilon: float
    kernel: object

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


def toy_rhs(problem: ToyProblem, X: float) -> float:
    if X <= 0.0:
        raise ValueError("X must be positive")
    return float(
        problem.epsilon / (8.0 * X * X)
        + 0.5 * problem.kernel.derivative(np.asarray(2.0 * X), 1)
    )


def _rhs_derivative(problem: ToyProblem, X: float, h: float = 1e-7) -> float:
    h = h * max(1.0, abs(X))
    return (toy_rhs(problem, X + h) - toy_rhs(problem, X - h)) / (2.0 * h)


def find_equilibria(problem: ToyProblem) -> List[Tuple[float, str]]:
    """Roots of the balance equation with stability labels.

    Scans log-spaced points on [1e-6, 50] for sign changes of the velocity
    and bisects each bracket to 1e-10.  Returns [(X, "stable"|"unstable")]
    sorted by X; empty beyond the fold.
    """
    xs = np.geomspace(SCAN_LO, SCAN_HI, SCAN_POINTS)
    vals = np.array([toy_rhs(problem, x) for x in xs])
    roots = []
    sign_change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    for i in sign_change:
        lo, hi = xs[i], xs[i + 1]
        flo = vals[i]
        while hi - lo > 1e-10:
            mid = 0.5 * (lo + hi)
            fm = toy_rhs(problem, mid)
            if fm == 0.0:
                lo = hi = mid
                break
            if (flo > 0) == (fm > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        root = 0.5 * (lo + hi)
        label = "stable" if _rhs_derivative(problem, root) < 0.0 else "unstable"
        roots.append((root, label))
    return roots


def gaussian_fold_epsilon() -> float:
    """Largest eps with equilibria for the Gaussian kernel.

    The balance function 16 X^3 exp(-4X^2) peaks at X = sqrt(3/8); the fold
    value is that peak divided by sqrt(pi).
    """
    Xf = np.sqrt(3.0 / 8.0)
    return float(16.0 * Xf**3 * np.exp(-4.0 * Xf**2) / np.sqrt(np.pi))


def fold_epsilon(kernel) -> float:
    """Fold value for an arbitrary kernel: max over X of -4 X^2 G'(2X)."""
    xs = np.geomspace(SCAN_LO, SCAN_HI, SCAN_POINTS)
    vals = -4.0 * xs**2 * np.asarray(kernel.derivative(2.0 * xs, 1))
    i = int(np.argmax(vals))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]
    fine = np.linspace(lo, hi, 20001)
    fvals = -4.0 * fine**2 * np.asarray(kernel.derivative(2.0 * fine, 1))
    return float(fvals.max())


@dataclass
class ToyTrajectory:
    t: np.ndarray
    X: np.ndarray


def integrate_toy(
    problem: ToyProblem,
    X0: float,
    t_end: float,
    snapshot_times=None,
    tol_abs: float = 1e-6,
    tol_rel: float = 1e-6,
) -> ToyTrajectory:
    """Adaptive trajectory from X0; records every accepted step (or the
    requested snapshot times when given)."""
    if X0 <= 0.0:
        raise ValueError("X0 must be positive")
    f = lambda y: np.array([_rhs_value(problem, y[0])])
    ts, Xs = [0.0], [X0]
    if snapshot_times is None:
        res = rk23.integrate(
            f,
            np.array([X0]),
            t_end,
            tol_abs=tol_abs,
            tol_rel=tol_rel,
            accept_extra=lambda y: y[0] > 0.0,
            step_callback=lambda t, y: (ts.append(t), Xs.append(y[0])),
        )
    else:
        res = rk23.integrate(
            f,
            np.array([X0]),
            t_end,
            tol_abs=tol_abs,
            tol_rel=tol_rel,
            snapshot_times=snapshot_times,
            accept_extra=lambda y: y[0] > 0.0,
        )
        ts += [t for t, _ in res.snapshots]
        Xs += [y[0] for _, y in res.snapshots]
    if res.t < t_end - 1e-12:
        raise RuntimeError("integration stalled before t_end")
    return ToyTrajectory(np.array(ts), np.array(Xs))


def _rhs_value(problem: ToyProblem, X: float) -> float:
    # inside the integrator a trial stage may momentarily probe X <= 0;
    # return a strong restoring velocity instead of raising so the step is
    # rejected by the error estimate / positivity veto rather than crashing
    if X <= 0.0:
        return 1e12
    return toy_rhs(problem, X)


def classify_basin(problem: ToyProblem, X0: float, tol: float = 1e-8) -> str:
    """Predict the fate of a trajectory started at X0 > 0."""
    if X0 <= 0.0:
        raise ValueError("X0 must be positive")
    eq = find_equilibria(problem)
    if len(eq) < 2:
        return DIVERGES
    b = eq[-1][0]
    if abs(X0 - b) <= tol:
        return ON_SEPARATRIX
    return CONVERGES_TO_A if X0 < b else DIVERGES
