"""Deterministic equal-mass particle discretization of the quantile dynamics.

N ordered particles carry mass 1/N each.  Neighbor gaps define local
densities R_i = 1/(N (X_{i+1} - X_i)); the quadratic diffusion becomes a
repulsive nearest-neighbor force (eps*N/2) * (R_{i-1}^2 - R_i^2) and the
nonlocal attraction a direct pairwise sum of kernel-derivative terms.  The
diffusion coefficient eps*N/2 is the consistent discretization of the
quantile-equation flux -(eps/2) d/dz (density^2) with node spacing 1/N; see
the repository's test suite for the cross-solver agreement this buys.

Time integration is the shared adaptive embedded RK 2(3) pair with step
rejection on ordering loss or near-collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import rk23
from .density import GridDensity, quantile_values, quantile_values_upper, _trimmed_edge_cdf

MIN_GAP = 1e-12


class ParticleCollision(RuntimeError):
    """Step-size underflow: two particles are about to merge."""


@dataclass(frozen=True)
class ParticleEnsemble:
    positions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        if self.positions.ndim != 1 or self.positions.size < 2:
            raise ValueError("need at least two particles")
        if not (np.diff(self.positions) > 0).all():
            raise ValueError("particle positions must be strictly increasing")

    @property
    def N(self) -> int:
        return self.positions.size

    @property
    def mass_per_particle(self) -> float:
        return 1.0 / self.N

    def gaps(self) -> np.ndarray:
        return np.diff(self.positions)

    def second_moment(self) -> float:
        """Empirical second moment (1/N) * sum X_i^2."""
        return float(np.mean(self.positions**2))

    def center_of_mass(self) -> float:
        return float(np.mean(self.positions))


def init_particles(rho0: GridDensity, N: int) -> ParticleEnsemble:
    """Place particles at the uniform quantiles z = i/(N-1), i = 0..N-1.

    The first and last particles land exactly on the support endpoints, and
    consecutive particles bracket mass 1/(N-1) of the initial density.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    z = np.arange(N) / (N - 1)
    X = quantile_values(rho0, z)
    return ParticleEnsemble(X, 0.0)


def particle_rhs(ensemble: ParticleEnsemble, kernel, epsilon: float) -> np.ndarray:
    """Velocities of all particles (diffusive repulsion + pairwise attraction)."""
    if (np.diff(ensemble.positions) <= 0).any():
        raise ValueError("positions must be strictly increasing")
    return _velocities(ensemble.positions, kernel, epsilon)


def _velocities(X: np.ndarray, kernel, epsilon: float) -> np.ndarray:
    # Trial stages of the adaptive integrator may probe transiently
    # disordered states; clamping the gap makes the repulsion enormous there,
    # which inflates the embedded error estimate and rejects the step.
    N = X.size
    gaps = np.maximum(np.diff(X), MIN_GAP)
    R2 = 1.0 / (N * gaps) ** 2
    V = np.empty_like(X)
    coef = 0.5 * epsilon * N
    V[0] = -coef * R2[0]
    V[-1] = coef * R2[-1]
    V[1:-1] = coef * (R2[:-1] - R2[1:])
    diff = X[:, None] - X[None, :]
    inter = kernel.derivative(diff, 1)
    np.fill_diagonal(inter, 0.0)
    V += inter.sum(axis=1) / N
    return V


def _valid(X: np.ndarray) -> bool:
    g = np.diff(X)
    return bool((g > MIN_GAP).all())


def rk23_step(
    ensemble: ParticleEnsemble,
    kernel,
    epsilon: float,
    dt: float,
    tol_abs: float = 1e-6,
    tol_rel: float = 1e-6,
) -> Tuple[ParticleEnsemble, float, bool]:
    """One adaptive trial step: (new_or_old_ensemble, dt_next, accepted)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    f = lambda y: _velocities(y, kernel, epsilon)
    y_new, err = rk23.try_step(f, ensemble.positions, dt)
    tol = tol_abs + tol_rel * float(np.abs(ensemble.positions).max())
    if err <= tol:
        if not _valid(y_new):
            return ensemble, 0.5 * dt, False
        return (
            ParticleEnsemble(y_new, ensemble.time + dt),
            rk23.next_dt(dt, err, tol),
            True,
        )
    return ensemble, rk23.next_dt(dt, err, tol), False


@dataclass
class ParticleRunResult:
    final: ParticleEnsemble
    snapshots: List[ParticleEnsemble] = field(default_factory=list)
    n_accepted: int = 0
    n_rejected: int = 0


def run_particles(
    rho0: GridDensity,
    N: int,
    kernel,
    epsilon: float,
    t_end: float,
    snapshot_times: Sequence[float] = (),
    tol_abs: float = 1e-6,
    tol_rel: float = 1e-6,
    dt0: float = 1e-3,
) -> ParticleRunResult:
    """Initialize from rho0 and integrate the particle system to t_end."""
    start = init_particles(rho0, N)
    return continue_particles(
        start, kernel, epsilon, t_end, snapshot_times, tol_abs, tol_rel, dt0
    )


def continue_particles(
    start: ParticleEnsemble,
    kernel,
    epsilon: float,
    t_end: float,
    snapshot_times: Sequence[float] = (),
    tol_abs: float = 1e-6,
    tol_rel: float = 1e-6,
    dt0: float = 1e-3,
) -> ParticleRunResult:
    f = lambda y: _velocities(y, kernel, epsilon)
    try:
        res = rk23.integrate(
            f,
            start.positions,
            t_end,
            tol_abs=tol_abs,
            tol_rel=tol_rel,
            dt0=dt0,
            snapshot_times=snapshot_times,
            accept_extra=_valid,
        )
    except rk23.StepSizeUnderflow as exc:
        raise ParticleCollision(str(exc)) from exc
    out = ParticleRunResult(
        final=ParticleEnsemble(res.y, start.time + res.t),
        n_accepted=res.n_accepted,
        n_rejected=res.n_rejected,
    )
    out.snapshots = [
        ParticleEnsemble(y, start.time + t) for t, y in res.snapshots
    ]
    return out


# ---------------------------------------------------------------------------
# reconstruction back to densities / quantiles


@dataclass(frozen=True)
class PiecewiseConstantDensity:
    """Density constant on each particle gap, unit total mass.

    The raw gap value 1/(N * gap) carries total mass (N-1)/N; the stored
    values are rescaled by N/(N-1) so each gap holds mass 1/(N-1) — the same
    mass it bracketed at initialization — and the total is exactly one.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def max_value(self) -> float:
        return float(self.values.max())

    def mass(self) -> float:
        return float((self.values * np.diff(self.breakpoints)).sum())


def reconstruct_density(ensemble: ParticleEnsemble) -> PiecewiseConstantDensity:
    gaps = ensemble.gaps()
    values = 1.0 / ((ensemble.N - 1) * gaps)
    return PiecewiseConstantDensity(ensemble.positions.copy(), values)


def resample_to_grid(
    ensemble: ParticleEnsemble, x_left: float, dx: float, n: int
) -> GridDensity:
    """Exact cell-overlap integration of the gap reconstruction onto a grid."""
    edges = x_left + dx * np.arange(n + 1)
    zq = np.arange(ensemble.N) / (ensemble.N - 1)
    F = np.interp(edges, ensemble.positions, zq, left=0.0, right=1.0)
    return GridDensity(x_left, dx, np.diff(F) / dx)


def ensemble_quantile(ensemble: ParticleEnsemble, z) -> np.ndarray:
    """Quantile function of the gap reconstruction: piecewise linear through
    the points (i/(N-1), X_i)."""
    zq = np.arange(ensemble.N) / (ensemble.N - 1)
    return np.interp(np.asarray(z, dtype=float), zq, ensemble.positions)


def wasserstein_to_grid(
    ensemble: ParticleEnsemble, rho: GridDensity, p=2, M: int = 2048
) -> float:
    """W_p between the particle reconstruction and a grid density."""
    if p == math.inf:
        Fe, _ = _trimmed_edge_cdf(rho)
        zq = np.arange(ensemble.N) / (ensemble.N - 1)
        breaks = np.unique(np.concatenate([Fe, zq, np.arange(M + 1) / M]))
        up = ensemble_quantile(ensemble, breaks)
        lo = np.abs(up - quantile_values(rho, breaks))
        hi = np.abs(up - quantile_values_upper(rho, breaks))
        return float(max(lo.max(), hi.max()))
    if p not in (1, 2):
        raise ValueError("p must be 1, 2, or math.inf")
    z = np.arange(M + 1) / M
    d = np.abs(ensemble_quantile(ensemble, z) - quantile_values(rho, z))
    return float(np.trapezoid(d**p, z) ** (1.0 / p))
