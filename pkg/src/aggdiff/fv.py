"""Semi-discrete finite-volume solver with minmod upwinding and SSP-RK3.

The scheme evolves cell averages under the flux ``rho * u`` with the discrete
velocity at the edge between cells i and i+1

    u = sum_j rho_j * (G(x_{i+1} - x_j) - G(x_i - x_j)) - (eps/dx)(rho_{i+1} - rho_i)

(the kernel sum carries no dx weight: the difference of kernel sums already
telescopes a dx-weighted discrete derivative).  Reconstruction is
minmod-limited and upwinded: a right-moving flux takes the east-face value of
the west cell, a left-moving flux the west-face value of the east cell.
Zero-flux boundaries on a domain large enough that boundary cells stay empty.

Time stepping is the classical three-stage strong-stability-preserving RK3
with the step size recomputed every step from both the advective restriction
cfl*dx/max|u| and the diffusive restriction cfl*dx^2/(2*eps*max(1, max rho));
the max(1, .) factor accounts for the solution-dependent diffusivity eps*rho
of the quadratic diffusion term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .density import (
    ConvolutionPlan,
    GridDensity,
    l2_norm_sq,
    linf_norm,
    mass,
    moment,
    wasserstein_p,
)
from . import diagnostics as _diag


class FvAbort(RuntimeError):
    """Unrecoverable solver failure (NaN, positivity loss, boundary leak)."""


@dataclass(frozen=True)
class FvConfig:
    epsilon: float
    t_end: float
    cfl: float = 0.4
    dt_max: float = math.inf
    snapshot_times: Sequence[float] = ()

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be nonnegative")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError("cfl must lie in (0, 1]")
        if self.dt_max <= 0.0 or self.t_end <= 0.0:
            raise ValueError("dt_max and t_end must be positive")


@dataclass(frozen=True)
class FvState:
    time: float
    density: GridDensity


@dataclass
class FvRunResult:
    final: FvState
    snapshots: List[FvState] = field(default_factory=list)
    diagnostics: List["_diag.DiagnosticsRow"] = field(default_factory=list)
    n_steps: int = 0


def minmod(a1, a2, a3):
    """Smallest-magnitude value when all arguments share a sign, else zero."""
    lo = np.minimum(np.minimum(a1, a2), a3)
    hi = np.maximum(np.maximum(a1, a2), a3)
    out = np.where(lo > 0, lo, 0.0)
    return np.where(hi < 0, hi, out)


def _limited_slopes(rho: np.ndarray, dx: float) -> np.ndarray:
    sl = np.zeros_like(rho)
    if rho.size >= 3:
        fwd = rho[2:] - rho[1:-1]
        bwd = rho[1:-1] - rho[:-2]
        sl[1:-1] = minmod(2.0 * fwd / dx, (fwd + bwd) / (2.0 * dx), 2.0 * bwd / dx)
    return sl


def _edge_velocities(rho: np.ndarray, dx: float, eps: float, conv: ConvolutionPlan):
    S = conv(rho)
    return (S[1:] - S[:-1]) - (eps / dx) * (rho[1:] - rho[:-1])


def _rhs_from_velocity(rho: np.ndarray, dx: float, u: np.ndarray) -> np.ndarray:
    sl = _limited_slopes(rho, dx)
    east = rho + 0.5 * dx * sl
    west = rho - 0.5 * dx * sl
    flux = np.where(u > 0.0, u * east[:-1], u * west[1:])
    out = np.empty_like(rho)
    out[0] = -flux[0] / dx
    out[-1] = flux[-1] / dx
    out[1:-1] = -(flux[1:] - flux[:-1]) / dx
    return out


# -- per-index accessors (test/introspection surface; run() uses the arrays) --


def edge_velocity(state: FvState, kernel, epsilon: float, i: int) -> float:
    """Discrete velocity at the edge between cells i and i+1."""
    rho = state.density.cell_avg
    conv = ConvolutionPlan(kernel, rho.size, state.density.dx)
    u = _edge_velocities(rho, state.density.dx, epsilon, conv)
    return float(u[i])

def limited_slope(state: FvState, i: int) -> float:
    return float(_limited_slopes(state.density.cell_avg, state.density.dx)[i])

def numerical_flux(state: FvState, kernel, epsilon: float, i: int) -> float:
    """Upwind flux through the edge between cells i and i+1 (interior edges)."""
    rho = state.density.cell_avg
    dx = state.density.dx
    conv = ConvolutionPlan(kernel, rho.size, dx)
    u = _edge_velocities(rho, dx, epsilon, conv)
    sl = _limited_slopes(rho, dx)
    if u[i] > 0.0:
        return float(u[i] * (rho[i] + 0.5 * dx * sl[i]))
    return float(u[i] * (rho[i + 1] - 0.5 * dx * sl[i + 1]))

def rhs(state: FvState, kernel, epsilon: float) -> np.ndarray:
    """Semi-discrete right-hand side d(rho_i)/dt for every cell."""
    rho = state.density.cell_avg
    dx = state.density.dx
    conv = ConvolutionPlan(kernel, rho.size, dx)
    u = _edge_velocities(rho, dx, epsilon, conv)
    return _rhs_from_velocity(rho, dx, u)


def stable_dt(u_max: float, rho_max: float, dx: float, eps: float, cfl: float) -> float:
    dt = math.inf
    if u_max > 0.0:
        dt = cfl * dx / u_max
    if eps > 0.0:
        dt = min(dt, cfl * dx * dx / (2.0 * eps * max(1.0, rho_max)))
    return dt


def _postprocess_positivity(rho: np.ndarray, dx: float) -> np.ndarray:
    neg = rho < 0.0
    if not neg.any():
        return rho
    deficit = -float(rho[neg].sum()) * dx
    if deficit > 1e-12:
        raise FvAbort(f"positivity violated: negative mass {deficit:.3e}")
    before = rho.sum()
    rho = np.maximum(rho, 0.0)
    after = rho.sum()
    if after > 0.0:
        rho *= before / after
    return rho


def ssp_rk3_step(state: FvState, kernel, config: FvConfig, dt: float) -> FvState:
    """One SSP-RK3 step; rejects dt beyond the stability restriction."""
    rho = state.density.cell_avg
    dx = state.density.dx
    conv = ConvolutionPlan(kernel, rho.size, dx)
    u = _edge_velocities(rho, dx, config.epsilon, conv)
    limit = min(
        config.dt_max,
        stable_dt(float(np.abs(u).max()), float(rho.max()), dx, config.epsilon, config.cfl),
    )
    if dt > limit * (1.0 + 1e-9):
        raise ValueError(f"dt={dt:.3e} exceeds the stability restriction {limit:.3e}")
    new = _advance(rho, dx, config.epsilon, conv, dt, u)
    return FvState(state.time + dt, state.density.with_values(new))


def _advance(rho, dx, eps, conv, dt, u0=None) -> np.ndarray:
    if u0 is None:
        u0 = _edge_velocities(rho, dx, eps, conv)
    k1 = _rhs_from_velocity(rho, dx, u0)
    r1 = rho + dt * k1
    k2 = _rhs_from_velocity(r1, dx, _edge_velocities(r1, dx, eps, conv))
    r2 = 0.75 * rho + 0.25 * (r1 + dt * k2)
    k3 = _rhs_from_velocity(r2, dx, _edge_velocities(r2, dx, eps, conv))
    new = rho / 3.0 + (2.0 / 3.0) * (r2 + dt * k3)
    return _postprocess_positivity(new, dx)


def _merge_event_times(snapshot_times, diag_times, t_end):
    """Sorted (time, is_snapshot, is_diagnostic) triples, deduplicated."""
    events = {}
    for t in snapshot_times:
        t = float(t)
        if 0.0 <= t <= t_end + 1e-12:
            events[round(t, 12)] = events.get(round(t, 12), [False, False])
            events[round(t, 12)][0] = True
    for t in diag_times:
        t = float(t)
        if 0.0 <= t <= t_end + 1e-12:
            events.setdefault(round(t, 12), [False, False])[1] = True
    return [(t, snap, diag) for t, (snap, diag) in sorted(events.items())]


def run(
    initial: GridDensity,
    kernel,
    config: FvConfig,
    reference: Optional[GridDensity] = None,
    diagnostics_dt: Optional[float] = None,
) -> FvRunResult:
    """Integrate to t_end, emitting exact-time snapshots and diagnostics rows.

    Aborts on NaN, on positivity loss beyond roundoff, and on boundary cells
    accumulating more than 1e-8 (the zero-flux domain must stay large enough
    that the compactly supported solution never reaches it).
    """
    rho = initial.cell_avg.copy()
    dx = initial.dx
    conv = ConvolutionPlan(kernel, rho.size, dx)
    eps = config.epsilon
    t_end = config.t_end

    diag_times = []
    if diagnostics_dt is not None:
        if diagnostics_dt <= 0.0:
            raise ValueError("diagnostics_dt must be positive")
        diag_times = list(np.arange(0.0, t_end + 0.5 * diagnostics_dt, diagnostics_dt))
        if diag_times[-1] < t_end - 1e-12:
            diag_times.append(t_end)
    events = _merge_event_times(config.snapshot_times, diag_times, t_end)

    result = FvRunResult(final=FvState(0.0, initial))

    def emit(t, do_snap, do_diag):
        state = GridDensity(initial.x_left, dx, rho.copy())
        if do_snap:
            result.snapshots.append(FvState(t, state))
        if do_diag:
            w2 = wasserstein_p(state, reference, 2) if reference is not None else None
            result.diagnostics.append(
                _diag.DiagnosticsRow(
                    t=t,
                    mass=mass(state),
                    linf=linf_norm(state),
                    l2sq=l2_norm_sq(state),
                    m2=moment(state, 2),
                    energy=_diag.energy(state, kernel, eps),
                    dissipation=_diag.dissipation(state, kernel, eps),
                    w2_to_ref=w2,
                )
            )

    ei = 0
    while ei < len(events) and events[ei][0] <= 1e-14:
        emit(0.0, events[ei][1], events[ei][2])
        ei += 1

    t = 0.0
    while t < t_end - 1e-14:
        u = _edge_velocities(rho, dx, eps, conv)
        u_max = float(np.abs(u).max())
        rho_max = float(rho.max())
        if not math.isfinite(rho_max) or not math.isfinite(u_max):
            raise FvAbort(f"non-finite state at t={t:.6f}")
        if rho[0] > 1e-8 or rho[-1] > 1e-8:
            raise FvAbort(
                f"boundary mass leak at t={t:.6f}: enlarge the domain"
            )
        dt = min(config.dt_max, t_end - t, stable_dt(u_max, rho_max, dx, eps, config.cfl))
        if ei < len(events) and t + dt > events[ei][0] - 1e-14:
            dt = max(events[ei][0] - t, 1e-15)
        rho = _advance(rho, dx, eps, conv, dt, u)
        t += dt
        result.n_steps += 1
        if ei < len(events) and abs(t - events[ei][0]) < 1e-12:
            emit(events[ei][0], events[ei][1], events[ei][2])
            ei += 1

    result.final = FvState(t_end, GridDensity(initial.x_left, dx, rho))
    return result
