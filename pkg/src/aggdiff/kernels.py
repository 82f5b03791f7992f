"""Interaction kernels for the nonlocal transport term.

The solvers and diagnostics only ever touch a kernel through the
:class:`InteractionKernel` container: the kernel profile, its first two
derivatives, its total integral, and the half-width of the interval around
the origin on which the profile is concave.  The built-in profile is the
normalised Gaussian ``exp(-x**2)/sqrt(pi)``; arbitrary smooth even profiles
can be wrapped with :func:`from_callable`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

_SQRT_PI = np.sqrt(np.pi)

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InteractionKernel:
    """Even, integrable interaction profile with two derivatives.

    Parameters
    ----------
    value, deriv1, deriv2
        Vectorised callables evaluating the profile and its first two
        derivatives.  They must accept and return ``numpy`` arrays (or
        scalars) and be defined on the whole real line.
    l1_norm
        Total integral of ``|value|`` over the line.
    concave_radius
        Largest ``r`` such that ``deriv2 < 0`` on ``(-r, r)``, or ``None``
        when the profile is nowhere concave around the origin.
    name
        Short identifier used in CLI output and config files.
    """

    value: ArrayFn
    deriv1: ArrayFn
    deriv2: ArrayFn
    l1_norm: float
    concave_radius: Optional[float]
    name: str = field(default="custom")

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    def derivative(self, x, order: int = 1):
        """Evaluate the first or second derivative of the profile."""
        if order == 1:
            return self.deriv1(np.asarray(x, dtype=float))
        if order == 2:
            return self.deriv2(np.asarray(x, dtype=float))
        raise ValueError(f"unsupported derivative order: {order}")


def gaussian(scale: float = 1.0, width: float = 1.0) -> InteractionKernel:
    """Gaussian kernel ``scale * exp(-(x/width)**2) / (sqrt(pi)*width)``.

    The defaults give the normalised profile ``exp(-x**2)/sqrt(pi)``: unit
    mass, concave exactly on ``(-1/sqrt(2), 1/sqrt(2))``.  ``scale`` is the
    total integral; ``width`` stretches the profile (and the concavity
    radius) proportionally.
    """
    if scale <= 0.0 or width <= 0.0:
        raise ValueError("scale and width must be positive")
    amp = scale / (_SQRT_PI * width)
    w2 = width * width
    return InteractionKernel(
        value=lambda x: amp * np.exp(-x * x / w2),
        deriv1=lambda x: amp * (-2.0 * x / w2) * np.exp(-x * x / w2),
        deriv2=lambda x: amp * (4.0 * x * x / w2 - 2.0) / w2 * np.exp(-x * x / w2),
        l1_norm=float(scale),
        concave_radius=width / np.sqrt(2.0),
        name="gaussian",
    )


def from_callable(
    fn: ArrayFn,
    deriv1: Optional[ArrayFn] = None,
    deriv2: Optional[ArrayFn] = None,
    l1_norm: Optional[float] = None,
    concave_radius: Optional[float] = None,
    name: str = "custom",
    fd_step: float = 1e-5,
    tail: float = 30.0,
) -> InteractionKernel:
    """Wrap a plain profile function as an :class:`InteractionKernel`.

    Missing derivatives are filled in with central finite differences of
    step ``fd_step``; a missing ``l1_norm`` is computed by adaptive
    quadrature of ``|fn|`` over ``[-tail, tail]``; a missing
    ``concave_radius`` is located by scanning the second derivative away
    from the origin and bisecting its first sign change.
    """
    fn_v = lambda x: np.asarray(fn(x), dtype=float)
    if deriv1 is None:
        deriv1 = lambda x: (fn_v(x + fd_step) - fn_v(x - fd_step)) / (2.0 * fd_step)
    if deriv2 is None:
        deriv2 = lambda x: (
            fn_v(x + fd_step) - 2.0 * fn_v(x) + fn_v(x - fd_step)
        ) / (fd_step * fd_step)
    if l1_norm is None:
        l1_norm = quad(lambda x: abs(float(fn_v(np.array(x)))), -tail, tail, limit=400)[0]
    if concave_radius is None:
        concave_radius = _scan_concave_radius(deriv2, tail)
    return InteractionKernel(fn_v, deriv1, deriv2, float(l1_norm), concave_radius, name)


def _scan_concave_radius(deriv2: ArrayFn, tail: float) -> Optional[float]:
    xs = np.linspace(0.0, tail, 20001)
    d2 = np.asarray(deriv2(xs), dtype=float)
    if d2[0] >= 0.0:
        return None
    pos = np.nonzero(d2 >= 0.0)[0]
    if pos.size == 0:
        return float(tail)
    lo, hi = xs[pos[0] - 1], xs[pos[0]]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if float(deriv2(np.array(mid))) < 0.0:
            lo = mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def concavity_interval(kernel: InteractionKernel) -> Optional[tuple[float, float]]:
    """Symmetric interval on which the kernel is strictly concave.

    Returns ``(-r, r)`` with ``r`` the kernel's ``concave_radius``, or
    ``None`` when no such interval exists.
    """
    r = kernel.concave_radius
    if r is None or r <= 0.0:
        return None
    return (-r, r)


def contraction_rate(kernel: InteractionKernel, half_width: float) -> float:
    """Worst-case curvature bound ``-max deriv2`` over ``[-w, w]``.

    For states confined to ``[-w, w]`` with ``w`` inside the concavity
    interval this is the positive rate at which pairwise differences are
    driven together; it degrades to a non-positive value once ``w``
    reaches the inflection point.
    """
    if half_width < 0.0:
        raise ValueError("half_width must be nonnegative")
    xs = np.linspace(-half_width, half_width, 4097)
    return float(-np.max(kernel.deriv2(xs)))
