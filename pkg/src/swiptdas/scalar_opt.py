"""Scalar optimization kernels shared by the power-allocation solvers.

Provides the principal-branch Lambert W function (Halley iteration with a
branch-point series start), the closed-form maximizer of ln(a x + b)/(x + c)
over an interval, and a plain bisection root finder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "lambert_w0",
    "LogFractionProblem",
    "maximize_log_fraction",
    "bisect_root",
]

_E = math.e
_BRANCH_X = -math.exp(-1.0)  # branch point of the principal branch


@njit(cache=True, nogil=True)
def _lw0_scalar(x):
    if x < _BRANCH_X:
        # tolerate representation noise right at the branch point
        if x > _BRANCH_X - 1e-15:
            return -1.0
        raise ValueError("lambert_w0 is defined for x >= -1/e only")
    # initial guess by region
    if x < -0.25:
        p = math.sqrt(2.0 * (_E * x + 1.0))
        w = -1.0 + p * (1.0 - p / 3.0 + p * p * (11.0 / 72.0))
        if p < 1e-4:
            # series already at full precision; Halley would divide by ~0
            return w
    elif x < 0.0:
        w = x * (1.0 - x * (1.0 - 1.5 * x))
    else:
        ll = math.log1p(x)
        w = ll * (1.0 - math.log1p(ll) / (1.0 + ll))
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            w += 1e-12
            continue
        # Halley step: f / (f' - f * f'' / (2 f'))
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 1e-16 * (2.0 + abs(w)):
            break
    return w


@njit(cache=True, nogil=True)
def _lw0_array(xs):
    out = np.empty_like(xs)
    for i in range(xs.size):
        out[i] = _lw0_scalar(xs[i])
    return out


def lambert_w0(x):
    """Principal branch of the Lambert W function.

    Solves w * exp(w) = x for the branch with w >= -1, for x >= -1/e.
    Accepts a scalar or an ndarray; the residual |w e^w - x| stays within
    1e-12 * max(1, |x|) across the domain.
    """
    if np.ndim(x) == 0:
        return float(_lw0_scalar(float(x)))
    arr = np.ascontiguousarray(x, dtype=float)
    return _lw0_array(arr.ravel()).reshape(arr.shape)


@dataclass(frozen=True)
class LogFractionProblem:
    """Maximize ln(a x + b) / (x + c) over x in [x_min, x_max].

    Requires a > 0, c > 0 and a * x_min + b >= 1 so the log argument stays
    at or above one (non-negative objective) on the feasible interval.
    """

    a: float
    b: float
    c: float
    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.a > 0.0:
            raise ValueError("a must be positive")
        if not self.c > 0.0:
            raise ValueError("c must be positive")
        if self.x_min > self.x_max * (1.0 + 1e-12) + 1e-300:
            raise ValueError("x_min must not exceed x_max")
        lo = self.a * self.x_min + self.b
        tol = 1e-9 * max(1.0, abs(self.b), self.a * abs(self.x_min))
        if lo < 1.0 - tol:
            raise ValueError("a * x_min + b must be at least 1")


def maximize_log_fraction(problem):
    """Closed-form maximizer of ln(a x + b)/(x + c) on [x_min, x_max].

    When a*c - b >= -1 the unconstrained stationary point is
    (exp(W((a c - b)/e) + 1) - b) / a with W the principal-branch Lambert W,
    clamped into the interval; otherwise the objective is decreasing and the
    maximizer is x_min.
    """
    a, b, c = problem.a, problem.b, problem.c
    z = a * c - b
    if z >= -1.0:
        w = _lw0_scalar(z / _E)
        if w + 1.0 >= 709.0:
            # exp would overflow; use exp(w + 1) = z / w instead
            ew1 = z / w
        else:
            ew1 = math.exp(w + 1.0)
        x = (ew1 - b) / a
    else:
        x = problem.x_min
    return float(min(max(x, problem.x_min), problem.x_max))


def bisect_root(f, lo, hi, tol):
    """Find a root of a scalar function by bisection on a sign-change bracket.

    Returns x with |f(x)| <= tol, or the bracket midpoint once the bracket
    width falls below tol * max(1, |x|). Raises ValueError when f(lo) and
    f(hi) share a sign.
    """
    lo = float(lo)
    hi = float(hi)
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    flo = f(lo)
    fhi = f(hi)
    if abs(flo) <= tol:
        return lo
    if abs(fhi) <= tol:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise ValueError("endpoints do not bracket a root")
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= tol:
            return mid
        if (fm > 0.0) == (fhi > 0.0):
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
        if hi - lo <= tol * max(1.0, abs(mid)):
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)
