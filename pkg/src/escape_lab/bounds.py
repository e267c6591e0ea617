"""Closed-form and one-dimensional bounds on minimal loop lengths and escape rates."""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from .warp import WarpingFunction

__all__ = [
    "PreconditionError",
    "cylinder_lower_bound",
    "poly_lower_bound",
    "sigma_upper_bound",
    "wei_r_l",
]


class PreconditionError(ValueError):
    """The warping function does not have the shape a bound requires."""


def poly_lower_bound(alpha: float) -> tuple[float, float]:
    """Escape-rate lower bounds for ``delta(r) = (1 + r^2)^(-alpha)``.

    Returns ``(basic, improved)`` with ``basic = (1/2)^(2 + 1/(2 alpha))`` and
    ``improved = 1 / (alpha^(1/alpha) (2 + 1/alpha))``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    basic = 0.5 ** (2.0 + 1.0 / (2.0 * alpha))
    improved = 1.0 / (alpha ** (1.0 / alpha) * (2.0 + 1.0 / alpha))
    return basic, improved


def sigma_upper_bound(h: WarpingFunction, l: int, scale: float = 1.0,
                      n_grid: int = 2048) -> tuple[float, float]:
    """Minimum of ``F(r) = 2r + l * scale * h(r)`` over ``r >= 0``.

    ``F(r)`` is the length of the loop that runs out radially, winds ``l`` times
    around the circle at radius ``r`` and returns, so the minimum is an upper
    bound on the minimal loop length.  Returns ``(bound, argmin)``.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    lh = l * scale

    def F(r):
        return 2.0 * r + lh * h(r)

    f0 = lh * h(0.0)
    r_max = min(0.5 * f0, h.domain_max * (1 - 1e-12))
    grid = np.concatenate(([0.0], np.geomspace(r_max * 1e-9, r_max, n_grid)))
    vals = F(grid)
    i = int(np.argmin(vals))
    if i == 0 or i == grid.size - 1:
        return float(vals[i]), float(grid[i])
    lo, hi = grid[i - 1], grid[i + 1]
    res = optimize.minimize_scalar(F, bracket=(lo, grid[i], hi), method="golden",
                                   options={"xtol": 1e-12})
    best, arg = (float(res.fun), float(res.x)) if res.fun < vals[i] else (float(vals[i]), float(grid[i]))

    # golden section pins the argmin only to ~sqrt(eps); polish it on F' = 0
    def dF(r):
        return 2.0 + lh * h.jet(r).d1

    if dF(lo) < 0.0 < dF(hi):
        r = optimize.brentq(dF, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
        if F(r) <= best * (1 + 1e-15):
            best, arg = float(min(F(r), best)), float(r)
    return best, arg


def _nonincreasing_on(h: WarpingFunction, R: float, n: int = 256) -> bool:
    if R <= 0:
        return True
    grid = np.linspace(0.0, R, n)
    vals = h(grid)
    return bool(np.all(np.diff(vals) <= 1e-14 * np.abs(vals[:-1])))


def cylinder_lower_bound(R: float, l: int, h: WarpingFunction, scale: float = 1.0,
                         check: bool = True) -> float:
    """``2 sqrt(R^2 + (scale * h(R))^2 l^2 / 4)``.

    Valid for loops based at the pole that reach radius ``R`` and wind ``l``
    times, provided ``h`` is nonincreasing on ``[0, R]``.
    """
    if R < 0:
        raise ValueError("R must be >= 0")
    if check and not _nonincreasing_on(h, R):
        raise PreconditionError(f"{h!r} is not nonincreasing on [0, {R}]")
    d = scale * h(float(R))
    return 2.0 * math.sqrt(R * R + 0.25 * d * d * l * l)


def wei_r_l(h: WarpingFunction, l: int, r_max: float = 1.0, scale: float = 1.0) -> float:
    """Root of ``2r = l * scale * h(r)`` for ``h`` strictly decreasing to 0."""
    if l < 1:
        raise ValueError("l must be >= 1")
    if not h.is_decreasing_to_zero():
        raise PreconditionError(f"{h!r} is not strictly decreasing to 0")

    def g(r):
        return 2.0 * r - l * scale * h(r)

    hi = r_max
    while g(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise PreconditionError("no sign change found")
    return optimize.brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
