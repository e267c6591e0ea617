"""Clairaut integrals on the surface of revolution through the pole.

Geodesics through the pole ``x = (0, y)`` stay in the totally geodesic slice
``{line through 0} x S^1`` with metric ``dt^2 + h(|t|)^2 dphi^2``, ``t`` in R.
Along such a geodesic ``b = h^2 dphi/ds`` is constant, and a half-oscillation
from ``t = 0`` out to the turning radius ``t*`` (``h(t*) = b``) and back costs

    delta_phi = 2 int_0^t* b / (h sqrt(h^2 - b^2)) dt
    length    = 2 int_0^t* h / sqrt(h^2 - b^2) dt

Both integrands blow up like ``(t* - t)^(-1/2)``.  The outer half of the range
is integrated after substituting ``t = t* - u^2``, which makes the integrand
smooth at ``u = 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from ..warp import WarpingFunction

__all__ = [
    "DegenerateTurning",
    "GeodesicArc",
    "NoTurningPoint",
    "RevolutionProfile",
    "arc_from_turning",
    "half_oscillation",
    "turning_radius",
]

MIN_TURNING_SLOPE = 1e-10


class NoTurningPoint(ValueError):
    """No radius where the profile drops to the Clairaut constant."""


class DegenerateTurning(ValueError):
    """Profile is flat at the turning radius; the singularity is not integrable as assumed."""


@dataclass(frozen=True)
class RevolutionProfile:
    """Even extension ``t -> h(|t|)`` with a circle of ``period`` in ``phi``."""

    h: WarpingFunction
    period: float = 1.0

    @property
    def t_max(self) -> float:
        return self.h.domain_max

    def value(self, t):
        return self.h(np.abs(t)) if not isinstance(t, float | int) else self.h(abs(float(t)))

    def jet(self, t):
        """``(h_hat, h_hat', h_hat'')`` with the odd reflection of the first derivative."""
        j = self.h.jet(np.abs(t))
        return j.value, np.sign(t) * j.d1, j.d2


@dataclass(frozen=True)
class GeodesicArc:
    b: float
    t_star: float
    delta_phi: float
    length: float


def turning_radius(profile: RevolutionProfile, b: float, rtol: float = 1e-13) -> float:
    """First radius where ``h`` falls to ``b``, by a bracketed solve."""
    h = profile.h
    h0 = h(0.0)
    if not 0.0 < b < h0:
        raise NoTurningPoint(f"b={b} outside (0, h(0)={h0})")
    if h.limit is not None and h.limit >= b:
        raise NoTurningPoint(f"inf h = {h.limit} >= b={b}")
    top = h.domain_max
    lo, t = 0.0, min(1e-6, 0.5 * top)
    while h(t) >= b:
        lo = t
        t = min(1.25 * t, 0.5 * (t + top)) if math.isfinite(top) else 1.25 * t
        if t > 1e15 or (math.isfinite(top) and top - t < 1e-15 * top):
            raise NoTurningPoint(f"h stays above b={b}")
    return optimize.brentq(lambda s: h(s) - b, lo, t, xtol=1e-300, rtol=rtol, maxiter=500)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
_GL = tuple(zip(_GL_X.tolist(), _GL_W.tolist()))


def _integrals(h: WarpingFunction, t_star: float, b: float, slope: float, rel_tol: float):
    hf, hd1 = h._fast, h._fast_d1
    mag = abs(slope)
    h_star = hf(t_star)

    panel = 0.1 * max(t_star, 1.0)

    def gap(v, t, s):
        # h(t) - h(t*); where the direct difference cancels, integrate -h' over [t, t*]
        d = v - h_star
        if d > 1e-6 * v:
            return d
        m = max(1, math.ceil(s / panel))
        ds = s / m
        acc = 0.0
        for k in range(m):
            left = t_star - (k + 1) * ds
            acc += sum(w * hd1(left + ds * x) for x, w in _GL)
        return -ds * acc

    def head_len(t):
        v = hf(t)
        return v / math.sqrt(gap(v, t, t_star - t) * (v + b))

    def head_phi(t):
        v = hf(t)
        return b / (v * math.sqrt(gap(v, t, t_star - t) * (v + b)))

    def tail_len(u):
        if u == 0.0:
            return 2.0 * b / math.sqrt(2.0 * b * mag)
        t = t_star - u * u
        v = hf(t)
        return 2.0 * u * v / math.sqrt(gap(v, t, u * u) * (v + b))

    def tail_phi(u):
        if u == 0.0:
            return 2.0 / math.sqrt(2.0 * b * mag)
        t = t_star - u * u
        v = hf(t)
        return 2.0 * u * b / (v * math.sqrt(gap(v, t, u * u) * (v + b)))

    split = 0.5 * t_star
    breaks = [x for x in (1.0, 10.0, 100.0, 1000.0, 1e4, 1e5) if x < split]
    opts = dict(epsabs=0.0, epsrel=rel_tol, limit=400)
    total = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for head, tail in ((head_phi, tail_phi), (head_len, tail_len)):
            a = integrate.quad(head, 0.0, split, points=breaks or None, **opts)[0]
            c = integrate.quad(tail, 0.0, math.sqrt(t_star - split), **opts)[0]
            total.append(2.0 * (a + c))
    return total[0], total[1]


def arc_from_turning(profile: RevolutionProfile, t_star: float, rel_tol: float = 1e-11,
                     b: float | None = None) -> GeodesicArc:
    """Half-oscillation turning at ``t_star``; ``b`` defaults to ``h(t_star)``."""
    j = profile.h.jet(t_star)
    if abs(j.d1) < MIN_TURNING_SLOPE:
        raise DegenerateTurning(f"|h'(t*)| = {abs(j.d1):.3g} at t*={t_star}")
    if b is None:
        b = j.value
    dphi, length = _integrals(profile.h, t_star, b, j.d1, rel_tol)
    return GeodesicArc(b=float(b), t_star=float(t_star), delta_phi=dphi, length=length)


def half_oscillation(profile: RevolutionProfile, b: float, rel_tol: float = 1e-11) -> GeodesicArc:
    """Arc from the waist out to the turning radius for Clairaut constant ``b`` and back."""
    t_star = turning_radius(profile, b)
    return arc_from_turning(profile, t_star, rel_tol=rel_tol, b=b)
