"""Ricci curvature of doubly warped products and the nilpotent-fiber obstruction.

For ``g = dr^2 + f^2 ds^2 + h^2 dphi^2`` on ``[0, inf) x S^(p-1) x S^1`` and the
unit vectors ``H = d/dr``, ``U`` tangent to the sphere, ``X`` tangent to the circle:

    Ric(H,H) = -h''/h - (p-1) f''/f
    Ric(U,U) = -f''/f + (p-2)(1 - f'^2)/f^2 - f'h'/(fh)
    Ric(X,X) = -h''/h - (p-1) f'h'/(fh)

All three are affine in ``p``, which the dimension search exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .warp import Jet2, ManifoldSpec, WarpingFunction, log_decay, poly_decay

__all__ = [
    "ChainKind",
    "DegenerateSpec",
    "DominanceTable",
    "NilFactorModel",
    "PositivityReport",
    "RicciReport",
    "WeiDecayChain",
    "dominance_analysis",
    "first_positive_dimension",
    "minimal_dimension_search",
    "multi_factor_bound",
    "negative_witnesses",
    "ricci_at",
    "ricci_grid",
    "scan_positivity",
    "validate_wei_chain",
]

DEFAULT_GRID_POINTS = 4096


class DegenerateSpec(ValueError):
    """A warping function vanishes at a positive radius."""


@dataclass(frozen=True)
class RicciReport:
    r: float
    ric_H: float
    ric_U: float
    ric_X: float


@dataclass
class PositivityReport:
    grid: np.ndarray = field(repr=False)
    min_values: tuple[float, float, float]
    positive: bool
    first_failure: tuple[float, str] | None

    def to_dict(self) -> dict:
        return {
            "r_min": float(self.grid[0]),
            "r_max": float(self.grid[-1]),
            "n_points": int(self.grid.size),
            "min_ric_H": self.min_values[0],
            "min_ric_U": self.min_values[1],
            "min_ric_X": self.min_values[2],
            "positive": self.positive,
            "first_failure": None if self.first_failure is None
            else {"r": self.first_failure[0], "expression": self.first_failure[1]},
        }


def _coefficients(f: Jet2, h: Jet2):
    """Split each Ricci expression into ``const + (p - 1) * slope``."""
    fpp_f = f.d2 / f.value
    hpp_h = h.d2 / h.value
    fh = f.d1 * h.d1 / (f.value * h.value)
    ff = (1.0 - f.d1**2) / f.value**2
    return (
        (-hpp_h, -fpp_f),
        (-fpp_f - fh - ff, ff),  # (p-2) = (p-1) - 1
        (-hpp_h, -fh),
    )


def _jets(spec_f: WarpingFunction, spec_h: WarpingFunction, r):
    f, h = spec_f.jet(r), spec_h.jet(r)
    if np.any(np.asarray(f.value) == 0.0) or np.any(np.asarray(h.value) == 0.0):
        raise DegenerateSpec("f or h vanishes at a positive radius")
    return f, h


def ricci_grid(spec: ManifoldSpec, r) -> np.ndarray:
    """Array of shape ``(3, len(r))`` with rows ric_H, ric_U, ric_X."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("Ricci formulas need r > 0")
    f, h = _jets(spec.f, spec.h, r)
    return np.array([c + (spec.p - 1) * s for c, s in _coefficients(f, h)])


def ricci_at(spec: ManifoldSpec, r: float) -> RicciReport:
    if r <= 0:
        raise ValueError("Ricci formulas need r > 0")
    f, h = _jets(spec.f, spec.h, float(r))
    p1 = spec.p - 1
    hpp_h = h.d2 / h.value
    fpp_f = f.d2 / f.value
    fh = f.d1 * h.d1 / (f.value * h.value)
    return RicciReport(
        r=float(r),
        ric_H=-hpp_h - p1 * fpp_f,
        ric_U=-fpp_f + (spec.p - 2) * (1.0 - f.d1**2) / f.value**2 - fh,
        ric_X=-hpp_h - p1 * fh,
    )


def _log_grid(r_min: float, r_max: float, n_points: int) -> np.ndarray:
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    if n_points < 2:
        raise ValueError("need n_points >= 2")
    return np.geomspace(r_min, r_max, n_points)


_NAMES = ("ric_H", "ric_U", "ric_X")


def _report(grid: np.ndarray, ric: np.ndarray) -> PositivityReport:
    mins = tuple(float(v) for v in ric.min(axis=1))
    bad = ~(ric > 0.0)  # nan counts as a failure
    cols = np.flatnonzero(bad.any(axis=0))
    first = None
    if cols.size:
        j = cols[0]
        first = (float(grid[j]), _NAMES[int(np.argmax(bad[:, j]))])
    return PositivityReport(grid=grid, min_values=mins, positive=first is None, first_failure=first)


def scan_positivity(spec: ManifoldSpec, r_min: float, r_max: float,
                    n_points: int = DEFAULT_GRID_POINTS) -> PositivityReport:
    """Strict positivity of all three Ricci expressions on a log-spaced grid."""
    grid = _log_grid(r_min, r_max, n_points)
    return _report(grid, ricci_grid(spec, grid))


def minimal_dimension_search(f: WarpingFunction, h: WarpingFunction, r_range=(1e-2, 1e5),
                             p_max: int = 10_000, n_points: int = DEFAULT_GRID_POINTS) -> int | None:
    """Smallest ``p`` in ``[2, p_max]`` with a positive scan, or ``None``.

    Every ``p`` is tried in order; no monotonicity in ``p`` is assumed.
    """
    if p_max < 2:
        raise ValueError("p_max must be >= 2")
    grid = _log_grid(r_range[0], r_range[1], n_points)
    fj, hj = _jets(f, h, grid)
    coeffs = np.array([[c, s] for c, s in _coefficients(fj, hj)])  # (3, 2, n)
    for p in range(2, p_max + 1):
        ric = coeffs[:, 0] + (p - 1) * coeffs[:, 1]
        if np.all(ric > 0.0):
            return p
    return None


# ---------------------------------------------------------------------------
# Multi-factor (nilpotent fiber) model
# ---------------------------------------------------------------------------


class ChainKind(str, Enum):
    POLYNOMIAL = "Polynomial"
    LOGARITHMIC = "Logarithmic"


@dataclass(frozen=True)
class WeiDecayChain:
    """Decay exponents of fiber directions, ``||X_i||_r = h_i(r)``."""

    alphas: tuple[float, ...]
    kind: ChainKind = ChainKind.POLYNOMIAL

    def __post_init__(self):
        if not self.alphas:
            raise ValueError("chain must be nonempty")
        if any(a <= 0 for a in self.alphas):
            raise ValueError("decay exponents must be positive")

    def factors(self) -> list[WarpingFunction]:
        make = poly_decay if self.kind is ChainKind.POLYNOMIAL else log_decay
        return [make(a) for a in self.alphas]


def validate_wei_chain(chain: WeiDecayChain, tol: float = 1e-12) -> bool:
    """``2 a_i - 4 a_(i+1) = 1`` for every consecutive pair."""
    a = chain.alphas
    return all(abs(2 * a[i] - 4 * a[i + 1] - 1.0) <= tol for i in range(len(a) - 1))


@dataclass(frozen=True)
class NilFactorModel:
    """Lower bound on the fiber's own Ricci curvature.

    ``PolyModel``: ``-c/(1+r^2)``; ``LogModel``: ``-c/ln(2+r^2)``.
    """

    kind: ChainKind
    c: float

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("c must be >= 0")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind is ChainKind.POLYNOMIAL:
            return -self.c / (1.0 + r**2)
        return -self.c / np.log(2.0 + r**2)


def _terms(chain: WeiDecayChain, nil: NilFactorModel, f: WarpingFunction, r):
    """Per-factor term groups, each shaped ``(n, len(r))``.

    Returns ``(intrinsic, radial_per_p1, model, cross)`` where the factor bound is
    ``intrinsic + (p-1) * radial_per_p1 + model + cross``.
    """
    if chain.kind is not nil.kind:
        raise ValueError(f"chain kind {chain.kind.value} does not match model kind {nil.kind.value}")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        raise ValueError("need r > 0")
    fj = f.jet(r)
    jets = [w.jet(r) for w in chain.factors()]
    log_d = np.array([j.d1 / j.value for j in jets])
    intrinsic = np.array([-j.d2 / j.value for j in jets])
    radial = -(fj.d1 / fj.value) * log_d
    model = np.broadcast_to(nil(r), log_d.shape)
    cross = -(log_d * (log_d.sum(axis=0) - log_d))
    return intrinsic, radial, model, cross


def multi_factor_bound(chain: WeiDecayChain, nil: NilFactorModel, f: WarpingFunction, p: int, r):
    """Lower bound on ``Ric(X_i, X_i)`` for each factor ``i``.

    Scalar ``r`` gives a list of ``n`` floats; array ``r`` gives an ``(n, len(r))`` array.
    """
    intrinsic, radial, model, cross = _terms(chain, nil, f, r)
    out = intrinsic + (p - 1) * radial + model + cross
    if np.ndim(r) == 0:
        return [float(v) for v in out[:, 0]]
    return out


def first_positive_dimension(chain: WeiDecayChain, nil: NilFactorModel, f: WarpingFunction,
                             r_range=(1.0, 1e5), p_max: int = 10_000,
                             n_points: int = DEFAULT_GRID_POINTS) -> int | None:
    """Smallest ``p <= p_max`` with every factor bound positive on the grid."""
    grid = _log_grid(r_range[0], r_range[1], n_points)
    intrinsic, radial, model, cross = _terms(chain, nil, f, grid)
    base = intrinsic + model + cross
    for p in range(2, p_max + 1):
        if np.all(base + (p - 1) * radial > 0.0):
            return p
    return None


def negative_witnesses(chain: WeiDecayChain, nil: NilFactorModel, f: WarpingFunction,
                       r_range=(1.0, 1e6), p_max: int = 10_000,
                       n_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """For each ``p`` in ``[2, p_max]`` the smallest grid radius with a negative bound.

    Entries are ``nan`` where no negative bound occurs on the grid.
    """
    grid = _log_grid(r_range[0], r_range[1], n_points)
    intrinsic, radial, model, cross = _terms(chain, nil, f, grid)
    base = (intrinsic + model + cross)
    out = np.full(p_max - 1, np.nan)
    for idx, p in enumerate(range(2, p_max + 1)):
        neg = np.any(base + (p - 1) * radial < 0.0, axis=0)
        hit = np.flatnonzero(neg)
        if hit.size:
            out[idx] = grid[hit[0]]
    return out


@dataclass(frozen=True)
class DominanceTable:
    r_probe: float
    names: tuple[str, ...]
    at_probe: tuple[float, ...]
    at_10x: tuple[float, ...]
    exponents: tuple[float | None, ...]
    flag: str


_TERM_NAMES = ("intrinsic", "radial", "model", "cross")


def dominance_analysis(chain: WeiDecayChain, nil: NilFactorModel, f: WarpingFunction,
                       r_probe: float, p: int = 2, separation: float = 0.5) -> DominanceTable:
    """Magnitudes and two-point log-slopes of the term groups for the last factor.

    ``flag`` is ``"model"`` when the model term decays slower than every geometric
    term by more than ``separation`` in exponent, ``"geometric"`` when the model
    term vanishes, and ``"comparable"`` otherwise.
    """
    if r_probe < 10:
        raise ValueError("r_probe must be >= 10")
    radii = np.array([r_probe, 10.0 * r_probe])
    intrinsic, radial, model, cross = _terms(chain, nil, f, radii)
    groups = [intrinsic[-1], (p - 1) * radial[-1], model[-1], cross[-1]]
    mags = [np.abs(g) for g in groups]
    exps: list[float | None] = []
    for m in mags:
        if m[0] > 0 and m[1] > 0:
            exps.append(float(math.log(m[1] / m[0]) / math.log(10.0)))
        else:
            exps.append(None)
    geo = [e for name, e in zip(_TERM_NAMES, exps) if name != "model" and e is not None]
    if exps[2] is None:
        flag = "geometric"
    elif geo and exps[2] > max(geo) + separation:
        flag = "model"
    else:
        flag = "comparable"
    return DominanceTable(
        r_probe=float(r_probe),
        names=_TERM_NAMES,
        at_probe=tuple(float(m[0]) for m in mags),
        at_10x=tuple(float(m[1]) for m in mags),
        exponents=tuple(exps),
        flag=flag,
    )
