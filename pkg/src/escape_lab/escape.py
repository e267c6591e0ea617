"""Escape-rate estimates and orbit diagnostics from loop tables."""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    PreconditionError,
    cylinder_lower_bound,
    poly_lower_bound,
    sigma_upper_bound,
    wei_r_l,
)
from .geodesic.loops import MinimalLoop
from .warp import ManifoldSpec

__all__ = [
    "AlmostTranslation",
    "EscapeEstimate",
    "OrbitDiagnostics",
    "PreconditionError",
    "TableTooShort",
    "Trend",
    "TrendThresholds",
    "cylinder_lower_bound",
    "estimate_escape_rate",
    "geometric_ladder",
    "log_fit",
    "orbit_diagnostics",
    "poly_lower_bound",
    "sigma_upper_bound",
    "wei_r_l",
]

ALMOST_TRANSLATION = 1.9
MIN_ROWS = 8


class TableTooShort(ValueError):
    """Not enough usable rows for the requested statistic."""


class Trend(str, enum.Enum):
    DECREASING_TO_ZERO = "DecreasingToZero"
    BOUNDED_AWAY = "BoundedAway"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class TrendThresholds:
    slope: float = -0.05
    floor: float = 0.05


def geometric_ladder(l0: float, ratio: float, count: int) -> list[int]:
    """``ceil(l0 * ratio^j)`` for ``j < count``, duplicates dropped."""
    if l0 <= 0 or ratio <= 1 or count < 1:
        raise ValueError("need l0 > 0, ratio > 1, count >= 1")
    out: list[int] = []
    for j in range(count):
        # guard against ceil(3.0000000000000004) == 4
        v = l0 * ratio**j
        n = max(1, math.ceil(v - 1e-9 * v))
        if not out or n > out[-1]:
            out.append(n)
    return out


def _usable(table: Sequence[MinimalLoop]) -> list[MinimalLoop]:
    rows = [r for r in table if not r.failed and math.isfinite(r.length) and r.length > 0]
    if any(b.l <= a.l for a, b in zip(rows, rows[1:])):
        raise ValueError("table rows must have increasing l")
    return rows


def _r2(y: np.ndarray, yhat: np.ndarray) -> float:
    ss = float(np.sum((y - y.mean()) ** 2))
    res = float(np.sum((y - yhat) ** 2))
    if ss == 0.0:
        return 1.0 if res == 0.0 else -math.inf
    return 1.0 - res / ss


def log_fit(r_l: np.ndarray, ratio: np.ndarray) -> dict:
    """Fit ``ratio = c / ln(r_l / r0)``.

    The model is linear after inversion, ``1/ratio = (ln r_l - ln r0) / c``, and
    is solved that way; ``r_squared`` is measured on the ratios themselves.  The
    one-parameter variant ``c / ln(r_l)`` is reported alongside.
    """
    x = np.log(np.asarray(r_l, dtype=float))
    y = np.asarray(ratio, dtype=float)
    slope, icpt = np.polyfit(x, 1.0 / y, 1)
    c = 1.0 / slope
    ln_r0 = -icpt * c
    pred = c / (x - ln_r0)
    c1 = float(np.dot(1.0 / x, y) / np.dot(1.0 / x, 1.0 / x))
    return {
        "c": float(c),
        "ln_r0": float(ln_r0),
        "r_squared": _r2(y, pred),
        "c_no_offset": c1,
        "r_squared_no_offset": _r2(y, c1 / x),
    }


@dataclass
class EscapeEstimate:
    tail_sup: float
    full_sup: float
    trend: Trend
    tail_window: tuple[int, int]
    fit: dict | None = None
    tail_min: float = math.nan

    def to_dict(self) -> dict:
        return {
            "tail_sup": self.tail_sup,
            "full_sup": self.full_sup,
            "tail_min": self.tail_min,
            "trend": self.trend.value,
            "tail_window": list(self.tail_window),
            "fit": self.fit,
        }


def estimate_escape_rate(table: Sequence[MinimalLoop], tail_fraction: float = 0.5,
                         thresholds: TrendThresholds | None = None,
                         spec: ManifoldSpec | None = None) -> EscapeEstimate:
    """Finite-ladder proxy for the limsup of ``max_radius / length``.

    The tail is the last ``ceil(tail_fraction * n)`` rows.  Trend rules:
    all-zero ratios or a strictly decreasing tail with log-log slope at most
    ``thresholds.slope`` give ``DecreasingToZero``; otherwise a tail minimum of at
    least ``thresholds.floor`` gives ``BoundedAway``.  When ``spec`` is given the
    fit also includes ``c / ln(r_l)`` with ``r_l`` the minimizer of ``2r + l h(r)``.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1]")
    thresholds = thresholds or TrendThresholds()
    rows = _usable(table)
    if len(rows) < MIN_ROWS:
        raise TableTooShort(f"need at least {MIN_ROWS} usable rows, got {len(rows)}")
    ls = np.array([r.l for r in rows], dtype=float)
    ratios = np.array([r.ratio for r in rows])
    m = max(2, math.ceil(tail_fraction * len(rows)))
    tl, tr = ls[-m:], ratios[-m:]
    fit: dict = {}
    if np.all(ratios == 0.0):
        trend = Trend.DECREASING_TO_ZERO
    else:
        decreasing = bool(np.all(np.diff(tr) < 0))
        slope = None
        if np.all(tr > 0):
            slope, amp = np.polyfit(np.log(tl), np.log(tr), 1)
            fit["power_slope"] = float(slope)
            fit["power_amplitude"] = float(math.exp(amp))
        if decreasing and slope is not None and slope <= thresholds.slope:
            trend = Trend.DECREASING_TO_ZERO
        elif tr.min() >= thresholds.floor:
            trend = Trend.BOUNDED_AWAY
        else:
            trend = Trend.INCONCLUSIVE
        if spec is not None and np.all(tr > 0):
            r_l = np.array([sigma_upper_bound(spec.h, int(l), scale=spec.period)[1] for l in tl])
            if np.all(r_l > 1.0):
                fit["log"] = log_fit(r_l, tr)
    return EscapeEstimate(
        tail_sup=float(tr.max()),
        full_sup=float(ratios.max()),
        trend=trend,
        tail_window=(int(tl[0]), int(tl[-1])),
        fit=fit or None,
        tail_min=float(tr.min()),
    )


@dataclass(frozen=True)
class AlmostTranslation:
    l: int
    ratio: float
    flag: bool


@dataclass
class OrbitDiagnostics:
    """``D(R)``, ``s(eps, R) = 2 (1/eps + 1) D(R)`` at each row length, and doubling ratios."""

    epsilon: float
    R: list[float]
    D: list[float]
    s: list[float]
    ratio_R_over_s: list[float | None]
    almost_translation: list[AlmostTranslation] = field(default_factory=list)
    threshold: float = ALMOST_TRANSLATION

    @property
    def D_curve(self):
        return list(zip(self.R, self.D))

    @property
    def s_curve(self):
        return list(zip(self.R, self.s))


def orbit_diagnostics(table: Sequence[MinimalLoop], epsilon: float,
                      threshold: float = ALMOST_TRANSLATION,
                      require_pairs: bool = True) -> OrbitDiagnostics:
    """Orbit-growth diagnostics from a loop table.

    ``D(R)`` is the largest ``max_radius`` among rows with ``length <= R``; ``R``
    runs over the row lengths in increasing order.  ``R / s`` is ``None`` where
    ``s = 0``.  Doubling ratios ``length(2l) / length(l)`` are flagged when at
    least ``threshold``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    rows = _usable(table)
    if not rows:
        raise TableTooShort("empty table")
    lengths = np.array([r.length for r in rows])
    radii = np.array([r.max_radius for r in rows])
    order = np.argsort(lengths, kind="stable")
    R = lengths[order]
    D = np.maximum.accumulate(radii[order])
    # equal lengths share one D value
    for i in range(len(R) - 2, -1, -1):
        if R[i] == R[i + 1]:
            D[i] = D[i + 1]
    s = 2.0 * (1.0 / epsilon + 1.0) * D
    ros = [float(r / v) if v > 0 else None for r, v in zip(R, s)]

    by_l = {r.l: r.length for r in rows}
    pairs = [AlmostTranslation(l, by_l[2 * l] / by_l[l], by_l[2 * l] / by_l[l] >= threshold)
             for l in sorted(by_l) if 2 * l in by_l]
    if require_pairs and not pairs:
        raise TableTooShort("no (l, 2l) pairs in the table")
    return OrbitDiagnostics(
        epsilon=float(epsilon),
        R=[float(x) for x in R],
        D=[float(x) for x in D],
        s=[float(x) for x in s],
        ratio_R_over_s=ros,
        almost_translation=pairs,
        threshold=float(threshold),
    )
