"""Minimal geodesic loops at the pole, one winding class at a time.

The loop representing ``gamma^l`` lifts to a minimizing geodesic in the cover
``R x R`` of the slice, from ``(0, 0)`` to ``(0, l * period)``.  Candidates are
the waist ``t = 0`` and geodesics made of ``k`` half-oscillations with
``k * delta_phi(b) = l * period``.  Slice reduction is exact here: dropping the
sphere term of the metric shortens every curve and maps loops at the pole to
loops in the half-slice ``t >= 0``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ..bounds import sigma_upper_bound
from ..warp import ExpressionError, ManifoldSpec
from .arcs import MIN_TURNING_SLOPE, DegenerateTurning, RevolutionProfile, arc_from_turning

__all__ = [
    "ClairautTable",
    "MinimalLoop",
    "SearchExhausted",
    "SearchParams",
    "loop_table",
    "minimal_loop",
    "radius_cap",
]

TIE_RTOL = 1e-9


class SearchExhausted(RuntimeError):
    """No admissible loop candidate."""


@dataclass(frozen=True)
class SearchParams:
    """Knobs of the loop search.

    ``n_grid`` turning radii are log-spaced on ``[t_min, t_max]`` (``t_max`` is
    derived from the loop-length bounds unless given); each maps to a Clairaut
    constant ``b = h(t*)``, so this is a b-grid as well.
    """

    n_grid: int = 1024
    t_min: float = 1e-3
    t_max: float | None = None
    k_cap_factor: int = 64
    quad_rel_tol: float = 1e-11
    root_rel_tol: float = 1e-14
    refine_margin: float = 1e-3
    min_refine: int = 3
    max_refine: int = 32
    workers: int = 1

    def __post_init__(self):
        if self.n_grid < 512:
            raise ValueError("n_grid must be >= 512")
        if self.quad_rel_tol <= 0 or self.root_rel_tol <= 0 or self.refine_margin < 0:
            raise ValueError("tolerances must be positive")


@dataclass
class MinimalLoop:
    l: int
    length: float
    max_radius: float
    b: float | None = None
    k: int | None = None
    candidates_examined: int = 0
    tied: bool = False
    error: str | None = None

    @property
    def ratio(self) -> float:
        return self.max_radius / self.length if self.length > 0 else math.nan

    @property
    def failed(self) -> bool:
        return self.error is not None


def _arc_chunk(args):
    h, period, nodes, rel_tol = args
    prof = RevolutionProfile(h, period)
    try:
        # flat stretches skip the per-node integrals entirely
        flat = np.abs(h.jet(np.asarray(nodes, dtype=float)).d1) < MIN_TURNING_SLOPE
    except ExpressionError:
        flat = np.zeros(len(nodes), dtype=bool)
    out = []
    for t, skip in zip(nodes, flat):
        if skip:
            out.append((h(float(t)), math.nan, math.nan, False))
            continue
        try:
            a = arc_from_turning(prof, float(t), rel_tol=rel_tol)
            out.append((a.b, a.delta_phi, a.length, True))
        except DegenerateTurning:
            out.append((h(float(t)), math.nan, math.nan, False))
    return out


@dataclass
class ClairautTable:
    """Half-oscillation data on a log grid of turning radii."""

    profile: RevolutionProfile
    t_star: np.ndarray
    b: np.ndarray
    delta_phi: np.ndarray
    length: np.ndarray
    valid: np.ndarray
    rel_tol: float = 1e-11
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, profile: RevolutionProfile, t_min: float, t_max: float, n: int,
              rel_tol: float = 1e-11, workers: int = 1) -> "ClairautTable":
        top = profile.t_max
        if math.isfinite(top):
            t_max = min(t_max, top * (1 - 1e-9))
        t_min = min(t_min, 0.5 * t_max)
        nodes = np.geomspace(t_min, t_max, n)
        if workers > 1:
            chunks = np.array_split(nodes, workers * 4)
            with ProcessPoolExecutor(max_workers=workers) as ex:
                rows = [r for part in ex.map(_arc_chunk, [(profile.h, profile.period, c, rel_tol)
                                                           for c in chunks]) for r in part]
        else:
            rows = _arc_chunk((profile.h, profile.period, nodes, rel_tol))
        b, dphi, length, ok = (np.array(col) for col in zip(*rows))
        # a node is a genuine first turning point only if h is below every earlier value
        prior = np.concatenate(([profile.h(0.0)], np.minimum.accumulate(b)[:-1]))
        ok = ok.astype(bool) & (b < prior) & (b > 0)
        return cls(profile, nodes, b, dphi, length, ok, rel_tol)

    def arc(self, t_star: float):
        key = float(t_star)
        if key not in self._cache:
            self._cache[key] = arc_from_turning(self.profile, key, rel_tol=self.rel_tol)
        return self._cache[key]


def radius_cap(spec: ManifoldSpec, l: int) -> float:
    """Largest turning radius a minimal loop of class ``l`` can reach.

    Any loop reaching radius ``R`` has length at least ``2R``; for nonincreasing
    ``h`` the cylinder projection bound sharpens this.
    """
    h, P = spec.h, spec.period
    upper = min(l * P * h(0.0), sigma_upper_bound(h, l, scale=P)[0])
    cap = 0.5 * upper
    if math.isfinite(h.domain_max):
        return min(cap, h.domain_max)
    grid = np.linspace(0.0, cap, 4097)
    vals = h(grid)
    if np.all(np.diff(vals) <= 0.0):
        lb = 2.0 * np.sqrt(grid**2 + 0.25 * (P * vals * l) ** 2)
        feasible = np.flatnonzero(lb <= upper * (1 + 1e-9))
        if feasible.size:
            j = min(feasible[-1] + 1, grid.size - 1)
            cap = float(grid[j])
    return cap


def _candidates(table: ClairautTable, target: float, l: int, k_cap: int, best: float):
    """Vectorized enumeration of (interval, k) pairs bracketing ``delta_phi = target/k``."""
    d = table.delta_phi
    ok = table.valid[:-1] & table.valid[1:]
    i = np.flatnonzero(ok)
    if i.size == 0:
        return None
    d0, d1 = d[i], d[i + 1]
    lo = np.minimum(d0, d1) * (1 - TIE_RTOL)
    hi = np.maximum(d0, d1) * (1 + TIE_RTOL)
    kmin = np.maximum(np.ceil(target / hi), 1).astype(np.int64)
    kmax = np.minimum(np.floor(target / lo), k_cap).astype(np.int64)
    count = np.maximum(kmax - kmin + 1, 0)
    total = int(count.sum())
    if total == 0:
        return None
    iv = np.repeat(i, count)
    offs = np.arange(total) - np.repeat(np.cumsum(count) - count, count)
    k = np.repeat(kmin, count) + offs
    tk = target / k
    a0, a1 = d[iv], d[iv + 1]
    den = a1 - a0
    s = np.where(den != 0, (tk - a0) / np.where(den != 0, den, 1.0), 0.5)
    s = np.clip(s, 0.0, 1.0)
    lt = np.log(table.t_star)
    t_est = np.exp(lt[iv] + s * (lt[iv + 1] - lt[iv]))
    len_est = k * (table.length[iv] + s * (table.length[iv + 1] - table.length[iv]))
    lower = 2.0 * k * table.t_star[iv]
    keep = lower < best * (1 + TIE_RTOL)
    return iv[keep], k[keep], t_est[keep], len_est[keep], total


def _refine(table: ClairautTable, i: int, k: int, target: float, root_rel_tol: float):
    """Exact turning radius in ``[t_i, t_{i+1}]`` with ``k * delta_phi = target``."""
    tk = target / k
    t0, t1 = table.t_star[i], table.t_star[i + 1]
    g0 = table.delta_phi[i] - tk
    g1 = table.delta_phi[i + 1] - tk
    if g0 == 0.0 or abs(g0) <= TIE_RTOL * tk and abs(g0) <= abs(g1):
        return table.arc(t0)
    if g1 == 0.0 or abs(g1) <= TIE_RTOL * tk:
        return table.arc(t1)
    if g0 * g1 > 0:
        return None

    def g(t):
        return table.arc(t).delta_phi - tk

    t = optimize.brentq(g, t0, t1, xtol=1e-300, rtol=max(root_rel_tol, 4.5e-16), maxiter=200)
    return table.arc(t)


def minimal_loop(spec: ManifoldSpec, l: int, search: SearchParams | None = None,
                 table: ClairautTable | None = None) -> MinimalLoop:
    """Shortest loop at the pole in the class ``gamma^l``.

    Among equal lengths (within ``1e-9`` relative) the oscillating candidate with
    the largest ``b`` is reported, and ``max_radius`` is the smallest radius over
    the tie set (0 when the waist ties); ``tied`` flags the situation.
    """
    if int(l) != l or l < 1:
        raise ValueError("l must be a positive integer")
    search = search or SearchParams()
    h, P = spec.h, spec.period
    target = l * P
    waist = l * P * h(0.0)
    if table is None:
        t_max = search.t_max if search.t_max is not None else radius_cap(spec, l)
        table = ClairautTable.build(RevolutionProfile(h, P), search.t_min, t_max, search.n_grid,
                                    rel_tol=search.quad_rel_tol, workers=search.workers)
    k_cap = search.k_cap_factor * l
    # (length, b, radius, k)
    found: list[tuple[float, float, float, int | None]] = [(waist, h(0.0), 0.0, None)]
    examined = 1

    cands = _candidates(table, target, l, k_cap, waist)
    if cands is not None:
        iv, ks, t_est, len_est, total = cands
        examined += total
        if iv.size:
            order = np.lexsort((t_est, len_est))
            best_est = len_est[order[0]]
            chosen = [j for n, j in enumerate(order)
                      if n < search.min_refine or len_est[j] <= best_est * (1 + search.refine_margin)]
            for j in chosen[: search.max_refine]:
                arc = _refine(table, int(iv[j]), int(ks[j]), target, search.root_rel_tol)
                if arc is None:
                    continue
                k = int(ks[j])
                if abs(k * arc.delta_phi - target) > 1e-6 * target:
                    continue
                found.append((k * arc.length, arc.b, arc.t_star, k))

    best = min(f[0] for f in found)
    ties = [f for f in found if f[0] <= best * (1 + TIE_RTOL)]
    osc = [f for f in ties if f[3] is not None]
    pick = max(osc, key=lambda f: f[1]) if osc else ties[0]
    return MinimalLoop(
        l=int(l),
        length=float(pick[0]),
        max_radius=float(min(f[2] for f in ties)),
        b=None if pick[3] is None else float(pick[1]),
        k=pick[3],
        candidates_examined=examined,
        tied=len(ties) > 1,
    )


def loop_table(spec: ManifoldSpec, ladder, search: SearchParams | None = None) -> list[MinimalLoop]:
    """One :class:`MinimalLoop` per winding number; failed rows carry ``error``."""
    ladder = [int(v) for v in ladder]
    if not ladder or any(b <= a for a, b in zip(ladder, ladder[1:])) or ladder[0] < 1:
        raise ValueError("ladder must be a strictly increasing list of positive integers")
    search = search or SearchParams()
    t_max = search.t_max if search.t_max is not None else max(radius_cap(spec, l) for l in ladder)
    table = ClairautTable.build(RevolutionProfile(spec.h, spec.period), search.t_min, t_max,
                                search.n_grid, rel_tol=search.quad_rel_tol, workers=search.workers)
    rows = []
    for l in ladder:
        try:
            rows.append(minimal_loop(spec, l, search, table=table))
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            rows.append(MinimalLoop(l=l, length=math.nan, max_radius=math.nan, error=str(exc)))
    return rows


def default_workers() -> int:
    env = os.environ.get("ESCAPE_LAB_THREADS")
    return max(1, int(env)) if env else 1
