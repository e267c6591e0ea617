"""Brute-force shortest paths on a grid graph over the cover of the slice."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .arcs import RevolutionProfile

__all__ = ["GridOracleResult", "Unreachable", "grid_oracle", "stencil"]


def stencil(radius: int) -> tuple[tuple[int, int], ...]:
    """Primitive lattice offsets with ``max(|di|, |dj|) <= radius``, one per undirected edge.

    ``radius=1`` is the 8-neighbor stencil, ``2`` has 16 neighbors, ``3`` has 32.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    out = []
    for di in range(0, radius + 1):
        for dj in range(-radius, radius + 1):
            if (di == 0 and dj <= 0) or math.gcd(di, dj) != 1:
                continue
            out.append((di, dj))
    return tuple(out)


class Unreachable(RuntimeError):
    """The target node was not reached; the grid is too narrow."""


@dataclass(frozen=True)
class GridOracleResult:
    length: float
    max_radius: float
    nt: int
    nphi: int
    t_extent: float


def grid_oracle(profile: RevolutionProfile, l: int, t_extent: float, nt: int = 2048,
                nphi: int = 2048, stencil_radius: int = 3) -> GridOracleResult:
    """Graph distance from ``(0, 0)`` to ``(0, l * period)`` on ``[-T, T] x [0, l * period]``.

    Nodes sit on an ``(nt + 1) x (nphi + 1)`` lattice (``nt`` is rounded up to even
    so ``t = 0`` is a node).  Edge weights use the metric at the segment midpoint.
    Graph paths are admissible curves, so the result approaches the true distance
    from above as the grid is refined.

    The 8-neighbor stencil (``stencil_radius=1``) only resolves directions at
    multiples of the cell diagonal; paths in between zigzag and pick up a length
    excess that refinement does not remove.  Wider stencils shrink that excess.
    """
    if nt < 64 or nphi < 64:
        raise ValueError("nt and nphi must be >= 64")
    if not t_extent > 0:
        raise ValueError("t_extent must be positive")
    if t_extent >= profile.t_max:
        raise ValueError(f"t_extent={t_extent} reaches the end of the profile domain")
    nt += nt % 2
    span = l * profile.period
    t = np.linspace(-t_extent, t_extent, nt + 1)
    dt = t[1] - t[0]
    dphi = span / nphi
    n_i, n_j = nt + 1, nphi + 1
    n_nodes = n_i * n_j
    offsets = stencil(stencil_radius)

    # forward edges in CSR layout: row-major nodes, fixed offset order within a row
    ii = np.arange(n_i, dtype=np.int32)[:, None]
    jj = np.arange(n_j, dtype=np.int32)[None, :]
    targets = np.empty((n_i, n_j, len(offsets)), dtype=np.int32)
    weights = np.empty((n_i, n_j, len(offsets)), dtype=np.float64)
    for e, (di, dj) in enumerate(offsets):
        ok = (ii + di < n_i) & (jj + dj >= 0) & (jj + dj < n_j)
        targets[:, :, e] = np.where(ok, (ii + di) * n_j + (jj + dj), -1)
        lo = np.minimum(ii[:, 0] + di, n_i - 1)
        hm = profile.h(np.abs(0.5 * (t + t[lo])))
        weights[:, :, e] = np.sqrt((di * dt) ** 2 + (hm * (dj * dphi)) ** 2)[:, None]
    valid = targets >= 0
    indptr = np.concatenate(([0], np.cumsum(valid.reshape(n_nodes, -1).sum(axis=1), dtype=np.int32)))
    indices = targets[valid]
    del targets
    data = weights[valid]
    del weights, valid
    graph = sparse.csr_matrix((data, indices, indptr), shape=(n_nodes, n_nodes))
    del data, indices

    i_mid = nt // 2
    source, target = i_mid * n_j, i_mid * n_j + nphi
    # the waist path bounds the answer, which lets Dijkstra stop early
    limit = float(profile.h(0.0)) * span * (1 + 1e-9)
    dist, pred = csgraph.dijkstra(graph, directed=False, indices=source,
                                  return_predecessors=True, limit=limit)
    d = float(dist[target])
    if not math.isfinite(d):
        raise Unreachable(f"target not reached within t_extent={t_extent}")
    radius = 0.0
    node = target
    while node != source and node >= 0:
        radius = max(radius, abs(t[node // n_j]))
        node = int(pred[node])
    return GridOracleResult(length=d, max_radius=float(radius), nt=nt, nphi=nphi,
                            t_extent=float(t_extent))
