"""Baseline planners and alternative prior covariances for ablations.

The coverage baseline picks a near-minimal viewpoint subset by greedy set
cover and sweeps it level by level in alternating angular direction; the
random baseline draws viewpoints uniformly. Alternative covariance
initializations (identity, random SPD) are trace-matched stand-ins for the
kernel prior, isolating the effect of modeled spatial correlation.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .trajectory import segment_time

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoveragePlan:
    """Ordered sweep over a covering viewpoint subset (detours included)."""

    selected_indices: tuple
    ordered_viewpoints: tuple
    covered_sets: tuple
    observable_facets: np.ndarray

    @property
    def coverage_union(self) -> np.ndarray:
        if not self.covered_sets:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(self.covered_sets))


def library_route(lib, world, clearance, lim, a, b):
    """Route a -> b (excluding a) through library viewpoints when needed.

    Direct flight when line of sight holds; otherwise the time-shortest path
    in the sight graph over the offset-shell viewpoints. Falls back to direct
    flight with a warning when no route exists.
    """
    if world is None or world.line_of_sight(a.position, b.position, clearance):
        return [b]
    nodes = list(lib.viewpoints) + [a, b]
    n = len(nodes)
    rows, cols, weights = [], [], []
    for i in range(n):
        for j in range(i + 1, n):
            if world.line_of_sight(nodes[i].position, nodes[j].position, clearance):
                w = max(segment_time(nodes[i], nodes[j], lim), 1e-9)
                rows.extend((i, j))
                cols.extend((j, i))
                weights.extend((w, w))
    graph = csr_matrix((weights, (rows, cols)), shape=(n, n))
    dist, pred = dijkstra(graph, indices=n - 2, return_predecessors=True)
    if not np.isfinite(dist[n - 1]):
        log.warning("no collision-free route in the sight graph; flying direct")
        return [b]
    route = []
    k = n - 1
    while k != n - 2 and k >= 0:
        route.append(nodes[k])
        k = pred[k]
    return route[::-1]


def plan_coverage(lib, mesh, cam=None, world=None, clearance: float = 0.0,
                  lim=None) -> CoveragePlan:
    """Greedy set cover plus a height-level sweep ordering.

    Facets never visible from the library are warned about and skipped (the
    plan covers the maximum achievable). Consecutive sweep viewpoints without
    line of sight get a detour through the offset shell.
    """
    observable = (np.unique(np.concatenate(lib.visible_sets))
                  if lib.visible_sets else np.empty(0, dtype=np.int64))
    if mesh is not None and observable.size < mesh.n_facets:
        log.warning("coverage: %d of %d facets are not observable from the library",
                    mesh.n_facets - observable.size, mesh.n_facets)

    uncovered = set(observable.tolist())
    selected = []
    sets = [set(s.tolist()) for s in lib.visible_sets]
    while uncovered:
        best_j, best_new = None, 0
        for j, s in enumerate(sets):
            new = len(s & uncovered)
            if new > best_new:
                best_new, best_j = new, j
        if best_j is None:
            break
        selected.append(best_j)
        uncovered -= sets[best_j]

    centroid = (mesh.vertices.mean(axis=0) if mesh is not None
                else np.mean([lib.viewpoints[j].position for j in selected], axis=0))

    def level_of(j):
        return round(float(lib.viewpoints[j].position[2]), 6)

    def azimuth(j):
        p = lib.viewpoints[j].position
        return math.atan2(p[1] - centroid[1], p[0] - centroid[0])

    levels = sorted({level_of(j) for j in selected})
    ordered_idx = []
    for li, z in enumerate(levels):
        members = sorted((j for j in selected if level_of(j) == z),
                         key=lambda j: (azimuth(j), j), reverse=bool(li % 2))
        ordered_idx.extend(members)

    ordered = []
    for j in ordered_idx:
        vp = lib.viewpoints[j]
        if ordered and world is not None:
            ordered.extend(library_route(lib, world, clearance, lim, ordered[-1], vp))
        else:
            ordered.append(vp)

    return CoveragePlan(tuple(selected), tuple(ordered),
                        tuple(lib.visible_sets[j] for j in selected), observable)


def plan_random(lib, n_waypoints: int, seed: int, start=None, world=None,
                clearance: float = 0.0, max_attempts: int = 100):
    """Uniform draws from the library, chained with line-of-sight checks.

    Draws are without replacement (with replacement when the library is
    smaller than the request). Each slot retries up to ``max_attempts``
    before giving up with a partial result.
    """
    if n_waypoints < 1:
        raise ValueError("n_waypoints must be >= 1")
    rng = np.random.default_rng(seed)
    replace = len(lib) < n_waypoints
    pool = list(range(len(lib)))
    picks = []
    prev = start
    for _ in range(n_waypoints):
        chosen = None
        for _ in range(max_attempts):
            j = pool[int(rng.integers(0, len(pool)))] if not replace \
                else int(rng.integers(0, len(lib)))
            vp = lib.viewpoints[j]
            if prev is not None and world is not None and \
                    not world.line_of_sight(prev.position, vp.position, clearance):
                continue
            chosen = j
            break
        if chosen is None:
            log.warning("random planner: resampling exhausted after %d waypoints",
                        len(picks))
            break
        if not replace:
            pool.remove(chosen)
        picks.append(lib.viewpoints[chosen])
        prev = picks[-1]
        if not replace and not pool:
            break
    return picks


def alt_covariance(kind: str, n: int, target_trace: float, seed: int = 0) -> np.ndarray:
    """Trace-matched alternative prior covariance: identity or random SPD."""
    if target_trace <= 0:
        raise ValueError("target_trace must be positive")
    if kind == "identity":
        return (target_trace / n) * np.eye(n)
    if kind == "random_spd":
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((n, n))
        m = a.T @ a
        m *= target_trace / np.trace(m)
        return 0.5 * (m + m.T)
    raise ValueError(f"unknown covariance kind {kind!r}")
