"""Voxel distance field around the mesh, line-of-sight and collision checks.

The grid stores the exact unsigned distance from each grid node to the
nearest mesh triangle; queries interpolate trilinearly. Unsigned distance is
sufficient because the vehicle operates strictly outside the closed surface.
Points outside the grid are treated as free space (+inf) and flagged once in
the log.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class WorldError(Exception):
    pass


@dataclass(frozen=True)
class WorldModel:
    """Distance-field grid: nodes at origin + index * voxel along each axis."""

    origin: np.ndarray      # (3,)
    voxel: float
    dims: tuple             # node counts (nx, ny, nz)
    values: np.ndarray      # (nx, ny, nz) distances, meters
    margin: float
    _flags: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def upper_corner(self):
        return self.origin + (np.array(self.dims) - 1) * self.voxel

    def distance_many(self, points) -> np.ndarray:
        """Trilinear distance at each query point; +inf outside the grid."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        t = (pts - self.origin) / self.voxel
        dims = np.array(self.dims)
        inside = np.all((t >= 0) & (t <= dims - 1), axis=1)
        if not inside.all() and not self._flags.get("outside_warned"):
            self._flags["outside_warned"] = True
            log.warning("distance query outside the grid treated as free space")
        out = np.full(len(pts), np.inf)
        if not inside.any():
            return out
        tc = np.clip(t[inside], 0.0, dims - 1)
        i0 = np.minimum(tc.astype(np.int64), dims - 2)
        f = tc - i0
        v = self.values
        ix, iy, iz = i0[:, 0], i0[:, 1], i0[:, 2]
        fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
        c00 = v[ix, iy, iz] * (1 - fx) + v[ix + 1, iy, iz] * fx
        c10 = v[ix, iy + 1, iz] * (1 - fx) + v[ix + 1, iy + 1, iz] * fx
        c01 = v[ix, iy, iz + 1] * (1 - fx) + v[ix + 1, iy, iz + 1] * fx
        c11 = v[ix, iy + 1, iz + 1] * (1 - fx) + v[ix + 1, iy + 1, iz + 1] * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        out[inside] = c0 * (1 - fz) + c1 * fz
        return out

    def distance_at(self, p) -> float:
        """Distance at a single point (trilinear; +inf outside grid)."""
        return float(self.distance_many(np.asarray(p).reshape(1, 3))[0])

    def line_of_sight(self, a, b, clearance: float, step: float = None) -> bool:
        """True iff all samples along segment ab keep the given clearance.

        Samples are spaced at most ``step`` apart, endpoints included.
        """
        if step is None:
            step = 0.5 * min(self.voxel, clearance) if clearance > 0 else 0.5 * self.voxel
        if step <= 0:
            raise WorldError("step must be positive")
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        length = float(np.linalg.norm(b - a))
        k = max(2, int(math.ceil(length / step)) + 1) if length > 0 else 1
        pts = a + np.linspace(0.0, 1.0, k)[:, None] * (b - a)
        return bool(np.all(self.distance_many(pts) >= clearance))

    def slice_csv(self, path, z: float) -> None:
        """Debug dump: horizontal distance-field slice at height z as CSV."""
        with open(path, "w", encoding="ascii") as fh:
            fh.write("x,y,distance\n")
            nx, ny, _ = self.dims
            for i in range(nx):
                for j in range(ny):
                    p = self.origin + np.array([i * self.voxel, j * self.voxel, 0.0])
                    d = self.distance_at((p[0], p[1], z))
                    fh.write(f"{p[0]:.9g},{p[1]:.9g},{d:.9g}\n")


def points_to_mesh_distance(points, mesh, chunk: int = 16384) -> np.ndarray:
    """Exact unsigned distance from each point to the nearest mesh triangle.

    Brute force over triangles with a centroid-sphere lower bound to skip
    triangles that cannot improve the running minimum; the result is
    identical to the plain brute force.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    tri = mesh.vertices[mesh.facets]             # (T, 3, 3)
    centroids = tri.mean(axis=1)
    radii = np.linalg.norm(tri - centroids[:, None, :], axis=2).max(axis=1)
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        block = pts[s:s + chunk]
        best = np.full(len(block), np.inf)
        order = np.argsort(np.linalg.norm(centroids - block.mean(axis=0), axis=1))
        for t in order:
            lb = np.linalg.norm(block - centroids[t], axis=1) - radii[t]
            active = lb < best
            if not active.any():
                continue
            d = _point_triangle_distance(block[active], tri[t])
            best[active] = np.minimum(best[active], d)
        out[s:s + chunk] = best
    return out


def _point_triangle_distance(p, tri):
    """Distance from points (k, 3) to one triangle (3, 3); Ericson regions."""
    a, b, c = tri
    ab, ac = b - a, c - a
    ap = p - a
    d1 = ap @ ab
    d2 = ap @ ac
    bp = p - b
    d3 = bp @ ab
    d4 = bp @ ac
    cp = p - c
    d5 = cp @ ab
    d6 = cp @ ac

    closest = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def assign(mask, value):
        m = mask & ~done
        if m.any():
            closest[m] = value if value.ndim == 1 else value[m]
            done[m] = True

    assign((d1 <= 0) & (d2 <= 0), a)
    assign((d3 >= 0) & (d4 <= d3), b)
    vc = d1 * d4 - d3 * d2
    with np.errstate(invalid="ignore", divide="ignore"):
        t_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
    assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + t_ab[:, None] * ab)
    assign((d6 >= 0) & (d5 <= d6), c)
    vb = d5 * d2 - d1 * d6
    with np.errstate(invalid="ignore", divide="ignore"):
        t_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
    assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + t_ac[:, None] * ac)
    va = d3 * d6 - d5 * d4
    denom_bc = (d4 - d3) + (d5 - d6)
    with np.errstate(invalid="ignore", divide="ignore"):
        t_bc = np.where(denom_bc != 0, (d4 - d3) / denom_bc, 0.0)
    assign((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + t_bc[:, None] * (c - b))
    denom = va + vb + vc
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
    assign(np.ones(len(p), dtype=bool), a + v[:, None] * ab + w[:, None] * ac)
    return np.linalg.norm(p - closest, axis=1)


def build_world(mesh, voxel: float = 0.5, margin: float = 2.0,
                max_nodes: int = 20_000_000) -> WorldModel:
    """Distance-field grid covering the mesh bounding box inflated by margin."""
    if voxel <= 0:
        raise WorldError("voxel size must be positive")
    if margin < 0:
        raise WorldError("margin must be non-negative")
    lo, hi = mesh.bounding_box
    origin = lo - margin
    spans = (hi + margin) - origin
    dims = tuple(int(math.floor(s / voxel)) + 2 for s in spans)
    n_nodes = dims[0] * dims[1] * dims[2]
    if n_nodes > max_nodes:
        raise WorldError(
            f"grid of {n_nodes} nodes exceeds the cap ({max_nodes}); use a larger voxel"
        )
    axes = [origin[k] + voxel * np.arange(dims[k]) for k in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    values = points_to_mesh_distance(nodes, mesh).reshape(dims)
    values.setflags(write=False)
    origin = origin.copy()
    origin.setflags(write=False)
    return WorldModel(origin, float(voxel), dims, values, float(margin))


def collision_penalty(world: WorldModel, traj, r: float, w_coll: float,
                      step: float = None) -> float:
    """Non-positive penalty: -w_coll per path sample with clearance below r."""
    if step is None:
        step = 0.5 * min(world.voxel, r) if r > 0 else 0.5 * world.voxel
    if step <= 0:
        raise WorldError("step must be positive")
    pts = traj.sample_positions_by_arclength(step)
    violations = int(np.sum(world.distance_many(pts) < r))
    return -w_coll * violations
