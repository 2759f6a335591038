"""Camera sensor model: visibility, range-dependent noise, simulated readings.

A facet is visible from a viewpoint when its center (i) lies inside the
angular frustum, (ii) is within the valid range window, (iii) is hit at an
incidence angle below the limit, and (iv) when occlusion checking is enabled,
has line of sight to the camera through the distance field.
"""

import math
from dataclasses import dataclass

import numpy as np

from .field import ObservationBatch

_TAU = 2.0 * math.pi


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = (yaw + math.pi) % _TAU - math.pi
    return math.pi if r == -math.pi else r


@dataclass(frozen=True)
class CameraModel:
    """Fixed-mount camera with angular frustum and range-dependent noise.

    Angles are degrees; ``pitch`` > 0 tilts the optical axis below the
    horizon. Measurement noise variance grows with range as
    a * (1 - exp(-b d)).
    """

    fov_h: float
    fov_v: float
    d_min: float
    d_max: float
    alpha_max: float
    pitch: float = 0.0
    noise_a: float = 0.05
    noise_b: float = 0.2
    occlusion_check: bool = False

    def __post_init__(self):
        if not (0 < self.fov_h <= 180 and 0 < self.fov_v <= 180):
            raise ValueError("fov_h/fov_v must be in (0, 180] degrees")
        if not 0 < self.d_min < self.d_max:
            raise ValueError("need 0 < d_min < d_max")
        if not 0 < self.alpha_max < 90:
            raise ValueError("alpha_max must be in (0, 90) degrees")
        if self.noise_a <= 0 or self.noise_b <= 0:
            raise ValueError("noise parameters must be positive")


@dataclass(frozen=True)
class Viewpoint:
    """Camera pose: 3D position (meters) and yaw (radians, wrapped)."""

    position: np.ndarray
    yaw: float

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))


def camera_axes(vp: Viewpoint, cam: CameraModel):
    """Right-handed camera frame (forward, left, up) in world coordinates."""
    pitch = math.radians(cam.pitch)
    cy, sy = math.cos(vp.yaw), math.sin(vp.yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    fwd = np.array([cp * cy, cp * sy, -sp])
    left = np.array([-sy, cy, 0.0])
    up = np.array([sp * cy, sp * sy, cp])
    return fwd, left, up


def visibility_mask(vp: Viewpoint, cam: CameraModel, mesh, world=None) -> np.ndarray:
    """Boolean visibility per facet (vectorized conditions i-iv)."""
    rel = mesh.facet_centers - vp.position
    d = np.linalg.norm(rel, axis=1)
    mask = (d >= cam.d_min) & (d <= cam.d_max) & (d > 0)

    fwd, left, up = camera_axes(vp, cam)
    x = rel @ fwd
    y = rel @ left
    z = rel @ up
    az = np.degrees(np.arctan2(y, x))
    el = np.degrees(np.arctan2(z, np.hypot(x, y)))
    mask &= (np.abs(az) <= cam.fov_h / 2.0) & (np.abs(el) <= cam.fov_v / 2.0)

    with np.errstate(invalid="ignore"):
        cos_alpha = np.einsum("ij,ij->i", mesh.facet_normals, -rel) / np.where(d > 0, d, 1.0)
    mask &= cos_alpha >= math.cos(math.radians(cam.alpha_max))

    if cam.occlusion_check and world is not None and mask.any():
        mask[mask] = _line_of_sight_mask(world, vp.position, mesh.facet_centers[mask])
    return mask


def _line_of_sight_mask(world, cam_pos, targets):
    """Approximate per-target occlusion test through the distance field.

    Rays are sampled up to a backoff short of the target so the target's own
    surface does not register as an occluder; clearance and sampling follow
    the grid resolution.
    """
    clearance = 0.5 * world.voxel
    backoff = 3.0 * world.voxel
    step = 0.5 * world.voxel
    rel = targets - cam_pos
    dist = np.linalg.norm(rel, axis=1)
    ok = np.ones(len(targets), dtype=bool)
    pts, ray_ids = [], []
    for i in range(len(targets)):
        span = dist[i] - backoff
        if span <= 0:
            continue
        k = max(2, int(math.ceil(span / step)) + 1)
        s = np.linspace(0.0, span, k)
        pts.append(cam_pos + s[:, None] * (rel[i] / dist[i]))
        ray_ids.append(np.full(k, i))
    if not pts:
        return ok
    clear = world.distance_many(np.concatenate(pts)) >= clearance
    np.logical_and.at(ok, np.concatenate(ray_ids), clear)
    return ok


def visible_facets(vp: Viewpoint, cam: CameraModel, mesh, world=None) -> np.ndarray:
    """Indices of facets visible from ``vp`` (sorted ascending)."""
    return np.nonzero(visibility_mask(vp, cam, mesh, world))[0]


def noise_variance(d, cam: CameraModel):
    """Measurement noise variance at range d: a (1 - e^{-b d})."""
    v = cam.noise_a * (1.0 - np.exp(-cam.noise_b * np.asarray(d, dtype=np.float64)))
    return float(v) if np.isscalar(d) else v


def simulate_measurement(vp: Viewpoint, truth, cam: CameraModel, mesh, world=None,
                         rng_seed=0):
    """Noisy readings of the ground-truth field at the visible facets.

    Returns an ObservationBatch, or None when no facet is visible (the
    mission loop skips fusion in that case). Deterministic given rng_seed.
    """
    idx = visible_facets(vp, cam, mesh, world)
    if idx.size == 0:
        return None
    d = np.linalg.norm(mesh.facet_centers[idx] - vp.position, axis=1)
    variances = noise_variance(d, cam)
    rng = np.random.default_rng(rng_seed)
    values = truth.values[idx] + rng.standard_normal(idx.size) * np.sqrt(variances)
    return ObservationBatch(idx, values, variances)


@dataclass(frozen=True)
class YawLibrary:
    """Best yaw per precomputed position, with nearest-position lookup."""

    positions: np.ndarray  # (k, 3)
    yaws: np.ndarray       # (k,)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        yaws = np.asarray(self.yaws, dtype=np.float64).reshape(-1)
        pos.setflags(write=False)
        yaws.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "yaws", yaws)

    def nearest_yaw(self, position) -> float:
        """Yaw of the library position closest to ``position``."""
        rel = self.positions - np.asarray(position, dtype=np.float64)
        return float(self.yaws[int(np.argmin(np.einsum("ij,ij->i", rel, rel)))])


def build_yaw_library(positions, cam: CameraModel, mesh, world=None,
                      yaw_bins: int = 16) -> YawLibrary:
    """For each position, the yaw maximizing the visible-facet count.

    Candidates are ``yaw_bins`` uniformly spaced angles; ties resolve to the
    smallest candidate yaw, making the result deterministic.
    """
    if yaw_bins < 4:
        raise ValueError("yaw_bins must be >= 4")
    candidates = sorted(normalize_yaw(k * _TAU / yaw_bins) for k in range(yaw_bins))
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    best = np.empty(len(positions))
    for i, p in enumerate(positions):
        counts = [int(visibility_mask(Viewpoint(p, psi), cam, mesh, world).sum())
                  for psi in candidates]
        best[i] = candidates[int(np.argmax(counts))]
    return YawLibrary(positions, best)
