"""Receding-horizon informative path planner and mission loop.

Each planning round runs two stages: a sequential greedy search over a
precomputed viewpoint library (maximizing trace-reduction per travel second,
line-of-sight constrained), then a CMA-ES refinement of the waypoint
positions against the continuous objective

    U = I(measurements along trajectory) / TIME(trajectory) + collision penalty,

where the information gain I is the map-covariance trace drop from
hypothetical measurements (no measured values needed). The mission loop
executes the planned trajectory, fuses simulated measurements at the sensor
cadence, and replans until the flight-time budget is exhausted.
"""

import logging
import math
import time
from dataclasses import dataclass, field as dc_field

import numpy as np
from . import baselines, cmaes
from .field import FieldMap, covariance_trace_drop, fuse, fuse_covariance, trace_cov
from .groundtruth import rmse
from .seeds import mix_seed
from .sensor import (Viewpoint, YawLibrary, build_yaw_library, noise_variance,
                     simulate_measurement, visible_facets)
from .trajectory import measurement_viewpoints, plan_polynomial, segment_time
from .world import collision_penalty

log = logging.getLogger(__name__)


class PlannerError(Exception):
    pass


@dataclass(frozen=True)
class LibraryParams:
    """Viewpoint-library generation settings.

    ``ring`` mode lays an angular/vertical lattice on a cylinder-like offset
    shell; ``shell`` mode rejection-samples the distance-field level set
    (suits general meshes) and spreads the result by farthest-point picking.
    """

    mode: str = "ring"
    d_view: float = 4.0
    rings: int = 12
    levels: int = 5
    z_min: float = None
    z_max: float = None
    shell_count: int = 120
    shell_tol: float = 0.5
    seed: int = 0
    yaw_bins: int = 16

    def __post_init__(self):
        if self.mode not in ("ring", "shell"):
            raise PlannerError(f"unknown library mode {self.mode!r}")
        if self.d_view <= 0:
            raise PlannerError("d_view must be positive")


@dataclass(frozen=True)
class ViewpointLibrary:
    """Candidate camera poses with cached per-viewpoint visibility."""

    viewpoints: tuple
    visible_sets: tuple    # facet-index arrays aligned with viewpoints
    ranges: tuple          # camera-to-facet distances aligned with visible_sets
    yaw_library: object
    spacing: float

    def __len__(self):
        return len(self.viewpoints)


@dataclass(frozen=True)
class CmaSettings:
    iterations: int = 50
    popsize: int = None
    sigma0: float = None
    seed: int = 0

    def __post_init__(self):
        if self.popsize is not None and self.popsize < 4:
            raise PlannerError("CMA population must be >= 4")


@dataclass(frozen=True)
class PlannerConfig:
    """Per-horizon planning settings and the global flight-time budget."""

    horizon_waypoints: int = 4
    poly_order: int = 12
    w_coll: float = 100.0
    budget: float = 120.0
    los_clearance: float = 0.6
    duration_safety: float = 1.1
    cma: CmaSettings = dc_field(default_factory=CmaSettings)

    def __post_init__(self):
        if self.horizon_waypoints < 2:
            raise PlannerError("need at least 2 waypoints per horizon")
        if self.budget <= 0:
            raise PlannerError("budget must be positive")


@dataclass(frozen=True)
class MissionEvent:
    time: float
    viewpoint: Viewpoint
    trace: float
    rmse: float


@dataclass(frozen=True)
class MissionLog:
    """Time-stamped fusion events plus the executed path and diagnostics."""

    planner_kind: str
    seed: int
    events: tuple
    path: np.ndarray          # rows (t, x, y, z, yaw) of the executed path
    planner_seconds: tuple    # wall time of each planning round
    final_map: FieldMap

    @property
    def times(self):
        return np.array([e.time for e in self.events])

    @property
    def traces(self):
        return np.array([e.trace for e in self.events])

    @property
    def rmses(self):
        return np.array([e.rmse for e in self.events])

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("t,trace,rmse\n")
            for e in self.events:
                fh.write(f"{e.time:.9g},{e.trace:.9g},{e.rmse:.9g}\n")

    def path_to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("t,x,y,z,yaw\n")
            for row in self.path:
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# Viewpoint library
# ---------------------------------------------------------------------------

def build_library(mesh, cam, world, params: LibraryParams,
                  uav_radius: float = 0.0) -> ViewpointLibrary:
    """Generate, yaw-optimize and visibility-filter the candidate poses."""
    if params.mode == "ring":
        positions = _ring_positions(mesh, params)
    else:
        positions = _shell_positions(world, params)
    if uav_radius > 0:
        clear = world.distance_many(positions) >= uav_radius
        positions = positions[clear]
    if len(positions) == 0:
        raise PlannerError("viewpoint library is empty after clearance filtering")

    yaw_lib = build_yaw_library(positions, cam, mesh, world, params.yaw_bins)
    viewpoints, visible_sets, ranges = [], [], []
    for pos, yaw in zip(yaw_lib.positions, yaw_lib.yaws):
        vp = Viewpoint(pos, yaw)
        idx = visible_facets(vp, cam, mesh, world)
        if idx.size == 0:
            continue
        viewpoints.append(vp)
        visible_sets.append(idx)
        ranges.append(np.linalg.norm(mesh.facet_centers[idx] - pos, axis=1))
    if not viewpoints:
        raise PlannerError("viewpoint library is empty: no pose sees any facet")

    pts = np.array([vp.position for vp in viewpoints])
    if len(pts) > 1:
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        spacing = float(np.median(np.sqrt(d2.min(axis=1))))
    else:
        spacing = params.d_view
    return ViewpointLibrary(tuple(viewpoints), tuple(visible_sets), tuple(ranges),
                            yaw_lib, spacing)


def _ring_positions(mesh, params: LibraryParams) -> np.ndarray:
    lo, hi = mesh.bounding_box
    centroid = mesh.vertices.mean(axis=0)
    radial = np.linalg.norm(mesh.vertices[:, :2] - centroid[:2], axis=1).max()
    ring_r = radial + params.d_view
    z_lo = params.z_min if params.z_min is not None else lo[2] + 0.1 * (hi[2] - lo[2])
    z_hi = params.z_max if params.z_max is not None else hi[2] - 0.1 * (hi[2] - lo[2])
    angles = np.arange(params.rings) * (2.0 * math.pi / params.rings)
    levels = np.linspace(z_lo, z_hi, params.levels)
    out = [(centroid[0] + ring_r * math.cos(a), centroid[1] + ring_r * math.sin(a), z)
           for z in levels for a in angles]
    return np.array(out)


def _shell_positions(world, params: LibraryParams) -> np.ndarray:
    rng = np.random.default_rng(params.seed)
    lo = world.origin
    hi = world.upper_corner
    accepted = []
    target = params.shell_count
    for _ in range(200):
        pts = lo + rng.random((4096, 3)) * (hi - lo)
        d = world.distance_many(pts)
        good = np.abs(d - params.d_view) <= params.shell_tol
        accepted.extend(pts[good])
        if len(accepted) >= 40 * target:
            break
    if not accepted:
        raise PlannerError("shell sampling found no positions at the requested offset")
    accepted = np.array(accepted)
    if len(accepted) <= target:
        return accepted
    # farthest-point spread, seeded at the first accepted sample
    chosen = [0]
    d2 = np.sum((accepted - accepted[0]) ** 2, axis=1)
    for _ in range(target - 1):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((accepted - accepted[nxt]) ** 2, axis=1))
    return accepted[chosen]


# ---------------------------------------------------------------------------
# Information gain and the greedy stage
# ---------------------------------------------------------------------------

def _stack_observations(vps, cam, mesh, world):
    idx_all, var_all = [], []
    for vp in vps:
        idx = visible_facets(vp, cam, mesh, world)
        if idx.size == 0:
            continue
        d = np.linalg.norm(mesh.facet_centers[idx] - vp.position, axis=1)
        idx_all.append(idx)
        var_all.append(noise_variance(d, cam))
    if not idx_all:
        return np.empty(0, dtype=np.int64), np.empty(0)
    return np.concatenate(idx_all), np.concatenate(var_all)


def info_gain(fmap: FieldMap, vps, cam, mesh, world=None) -> float:
    """Covariance-trace reduction from hypothetical measurements at ``vps``.

    Fusing the viewpoints jointly equals fusing them in sequence (Gaussian
    conditioning is order-consistent), so the stacked form is used.
    """
    idx, noise = _stack_observations(vps, cam, mesh, world)
    return covariance_trace_drop(fmap.cov, idx, noise)


def greedy_search(fmap: FieldMap, start: Viewpoint, lib: ViewpointLibrary, n_waypoints,
                  cam, mesh, world, lim, los_clearance: float = None):
    """Sequential greedy pick of the most time-efficient next viewpoints.

    Each round selects the library viewpoint maximizing trace-drop per travel
    second, subject to line of sight from the previous pose; the hypothetical
    covariance update is applied before the next round. Returns
    ``[start, pick_1, ..., pick_n]`` (fewer picks if no feasible candidate
    remains; this logs a warning).
    """
    if len(lib) == 0:
        raise PlannerError("viewpoint library is empty")
    clearance = lim.uav_radius if los_clearance is None else los_clearance
    noise_cache = [noise_variance(r, cam) for r in lib.ranges]
    hypo = fmap
    chosen = [start]
    prev = start
    for _ in range(n_waypoints):
        best_eff, best_j = None, None
        for j, vp in enumerate(lib.viewpoints):
            t = segment_time(prev, vp, lim)
            if t <= 0:
                continue
            if not world.line_of_sight(prev.position, vp.position, clearance):
                continue
            gain = covariance_trace_drop(hypo.cov, lib.visible_sets[j], noise_cache[j])
            eff = gain / t
            if best_eff is None or eff > best_eff:
                best_eff, best_j = eff, j
        if best_j is None:
            log.warning("greedy search: no line-of-sight-feasible candidate; "
                        "returning %d of %d waypoints", len(chosen) - 1, n_waypoints)
            break
        vp = lib.viewpoints[best_j]
        hypo = fuse_covariance(hypo, lib.visible_sets[best_j], noise_cache[best_j])
        chosen.append(vp)
        prev = vp
    return chosen


# ---------------------------------------------------------------------------
# Continuous refinement
# ---------------------------------------------------------------------------

def _horizon_utility(positions, start, fmap, cfg, cam, mesh, world, lim, yaw_lib,
                     meas_freq, meas_offset):
    wps = [start]
    for pos in positions.reshape(-1, 3):
        wps.append(Viewpoint(pos, yaw_lib.nearest_yaw(pos)))
    traj = plan_polynomial(wps, lim, cfg.poly_order, cfg.duration_safety)
    samples = measurement_viewpoints(traj, meas_freq, meas_offset)
    idx, noise = _stack_observations([vp for _, vp in samples], cam, mesh, world)
    u_info = covariance_trace_drop(fmap.cov, idx, noise) / traj.total_time
    u_coll = collision_penalty(world, traj, lim.uav_radius, cfg.w_coll)
    return u_info + u_coll, wps


def refine_cmaes(waypoints, fmap: FieldMap, cfg: PlannerConfig, cam, mesh, world, lim,
                 yaw_lib=None, meas_freq: float = 0.2, meas_offset: float = 0.0,
                 seed: int = None):
    """CMA-ES refinement of waypoint positions against the final objective.

    The first waypoint (current pose) stays fixed; yaws come from the
    precomputed library. Returns the refined list, never worse than the
    input under the objective (the start point is always evaluated).
    """
    if len(waypoints) < 2:
        raise PlannerError("refinement needs at least two waypoints")
    if yaw_lib is None:
        yaw_lib = YawLibrary(np.array([vp.position for vp in waypoints[1:]]),
                             np.array([vp.yaw for vp in waypoints[1:]]))
    start = waypoints[0]
    x0 = np.concatenate([vp.position for vp in waypoints[1:]])

    def objective(x):
        utility, _ = _horizon_utility(x, start, fmap, cfg, cam, mesh, world, lim,
                                      yaw_lib, meas_freq, meas_offset)
        return -utility

    sigma0 = cfg.cma.sigma0 if cfg.cma.sigma0 is not None else 0.25 * max(world.voxel, 1.0)
    lo = np.tile(world.origin, len(waypoints) - 1)
    hi = np.tile(world.upper_corner, len(waypoints) - 1)
    result = cmaes.minimize(objective, x0, sigma0,
                            popsize=cfg.cma.popsize,
                            max_iter=cfg.cma.iterations,
                            seed=cfg.cma.seed if seed is None else seed,
                            bounds=(lo, hi))
    _, refined = _horizon_utility(result.x, start, fmap, cfg, cam, mesh, world, lim,
                                  yaw_lib, meas_freq, meas_offset)
    log.debug("cma refine: utility %.6g after %d evals", -result.fval, result.evaluations)
    return refined


# ---------------------------------------------------------------------------
# Mission loop
# ---------------------------------------------------------------------------

def _plan_horizon(kind, scenario, fmap, pose, mission_seed, horizon, state):
    cfg = scenario.planner_cfg
    if kind == "ipp":
        base = greedy_search(fmap, pose, scenario.lib, cfg.horizon_waypoints,
                             scenario.cam, scenario.mesh, scenario.world, scenario.lim,
                             cfg.los_clearance)
        if len(base) < 2:
            return None
        offset = state["next_meas"] - state["elapsed"]
        return refine_cmaes(base, fmap, cfg, scenario.cam, scenario.mesh, scenario.world,
                            scenario.lim, scenario.lib.yaw_library, scenario.meas_freq,
                            offset, seed=mix_seed(mission_seed, "cma", horizon))
    if kind == "coverage":
        queue = state["queue"]
        if not queue:
            return None
        chunk = []
        while queue and len(chunk) < cfg.horizon_waypoints:
            chunk.append(queue.pop(0))
        route = baselines.library_route(scenario.lib, scenario.world, cfg.los_clearance,
                                        scenario.lim, pose, chunk[0])
        return [pose] + route[:-1] + chunk
    if kind == "random":
        picks = baselines.plan_random(
            scenario.lib, cfg.horizon_waypoints,
            mix_seed(mission_seed, "random", horizon),
            start=pose, world=scenario.world, clearance=cfg.los_clearance)
        if not picks:
            return None
        return [pose] + picks
    raise PlannerError(f"unknown planner kind {kind!r}")


def run_mission(scenario, planner_kind: str, seed: int) -> MissionLog:
    """Closed-loop mission: plan, execute, measure, fuse, repeat until budget.

    Deterministic in (scenario, planner_kind, seed). Only whole trajectory
    segments are executed; a segment that would overrun the budget ends the
    mission, and no measurement is taken after the budget.
    """
    cfg = scenario.planner_cfg
    budget = cfg.budget
    fmap = scenario.prior_map
    truth = scenario.truth
    pose = scenario.start
    period = 1.0 / scenario.meas_freq

    events = [MissionEvent(0.0, pose, trace_cov(fmap), rmse(fmap, truth))]
    path_rows = [(0.0, *pose.position, pose.yaw)]
    planner_seconds = []
    state = {"elapsed": 0.0, "next_meas": period, "meas_idx": 0}
    if planner_kind == "coverage":
        plan = baselines.plan_coverage(scenario.lib, scenario.mesh, scenario.cam,
                                       scenario.world, clearance=cfg.los_clearance,
                                       lim=scenario.lim)
        state["queue"] = list(plan.ordered_viewpoints)

    horizon = 0
    while state["elapsed"] < budget - 1e-9:
        t0 = time.perf_counter()
        waypoints = _plan_horizon(planner_kind, scenario, fmap, pose, seed, horizon, state)
        planner_seconds.append(time.perf_counter() - t0)
        if waypoints is None or len(waypoints) < 2:
            break
        traj = plan_polynomial(waypoints, scenario.lim, cfg.poly_order, cfg.duration_safety)

        seg_ends = traj.segment_start_times[1:]
        n_exec = int(np.sum(seg_ends <= budget - state["elapsed"] + 1e-9))
        if n_exec == 0:
            break
        exec_t = float(seg_ends[n_exec - 1])

        while state["next_meas"] <= state["elapsed"] + exec_t + 1e-9:
            local_t = state["next_meas"] - state["elapsed"]
            vp = traj.viewpoint_at(local_t)
            batch = simulate_measurement(vp, truth, scenario.cam, scenario.mesh,
                                         scenario.world,
                                         mix_seed(seed, "meas", state["meas_idx"]))
            state["meas_idx"] += 1
            if batch is not None:
                fmap = fuse(fmap, batch)
                events.append(MissionEvent(state["next_meas"], vp,
                                           trace_cov(fmap), rmse(fmap, truth)))
            state["next_meas"] += period

        sample_dt = 0.25
        for t_local in np.arange(sample_dt, exec_t + 1e-9, sample_dt):
            p = traj.position_at(t_local)
            path_rows.append((state["elapsed"] + t_local, p[0], p[1], p[2],
                              traj.yaw_at(t_local)))
        state["elapsed"] += exec_t
        pose = waypoints[n_exec]
        log.info("%s horizon %d: executed %d/%d segments, t=%.1f s, trace=%.4g",
                 planner_kind, horizon, n_exec, len(traj.segments),
                 state["elapsed"], trace_cov(fmap))
        if n_exec < len(traj.segments):
            break
        horizon += 1

    path = np.array(path_rows)
    path.setflags(write=False)
    return MissionLog(planner_kind, seed, tuple(events), path,
                      tuple(planner_seconds), fmap)
