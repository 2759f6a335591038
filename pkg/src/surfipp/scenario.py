"""Scenario configuration: YAML schema, validation, and asset assembly.

A scenario file describes the mesh source, kernel, camera, vehicle, world
grid, viewpoint library, planner settings, ground-truth generator and
experiment layout. ``ScenarioConfig.load`` validates the file;
``assemble`` builds the heavy shared assets (mesh, geodesics, distance
field, viewpoint library, prior map) once so repeated missions reuse them.
"""

import math
import os
from dataclasses import dataclass, replace

import numpy as np
import yaml

from . import baselines
from .field import FieldMap, KernelParams, init_map, trace_cov
from .groundtruth import FieldSource, GroundTruthSpec, generate_field
from .mesh import (generate_cylinder_tank, generate_winged_prism, geodesics_cached,
                   load_mesh)
from .planner import CmaSettings, LibraryParams, PlannerConfig, build_library
from .seeds import mix_seed
from .sensor import CameraModel, Viewpoint
from .trajectory import DynamicsLimits
from .world import build_world

PRIOR_KINDS = ("mgp", "identity", "random_spd")
COMPARE_METHODS = ("ipp", "coverage", "random")


class ConfigError(Exception):
    """Invalid or missing configuration; messages name the offending field."""


def _section(data, name, required=True):
    sec = data.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"{name}: section is required")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a mapping")
    return sec


def _build(section_name, factory, kwargs):
    try:
        return factory(**kwargs)
    except Exception as exc:  # component validators raise with field names
        raise ConfigError(f"{section_name}: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int = 10
    base_seed: int = 7
    grid_points: int = 61

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario settings, independent of any built assets."""

    name: str
    mesh_spec: dict
    kernel: KernelParams
    prior_mean: float
    prior_kind: str
    cam: CameraModel
    lim: DynamicsLimits
    world_voxel: float
    world_margin: float
    lib_params: LibraryParams
    planner_cfg: PlannerConfig
    meas_freq: float
    truth_spec: GroundTruthSpec
    start_position: tuple
    start_yaw: float
    experiment: ExperimentConfig
    output_dir: str
    cache_dir: str = None

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        return cls.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_dict(cls, data, base_dir=".") -> "ScenarioConfig":
        mesh_spec = dict(_section(data, "mesh"))
        kind = mesh_spec.get("kind")
        if kind not in ("cylinder", "winged", "file"):
            raise ConfigError(f"mesh.kind: expected cylinder|winged|file, got {kind!r}")
        if kind == "file":
            p = mesh_spec.get("path")
            if not p:
                raise ConfigError("mesh.path: required for mesh.kind=file")
            mesh_spec["path"] = os.path.join(base_dir, p) if not os.path.isabs(p) else p

        kernel = _build("kernel", KernelParams, _section(data, "kernel"))

        prior = _section(data, "prior", required=False)
        prior_kind = prior.get("covariance", "mgp")
        if prior_kind not in PRIOR_KINDS:
            raise ConfigError(f"prior.covariance: expected one of {PRIOR_KINDS}")

        cam = _build("camera", CameraModel, _section(data, "camera"))

        dyn = dict(_section(data, "dynamics"))
        if "yaw_rate_max_deg" in dyn:
            dyn["yaw_rate_max"] = math.radians(dyn.pop("yaw_rate_max_deg"))
        lim = _build("dynamics", DynamicsLimits, dyn)

        wrld = _section(data, "world", required=False)
        voxel = float(wrld.get("voxel", 0.5))
        margin = wrld.get("margin")
        margin = float(margin) if margin is not None else cam.d_max + 2.0
        if voxel <= 0:
            raise ConfigError("world.voxel: must be positive")
        if margin < cam.d_max:
            raise ConfigError("world.margin: must cover the camera range d_max")

        lib_params = _build("library", LibraryParams, _section(data, "library"))

        plan = dict(_section(data, "planner"))
        meas_freq = float(plan.pop("measurement_hz", 0.2))
        if meas_freq <= 0:
            raise ConfigError("planner.measurement_hz: must be positive")
        cma = _build("planner.cma", CmaSettings, plan.pop("cma", {}))
        plan.setdefault("los_clearance", lim.uav_radius)
        planner_cfg = _build("planner", PlannerConfig, {**plan, "cma": cma})

        gt = dict(_section(data, "ground_truth", required=False))
        sources = tuple(FieldSource(int(f), float(a), float(w))
                        for f, a, w in gt.pop("sources", ()))
        for key in ("amplitude_range", "width_range"):
            if key in gt:
                gt[key] = tuple(float(v) for v in gt[key])
        truth_spec = _build("ground_truth", GroundTruthSpec, {**gt, "sources": sources})

        start = _section(data, "start")
        pos = start.get("position")
        if pos is None or len(pos) != 3:
            raise ConfigError("start.position: expected [x, y, z]")
        yaw = math.radians(float(start.get("yaw_deg", 0.0)))

        experiment = _build("experiment", ExperimentConfig,
                            _section(data, "experiment", required=False))

        out_dir = data.get("output_dir", "results")
        cache_dir = data.get("cache_dir")
        return cls(
            name=str(data.get("name", "scenario")),
            mesh_spec=mesh_spec,
            kernel=kernel,
            prior_mean=float(prior.get("mean", 0.0)),
            prior_kind=prior_kind,
            cam=cam,
            lim=lim,
            world_voxel=voxel,
            world_margin=margin,
            lib_params=lib_params,
            planner_cfg=planner_cfg,
            meas_freq=meas_freq,
            truth_spec=truth_spec,
            start_position=tuple(float(v) for v in pos),
            start_yaw=yaw,
            experiment=experiment,
            output_dir=out_dir,
            cache_dir=cache_dir,
        )

    def assemble(self) -> "Scenario":
        return assemble_scenario(self)


@dataclass(frozen=True)
class Scenario:
    """Built assets shared by every mission of a scenario."""

    config: ScenarioConfig
    mesh: object
    geo: object
    world: object
    cam: CameraModel
    lim: DynamicsLimits
    lib: object
    planner_cfg: PlannerConfig
    meas_freq: float
    prior_map: FieldMap
    start: Viewpoint
    truth: object = None

    def with_truth(self, truth) -> "Scenario":
        return replace(self, truth=truth)

    def with_prior(self, prior_map: FieldMap) -> "Scenario":
        return replace(self, prior_map=prior_map)

    def truth_for_trial(self, base_seed: int, trial: int):
        """Paired ground truth: depends on the trial, never on the method."""
        seed = mix_seed(base_seed, "truth", trial)
        return generate_field(self.mesh, self.geo, self.config.truth_spec, seed)


def build_mesh_from_spec(spec: dict):
    kind = spec["kind"]
    if kind == "cylinder":
        return generate_cylinder_tank(
            float(spec.get("radius", 6.0)), float(spec.get("height", 20.0)),
            float(spec.get("dome_height", 1.2)), int(spec.get("target_facets", 400)))
    if kind == "winged":
        return generate_winged_prism(
            float(spec.get("radius", 3.0)), float(spec.get("length", 24.0)),
            float(spec.get("wing_span", 6.0)), float(spec.get("wing_chord", 6.0)),
            float(spec.get("wing_thickness", 1.0)), int(spec.get("target_facets", 800)))
    return load_mesh(spec["path"])


def assemble_scenario(cfg: ScenarioConfig) -> Scenario:
    mesh = build_mesh_from_spec(cfg.mesh_spec)
    geo = geodesics_cached(mesh, cfg.cache_dir)
    world = build_world(mesh, cfg.world_voxel, cfg.world_margin)
    lib = build_library(mesh, cfg.cam, world, cfg.lib_params, cfg.lim.uav_radius)

    planner_cfg = cfg.planner_cfg
    if planner_cfg.cma.sigma0 is None:
        planner_cfg = replace(planner_cfg,
                              cma=replace(planner_cfg.cma, sigma0=0.25 * lib.spacing))

    prior = init_map(geo, cfg.kernel, cfg.prior_mean, mesh.content_hash()[:16])
    if cfg.prior_kind != "mgp":
        alt = baselines.alt_covariance(cfg.prior_kind, prior.n, trace_cov(prior),
                                       seed=mix_seed(cfg.experiment.base_seed, "prior"))
        prior = FieldMap(prior.mean, alt, prior.mesh_ref)

    start = Viewpoint(np.array(cfg.start_position), cfg.start_yaw)
    return Scenario(cfg, mesh, geo, world, cfg.cam, cfg.lim, lib, planner_cfg,
                    cfg.meas_freq, prior, start)
