"""surfipp: informative path planning for scalar-field inspection of 3D surfaces.

A Gaussian-process map over mesh facet centers (geodesic Matern 3/2 kernel,
Kalman-form fusion) drives a receding-horizon planner that maximizes
time-averaged information gain under flight-time and collision constraints,
with coverage and random baselines for benchmarking.
"""

from .field import (FieldMap, KernelParams, ObservationBatch, batch_posterior,
                    fuse, fuse_covariance, init_map, matern32_geodesic, trace_cov)
from .groundtruth import GroundTruthField, GroundTruthSpec, generate_field, rmse
from .mesh import (GeodesicField, MeshError, SurfaceMesh, compute_geodesics,
                   generate_cylinder_tank, generate_winged_prism, load_mesh)
from .planner import (LibraryParams, MissionLog, PlannerConfig, ViewpointLibrary,
                      build_library, greedy_search, info_gain, refine_cmaes,
                      run_mission)
from .scenario import Scenario, ScenarioConfig
from .sensor import (CameraModel, Viewpoint, build_yaw_library, noise_variance,
                     simulate_measurement, visible_facets)
from .trajectory import (DynamicsLimits, Trajectory, measurement_viewpoints,
                         plan_polynomial, segment_time)
from .world import WorldModel, build_world, collision_penalty

__version__ = "0.1.0"
