"""Synthetic scalar ground-truth fields over mesh facets.

Fields are an ambient level plus geodesic Gaussian bumps, so the truth
respects the surface's intrinsic geometry (a bump wraps around curvature
instead of leaking through the interior). Source facets can be fixed or
drawn per seed.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FieldSource:
    """One geodesic bump: center facet, amplitude, geodesic width (meters)."""

    facet: int
    amplitude: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("source width must be positive")


@dataclass(frozen=True)
class GroundTruthSpec:
    """Generator settings: ambient level plus fixed and/or random sources."""

    ambient: float = 0.0
    sources: tuple = ()
    random_sources: int = 0
    amplitude_range: tuple = (0.5, 1.5)
    width_range: tuple = (2.0, 5.0)


@dataclass(frozen=True)
class GroundTruthField:
    """Per-facet field values with the spec and seed that produced them."""

    values: np.ndarray
    spec: GroundTruthSpec = None
    seed: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size


def generate_field(mesh, geo, spec: GroundTruthSpec, seed: int = 0) -> GroundTruthField:
    """T(i) = ambient + sum_j A_j exp(-d_g(i, s_j)^2 / (2 w_j^2))."""
    n = mesh.n_facets
    sources = list(spec.sources)
    if spec.random_sources > 0:
        rng = np.random.default_rng(seed)
        for _ in range(spec.random_sources):
            sources.append(FieldSource(
                int(rng.integers(0, n)),
                float(rng.uniform(*spec.amplitude_range)),
                float(rng.uniform(*spec.width_range)),
            ))
    values = np.full(n, float(spec.ambient))
    for src in sources:
        if not 0 <= src.facet < n:
            raise ValueError(f"source facet {src.facet} out of range (n={n})")
        d = geo.dist[:, src.facet]
        values += src.amplitude * np.exp(-(d**2) / (2.0 * src.width**2))
    return GroundTruthField(values, spec, seed)


def rmse(fmap, truth: GroundTruthField) -> float:
    """Root mean squared error of the map mean against the truth."""
    if fmap.n != truth.n:
        raise ValueError(f"size mismatch: map n={fmap.n}, truth n={truth.n}")
    return float(np.sqrt(np.mean((fmap.mean - truth.values) ** 2)))


def field_to_csv(truth: GroundTruthField, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("facet_index,value\n")
        for i, v in enumerate(truth.values):
            fh.write(f"{i},{v:.9g}\n")


def field_from_csv(path) -> GroundTruthField:
    """Load an externally produced field (facet_index, value rows)."""
    idx, vals = [], []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline()
        if not header.startswith("facet_index"):
            raise ValueError(f"{path}: missing field CSV header")
        for line in fh:
            if not line.strip():
                continue
            a, b = line.split(",")
            idx.append(int(a))
            vals.append(float(b))
    values = np.empty(len(vals))
    values[np.asarray(idx)] = vals
    return GroundTruthField(values)
