"""Gaussian-process field map over mesh facet centers.

The scalar surface field is modeled as a Gaussian over the n facet-center
values: mean vector mu and covariance P. The prior covariance comes from a
Matern 3/2 kernel evaluated on geodesic distances; because graph geodesics do
not guarantee positive semi-definiteness, the gram matrix is repaired by
eigenvalue clipping before use. Updates are Kalman-form conditioning on noisy
point observations, which is exactly equivalent to GP regression on the
(repaired) prior; ``batch_posterior`` keeps the regression form around as an
independent verification path.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .mesh import GeodesicField, write_matrix_sidecar

SQRT3 = math.sqrt(3.0)


class FieldMapError(Exception):
    """Raised for invalid field-map inputs or failed linear solves."""


@dataclass(frozen=True)
class KernelParams:
    """Matern 3/2 hyperparameters.

    Attributes:
        sigma_f: signal standard deviation (field units).
        length_scale: geodesic correlation length, meters.
        jitter: diagonal variance added after PSD repair; defaults to
            1e-6 * sigma_f^2.
    """

    sigma_f: float
    length_scale: float
    jitter: float = None

    def __post_init__(self):
        if self.sigma_f <= 0:
            raise FieldMapError("sigma_f must be positive")
        if self.length_scale <= 0:
            raise FieldMapError("length_scale must be positive")
        if self.jitter is None:
            object.__setattr__(self, "jitter", 1e-6 * self.sigma_f**2)
        if self.jitter < 0:
            raise FieldMapError("jitter must be non-negative")


@dataclass(frozen=True)
class FieldMap:
    """Immutable posterior snapshot: mean vector and covariance matrix."""

    mean: np.ndarray  # (n,)
    cov: np.ndarray   # (n, n)
    mesh_ref: str = ""

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise FieldMapError("covariance shape does not match mean length")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class ObservationBatch:
    """Noisy point observations of facet values.

    ``facet_indices`` defines the 0/1 selection matrix H (one row per
    observation); ``noise_vars`` is the diagonal of R. An empty batch is
    permitted and fuses as a no-op.
    """

    facet_indices: np.ndarray
    values: np.ndarray
    noise_vars: np.ndarray

    def __post_init__(self):
        idx = np.atleast_1d(np.asarray(self.facet_indices, dtype=np.int64))
        y = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        r = np.atleast_1d(np.asarray(self.noise_vars, dtype=np.float64))
        if not (idx.shape == y.shape == r.shape):
            raise FieldMapError("facet_indices, values, noise_vars must have equal length")
        if idx.size and r.min() <= 0:
            raise FieldMapError("noise variances must be positive")
        for arr in (idx, y, r):
            arr.setflags(write=False)
        object.__setattr__(self, "facet_indices", idx)
        object.__setattr__(self, "values", y)
        object.__setattr__(self, "noise_vars", r)

    @property
    def m(self) -> int:
        return self.facet_indices.size


def matern32_geodesic(d, params: KernelParams):
    """Matern 3/2 covariance at geodesic distance d (scalar or array).

    k(d) = sigma_f^2 (1 + sqrt(3) d / l) exp(-sqrt(3) d / l)
    """
    s = SQRT3 * np.asarray(d, dtype=np.float64) / params.length_scale
    k = params.sigma_f**2 * (1.0 + s) * np.exp(-s)
    return float(k) if np.isscalar(d) else k


def init_map(geo: GeodesicField, params: KernelParams, prior_mean: float = 0.0,
             mesh_ref: str = "") -> FieldMap:
    """Build the prior map: constant mean, PSD-repaired kernel gram + jitter.

    Raises FieldMapError if the raw gram is too indefinite to repair
    (minimum eigenvalue below -0.01 * sigma_f^2).
    """
    gram = matern32_geodesic(geo.dist, params)
    cov = repair_psd(gram, params.sigma_f)
    cov = cov + params.jitter * np.eye(cov.shape[0])
    mean = np.full(cov.shape[0], float(prior_mean))
    return FieldMap(mean, cov, mesh_ref)


def repair_psd(gram: np.ndarray, sigma_f: float) -> np.ndarray:
    """Clip negative eigenvalues of a symmetric gram matrix to zero.

    Geodesic kernels on graph metrics are not guaranteed PSD; clipping is the
    standard fix. Raises FieldMapError only if the clipped reconstruction
    still carries a significantly negative eigenvalue (numerical failure).
    """
    sym = 0.5 * (gram + gram.T)
    if not np.all(np.isfinite(sym)):
        raise FieldMapError("kernel gram contains non-finite entries")
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals[0] >= 0:
        return sym
    repaired = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
    repaired = 0.5 * (repaired + repaired.T)
    residual = float(np.linalg.eigvalsh(repaired)[0])
    if not residual >= -0.01 * sigma_f**2:
        raise FieldMapError(
            f"PSD repair failed (min eigenvalue {residual:.3e} after clipping)"
        )
    return repaired


def fuse(fmap: FieldMap, obs: ObservationBatch) -> FieldMap:
    """Kalman-form sequential update; returns a new map.

    mu+ = mu- + P H^T (H P H^T + R)^-1 (y - H mu-)
    P+  = P-  - P H^T (H P H^T + R)^-1 H P-
    computed through a Cholesky factor of the innovation matrix so the
    covariance decrement is an exact Gram form (trace can never increase).
    """
    if obs.m == 0:
        return fmap
    idx = obs.facet_indices
    if idx.min() < 0 or idx.max() >= fmap.n:
        raise FieldMapError("observation facet index out of range")
    P = fmap.cov
    cross = P[:, idx]                                   # P- H^T, (n, m)
    innov = P[np.ix_(idx, idx)] + np.diag(obs.noise_vars)
    try:
        L = np.linalg.cholesky(innov)
    except np.linalg.LinAlgError as exc:
        raise FieldMapError("innovation matrix is not positive definite") from exc
    half = solve_triangular(L, cross.T, lower=True)     # L^-1 H P-, (m, n)
    white_resid = solve_triangular(L, obs.values - fmap.mean[idx], lower=True)
    mean = fmap.mean + half.T @ white_resid
    cov = P - half.T @ half
    cov = 0.5 * (cov + cov.T)
    return FieldMap(mean, cov, fmap.mesh_ref)


def fuse_covariance(fmap: FieldMap, facet_indices, noise_vars) -> FieldMap:
    """Covariance-only update (no measurement values needed).

    Used by planners to simulate uncertainty evolution for hypothetical
    measurements; the mean is carried through unchanged.
    """
    idx = np.atleast_1d(np.asarray(facet_indices, dtype=np.int64))
    if idx.size == 0:
        return fmap
    r = np.atleast_1d(np.asarray(noise_vars, dtype=np.float64))
    P = fmap.cov
    cross = P[:, idx]
    innov = P[np.ix_(idx, idx)] + np.diag(r)
    try:
        L = np.linalg.cholesky(innov)
    except np.linalg.LinAlgError as exc:
        raise FieldMapError("innovation matrix is not positive definite") from exc
    half = solve_triangular(L, cross.T, lower=True)
    cov = P - half.T @ half
    cov = 0.5 * (cov + cov.T)
    return FieldMap(fmap.mean, cov, fmap.mesh_ref)


def covariance_trace_drop(cov: np.ndarray, facet_indices, noise_vars) -> float:
    """Trace reduction a hypothetical observation batch would cause.

    Equals Tr(P-) - Tr(P+) without forming P+; always >= 0 because it is the
    squared Frobenius norm of the whitened cross-covariance.
    """
    idx = np.atleast_1d(np.asarray(facet_indices, dtype=np.int64))
    if idx.size == 0:
        return 0.0
    r = np.atleast_1d(np.asarray(noise_vars, dtype=np.float64))
    cross = cov[:, idx]
    innov = cov[np.ix_(idx, idx)] + np.diag(r)
    try:
        L = np.linalg.cholesky(innov)
    except np.linalg.LinAlgError as exc:
        raise FieldMapError("innovation matrix is not positive definite") from exc
    half = solve_triangular(L, cross.T, lower=True)
    return float(np.sum(half * half))


def batch_posterior(map0: FieldMap, obs: ObservationBatch, geo: GeodesicField = None,
                    params: KernelParams = None) -> FieldMap:
    """GP-regression oracle: one-shot posterior from an un-fused prior.

    Implements the regression equations with the measured facets as training
    locations and all facet centers as prediction locations, generalizing the
    scalar noise to a per-measurement diagonal. The effective kernel is the
    prior covariance of ``map0`` (i.e. the PSD-repaired gram plus jitter), so
    this matches iterated ``fuse`` on the same data. Kept as an independent
    verification path: explicit H matrices and an LU solve rather than the
    Cholesky/selection route used in ``fuse``.
    """
    if obs.m == 0:
        raise FieldMapError("batch_posterior requires at least one observation")
    n = map0.n
    if geo is not None and geo.n != n:
        raise FieldMapError("geodesic field size does not match map")
    idx = obs.facet_indices
    if idx.min() < 0 or idx.max() >= n:
        raise FieldMapError("observation facet index out of range")
    H = np.zeros((obs.m, n))
    H[np.arange(obs.m), idx] = 1.0
    K = map0.cov
    K_x = H @ K @ H.T
    K_sx = K @ H.T
    A = K_x + np.diag(obs.noise_vars)
    try:
        sol_mean = np.linalg.solve(A, obs.values - H @ map0.mean)
        sol_cov = np.linalg.solve(A, K_sx.T)
    except np.linalg.LinAlgError as exc:
        raise FieldMapError("regression system is singular") from exc
    mean = map0.mean + K_sx @ sol_mean
    cov = K - K_sx @ sol_cov
    cov = 0.5 * (cov + cov.T)
    return FieldMap(mean, cov, map0.mesh_ref)


def trace_cov(fmap: FieldMap) -> float:
    """Sum of posterior variances, Tr(P)."""
    return float(np.trace(fmap.cov))


def map_to_csv(fmap: FieldMap, path) -> None:
    """Write (facet_index, mean, variance) rows with a header."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("facet_index,mean,variance\n")
        var = np.diag(fmap.cov)
        for i in range(fmap.n):
            fh.write(f"{i},{fmap.mean[i]:.9g},{var[i]:.9g}\n")


def cov_to_sidecar(fmap: FieldMap, path) -> None:
    """Dump the full covariance in the binary matrix sidecar format."""
    write_matrix_sidecar(path, fmap.cov)
