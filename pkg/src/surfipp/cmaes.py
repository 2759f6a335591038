"""Compact covariance-matrix-adaptation evolution strategy.

Standard (mu/mu_w, lambda) CMA-ES with cumulative step-size adaptation and
rank-1 + rank-mu covariance updates. Box constraints are handled by penalty:
candidates are evaluated at their clipped projection with a quadratic penalty
on the excursion, while distribution updates use the raw samples. Fully
deterministic for a fixed seed. Dimensions here are tiny (a few waypoint
coordinates), so the covariance is eigendecomposed every generation.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class CmaResult:
    x: np.ndarray
    fval: float
    iterations: int
    evaluations: int


def default_popsize(dim: int) -> int:
    return 4 + int(3 * math.log(dim))


def minimize(func, x0, sigma0, *, popsize=None, max_iter=100, seed=0,
             bounds=None, bound_penalty=1e6, sigma_stop=1e-12) -> CmaResult:
    """Minimize ``func`` starting from ``x0`` with initial step ``sigma0``.

    Args:
        func: callable on a 1-D array, returning a scalar.
        bounds: optional (lower, upper) arrays for box clipping.
        bound_penalty: weight of the squared out-of-box excursion.

    Returns the best feasible point ever evaluated (x0 is always evaluated,
    so the result is never worse than the start).
    """
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    n = x0.size
    lam = popsize or default_popsize(n)
    if lam < 4:
        raise ValueError("population size must be >= 4")
    mu = lam // 2
    w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mu_eff = 1.0 / np.sum(w**2)

    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n**2))

    if bounds is not None:
        lo = np.asarray(bounds[0], dtype=np.float64)
        hi = np.asarray(bounds[1], dtype=np.float64)

    def repair(x):
        return np.clip(x, lo, hi) if bounds is not None else x

    def evaluate(x):
        x_feas = repair(x)
        raw = float(func(x_feas))
        excess = float(np.sum((x - x_feas) ** 2))
        return raw + bound_penalty * excess, raw, x_feas

    rng = np.random.default_rng(seed)
    mean = x0.copy()
    sigma = float(sigma0)
    cov = np.eye(n)
    p_sigma = np.zeros(n)
    p_c = np.zeros(n)

    _, best_f, best_x = evaluate(x0)
    evaluations = 1

    it = 0
    for it in range(1, max_iter + 1):
        eigvals, eigvecs = np.linalg.eigh(cov)
        eigvals = np.maximum(eigvals, 1e-20)
        sqrt_d = np.sqrt(eigvals)
        inv_sqrt_c = (eigvecs / sqrt_d) @ eigvecs.T

        z = rng.standard_normal((lam, n))
        y = z @ (eigvecs * sqrt_d).T
        xs = mean + sigma * y
        scored = []
        for k in range(lam):
            f_pen, f_raw, x_feas = evaluate(xs[k])
            evaluations += 1
            if f_raw < best_f:
                best_f, best_x = f_raw, x_feas.copy()
            scored.append((f_pen, k))
        scored.sort(key=lambda t: (t[0], t[1]))
        sel = [k for _, k in scored[:mu]]

        y_w = w @ y[sel]
        mean = mean + sigma * y_w

        p_sigma = (1.0 - c_sigma) * p_sigma + math.sqrt(
            c_sigma * (2.0 - c_sigma) * mu_eff) * (inv_sqrt_c @ y_w)
        sigma *= math.exp((c_sigma / d_sigma) * (np.linalg.norm(p_sigma) / chi_n - 1.0))

        h_sigma = float(np.linalg.norm(p_sigma) /
                        math.sqrt(1.0 - (1.0 - c_sigma) ** (2.0 * it)) < (1.4 + 2.0 / (n + 1.0)) * chi_n)
        p_c = (1.0 - c_c) * p_c + h_sigma * math.sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w

        rank_mu = sum(wk * np.outer(yk, yk) for wk, yk in zip(w, y[sel]))
        cov = ((1.0 - c_1 - c_mu) * cov
               + c_1 * (np.outer(p_c, p_c) + (1.0 - h_sigma) * c_c * (2.0 - c_c) * cov)
               + c_mu * rank_mu)
        cov = 0.5 * (cov + cov.T)

        if not (np.all(np.isfinite(cov)) and np.isfinite(sigma)):
            break
        if sigma < sigma_stop:
            break

    return CmaResult(best_x, best_f, it, evaluations)
