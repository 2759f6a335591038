import numpy as np
import pytest

from surfipp import cmaes


def sphere(x):
    return float(np.sum((x - 1.5) ** 2))


def rosenbrock(x):
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


class TestMinimize:
    def test_sphere(self):
        r = cmaes.minimize(sphere, np.zeros(6), 0.5, max_iter=200, seed=1)
        assert r.fval < 1e-12
        assert np.allclose(r.x, 1.5, atol=1e-5)

    def test_rosenbrock(self):
        r = cmaes.minimize(rosenbrock, np.zeros(4), 0.3, max_iter=400, seed=2)
        assert r.fval < 1e-8

    def test_deterministic(self):
        a = cmaes.minimize(rosenbrock, np.zeros(4), 0.3, max_iter=100, seed=7)
        b = cmaes.minimize(rosenbrock, np.zeros(4), 0.3, max_iter=100, seed=7)
        assert np.array_equal(a.x, b.x)
        assert a.fval == b.fval
        assert a.evaluations == b.evaluations

    def test_seed_changes_path(self):
        a = cmaes.minimize(rosenbrock, np.zeros(4), 0.3, max_iter=30, seed=1)
        b = cmaes.minimize(rosenbrock, np.zeros(4), 0.3, max_iter=30, seed=2)
        assert not np.array_equal(a.x, b.x)

    def test_bounds_respected(self):
        lo, hi = np.full(3, -1.0), np.full(3, 1.0)
        r = cmaes.minimize(lambda x: float(np.sum((x - 2) ** 2)), np.zeros(3), 0.5,
                           bounds=(lo, hi), max_iter=150, seed=3)
        assert np.all(r.x <= hi + 1e-12) and np.all(r.x >= lo - 1e-12)
        assert np.allclose(r.x, 1.0, atol=1e-3)

    def test_never_worse_than_start(self):
        # start exactly at the optimum; the result must not move off it
        r = cmaes.minimize(sphere, np.full(5, 1.5), 2.0, max_iter=50, seed=4)
        assert r.fval == 0.0
        assert np.array_equal(r.x, np.full(5, 1.5))

    def test_default_popsize(self):
        assert cmaes.default_popsize(9) == 4 + int(3 * np.log(9))

    def test_popsize_validation(self):
        with pytest.raises(ValueError):
            cmaes.minimize(sphere, np.zeros(3), 0.5, popsize=3)
