"""Piecewise-polynomial position+yaw trajectories through control waypoints.

Each segment is a straight line in space traversed with a smooth rest-to-rest
profile: a degree-k shape polynomial with zero velocity and acceleration at
both ends, completed by minimizing integrated squared snap. Segment durations
come from a trapezoidal velocity profile, stretched where necessary so the
sampled speed and acceleration provably stay within the dynamic limits. Yaw
slews along the shortest angular path at constant rate within each segment.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sensor import Viewpoint, normalize_yaw

_MIN_DURATION = 1e-3  # degenerate (zero-motion) segments still need time > 0


class TrajectoryError(Exception):
    pass


@dataclass(frozen=True)
class DynamicsLimits:
    """Vehicle limits: speeds in m/s, accel m/s^2, yaw rate rad/s, radius m."""

    v_max: float
    a_max: float
    yaw_rate_max: float
    uav_radius: float

    def __post_init__(self):
        if min(self.v_max, self.a_max, self.yaw_rate_max, self.uav_radius) <= 0:
            raise ValueError("all dynamic limits must be positive")


@lru_cache(maxsize=None)
def _shape_coefficients(order: int) -> tuple:
    """Monomial coefficients of the rest-to-rest shape s(tau) on [0, 1].

    Constraints: s(0)=0, s(1)=1, s'(0)=s'(1)=s''(0)=s''(1)=0. Remaining
    freedom (order > 5) minimizes the integral of squared fourth derivative.
    """
    if order < 5:
        raise TrajectoryError("polynomial order must be >= 5")
    n = order + 1
    A = np.zeros((6, n))
    i = np.arange(n)
    A[0, 0] = 1.0
    A[1, :] = 1.0
    A[2, 1] = 1.0
    A[3, :] = i
    A[4, 2] = 2.0
    A[5, :] = i * (i - 1)
    b = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0])

    q = i * (i - 1) * (i - 2) * (i - 3)  # 4th-derivative factors
    Q = np.zeros((n, n))
    for a_ in range(4, n):
        for b_ in range(4, n):
            Q[a_, b_] = q[a_] * q[b_] / (a_ + b_ - 7)
    kkt = np.block([[2.0 * Q, A.T], [A, np.zeros((6, 6))]])
    rhs = np.concatenate([np.zeros(n), b])
    sol = np.linalg.solve(kkt, rhs)
    return tuple(sol[:n])


@lru_cache(maxsize=None)
def _shape_peaks(order: int) -> tuple:
    """(max |s'|, max |s''|) of the shape polynomial, on a dense grid."""
    c = np.array(_shape_coefficients(order))
    d1 = np.polynomial.polynomial.polyder(c)
    d2 = np.polynomial.polynomial.polyder(c, 2)
    tau = np.linspace(0.0, 1.0, 20001)
    # grid maxima underestimate the true peaks; inflate past the grid error
    v = np.abs(np.polynomial.polynomial.polyval(tau, d1)).max() * (1.0 + 2e-6)
    a = np.abs(np.polynomial.polynomial.polyval(tau, d2)).max() * (1.0 + 2e-6)
    return float(v), float(a)


def segment_time(vp_from: Viewpoint, vp_to: Viewpoint, lim: DynamicsLimits) -> float:
    """Lower-bound travel time between two viewpoints.

    Translation follows a trapezoidal (or triangular, for short hops)
    velocity profile; yaw turns at the maximum rate; the segment takes the
    slower of the two. Identical viewpoints cost 0.
    """
    dist = float(np.linalg.norm(vp_to.position - vp_from.position))
    if dist <= 0:
        t_trans = 0.0
    elif dist <= lim.v_max**2 / lim.a_max:
        t_trans = 2.0 * math.sqrt(dist / lim.a_max)
    else:
        t_trans = dist / lim.v_max + lim.v_max / lim.a_max
    dyaw = abs(normalize_yaw(vp_to.yaw - vp_from.yaw))
    return max(t_trans, dyaw / lim.yaw_rate_max)


@dataclass(frozen=True)
class Segment:
    start: np.ndarray
    end: np.ndarray
    duration: float
    yaw_start: float
    yaw_delta: float     # shortest-path signed yaw change
    coeffs: np.ndarray   # (3, order+1) monomial coefficients in tau = t/duration

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))


@dataclass(frozen=True)
class Trajectory:
    """Immutable piecewise-polynomial path through control waypoints."""

    segments: tuple
    waypoints: tuple          # the control Viewpoints
    order: int

    @property
    def total_time(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def segment_start_times(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def _locate(self, t: float):
        starts = self.segment_start_times
        t = min(max(t, 0.0), starts[-1])
        k = int(np.searchsorted(starts[1:-1], t, side="right"))
        return k, (t - starts[k]) / self.segments[k].duration

    def position_at(self, t: float) -> np.ndarray:
        k, tau = self._locate(t)
        c = self.segments[k].coeffs
        return np.polynomial.polynomial.polyval(tau, c.T)

    def velocity_at(self, t: float) -> np.ndarray:
        k, tau = self._locate(t)
        seg = self.segments[k]
        d1 = np.polynomial.polynomial.polyder(seg.coeffs.T)
        return np.polynomial.polynomial.polyval(tau, d1) / seg.duration

    def acceleration_at(self, t: float) -> np.ndarray:
        k, tau = self._locate(t)
        seg = self.segments[k]
        d2 = np.polynomial.polynomial.polyder(seg.coeffs.T, 2)
        return np.polynomial.polynomial.polyval(tau, d2) / seg.duration**2

    def yaw_at(self, t: float) -> float:
        k, tau = self._locate(t)
        seg = self.segments[k]
        return normalize_yaw(seg.yaw_start + seg.yaw_delta * tau)

    def viewpoint_at(self, t: float) -> Viewpoint:
        return Viewpoint(self.position_at(t), self.yaw_at(t))

    def sample_positions_by_arclength(self, step: float) -> np.ndarray:
        """Positions spaced at most ``step`` apart along the path.

        Sampling is uniform in normalized time; the shape polynomial's peak
        slope bounds the spatial spacing between consecutive samples.
        """
        if step <= 0:
            raise TrajectoryError("step must be positive")
        peak_v, _ = _shape_peaks(self.order)
        pts = [self.segments[0].start]
        for seg in self.segments:
            k = max(1, int(math.ceil(seg.length * peak_v / step)))
            fracs = np.arange(1, k + 1) / k
            pts.extend(np.polynomial.polynomial.polyval(fracs, seg.coeffs.T).T)
        return np.asarray(pts)

    def to_csv(self, path, sample_hz: float = 10.0) -> None:
        """Write (t, x, y, z, yaw) rows sampled at a fixed rate."""
        times = np.arange(0.0, self.total_time + 1e-9, 1.0 / sample_hz)
        with open(path, "w", encoding="ascii") as fh:
            fh.write("t,x,y,z,yaw\n")
            for t in times:
                p = self.position_at(t)
                fh.write(f"{t:.9g},{p[0]:.9g},{p[1]:.9g},{p[2]:.9g},{self.yaw_at(t):.9g}\n")


def plan_polynomial(waypoints, lim: DynamicsLimits, order: int = 12,
                    duration_safety: float = 1.1) -> Trajectory:
    """Rest-to-rest polynomial trajectory through the given viewpoints.

    Durations start from ``segment_time`` scaled by ``duration_safety`` and
    are stretched further where the shape polynomial's velocity/acceleration
    peaks would otherwise exceed the limits.
    """
    if len(waypoints) < 2:
        raise TrajectoryError("need at least two control waypoints")
    if order < 5:
        raise TrajectoryError("polynomial order must be >= 5")
    shape = np.array(_shape_coefficients(order))
    peak_v, peak_a = _shape_peaks(order)

    segments = []
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        dist = float(np.linalg.norm(b.position - a.position))
        t = duration_safety * segment_time(a, b, lim)
        t = max(t, peak_v * dist / lim.v_max, math.sqrt(peak_a * dist / lim.a_max),
                _MIN_DURATION)
        delta = b.position - a.position
        coeffs = np.outer(delta, shape)
        coeffs[:, 0] += a.position
        coeffs.setflags(write=False)
        segments.append(Segment(a.position, b.position, t, a.yaw,
                                normalize_yaw(b.yaw - a.yaw), coeffs))
    return Trajectory(tuple(segments), tuple(waypoints), order)


def measurement_viewpoints(traj: Trajectory, freq: float, t_offset: float = 0.0):
    """(time, Viewpoint) pairs at the sensor cadence along the trajectory.

    Times are t_offset, t_offset + 1/freq, ... up to the total duration
    (inclusive, within a small tolerance).
    """
    if freq <= 0:
        raise TrajectoryError("measurement frequency must be positive")
    out = []
    period = 1.0 / freq
    k = 0
    while (t := t_offset + k * period) <= traj.total_time + 1e-9:
        if t >= 0:
            out.append((t, traj.viewpoint_at(t)))
        k += 1
    return out
