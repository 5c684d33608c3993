"""Bezier path parametrization and per-node path kinematics."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

EPS_PATH = 1e-9  # m^2, lower bound on s1'^2 + s2'^2


class PathError(ValueError):
    """Raised for invalid path specifications or degenerate samples."""


@dataclass(frozen=True)
class PathSpec:
    """Planar Bezier curve given by its control points (meters)."""

    control_points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise PathError("control points must be an (n+1, 2) array")
        if not np.all(np.isfinite(pts)):
            raise PathError("control points must be finite")
        if pts.shape[0] < 2:
            raise PathError("a Bezier curve needs at least two control points")
        if np.all(np.abs(np.diff(pts, axis=0)) == 0.0):
            raise PathError("all control points coincide")
        pts.setflags(write=False)
        object.__setattr__(self, "control_points", pts)

    @property
    def degree(self) -> int:
        return self.control_points.shape[0] - 1

    def require_smooth(self) -> None:
        """Planner paths must be at least three times differentiable."""
        if self.control_points.shape[0] < 5:
            raise PathError("planner paths need at least 5 control points (degree >= 4)")


@dataclass(frozen=True)
class PathSamples:
    """Exact path derivatives at N+1 evenly spaced nodes of sigma."""

    sigma: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    s1p: np.ndarray
    s2p: np.ndarray
    s1pp: np.ndarray
    s2pp: np.ndarray
    s1ppp: np.ndarray
    s2ppp: np.ndarray
    sp12: np.ndarray
    theta: np.ndarray
    thetap: np.ndarray
    thetapp: np.ndarray

    @property
    def N(self) -> int:
        """Number of intervals (nodes minus one)."""
        return self.sigma.size - 1

    @property
    def dsigma(self) -> float:
        return 1.0 / self.N

    def mirrored(self) -> "PathSamples":
        """Reflection about the x-axis."""
        return PathSamples(
            sigma=self.sigma, s1=self.s1, s2=-self.s2,
            s1p=self.s1p, s2p=-self.s2p, s1pp=self.s1pp, s2pp=-self.s2pp,
            s1ppp=self.s1ppp, s2ppp=-self.s2ppp, sp12=self.sp12,
            theta=-self.theta, thetap=-self.thetap, thetapp=-self.thetapp,
        )


def _bernstein(n: int, sigma: np.ndarray) -> np.ndarray:
    """Bernstein basis of degree n, shape (len(sigma), n+1)."""
    i = np.arange(n + 1)
    coef = np.array([comb(n, k) for k in i], dtype=float)
    s = sigma[:, None]
    return coef * s**i * (1.0 - s) ** (n - i)


def _check_sigma(sigma) -> np.ndarray:
    s = np.atleast_1d(np.asarray(sigma, dtype=float))
    if np.any(~np.isfinite(s)) or np.any(s < 0.0) or np.any(s > 1.0):
        raise PathError("sigma must lie in [0, 1]")
    return s


def bezier_eval(spec: PathSpec, sigma):
    """Point(s) on the curve; scalar sigma gives shape (2,), array gives (m, 2)."""
    s = _check_sigma(sigma)
    pts = _bernstein(spec.degree, s) @ spec.control_points
    return pts[0] if np.ndim(sigma) == 0 else pts


def bezier_derivative(spec: PathSpec, k: int, sigma):
    """k-th sigma-derivative of the curve.

    The derivative of a degree-n curve is the degree-(n-k) curve built on the
    k-th forward differences of the control points, scaled by n!/(n-k)!.
    """
    n = spec.degree
    if k < 1 or k > n:
        raise PathError(f"derivative order must be in [1, {n}], got {k}")
    s = _check_sigma(sigma)
    diffs = np.diff(spec.control_points, n=k, axis=0)
    factor = float(np.prod(np.arange(n - k + 1, n + 1)))
    out = factor * (_bernstein(n - k, s) @ diffs)
    return out[0] if np.ndim(sigma) == 0 else out


def _zeros_like_derivative(spec: PathSpec, k: int, s: np.ndarray) -> np.ndarray:
    if k > spec.degree:
        return np.zeros((s.size, 2))
    return bezier_derivative(spec, k, s)


def orientation_derivatives(d1: np.ndarray, d2: np.ndarray, d3: np.ndarray):
    """Closed-form theta' and theta'' from stacked first/second/third derivatives."""
    x1, y1 = d1[..., 0], d1[..., 1]
    x2, y2 = d2[..., 0], d2[..., 1]
    x3, y3 = d3[..., 0], d3[..., 1]
    k1 = 2.0 * x1 * x2 + 2.0 * y1 * y2
    k2 = x1**2 + y1**2
    thetap = (x1 * y2 - y1 * x2) / k2
    thetapp = (y1 * x2 * k1 - x1 * y2 * k1) / k2**2 + (x1 * y3 - y1 * x3) / k2
    return thetap, thetapp


def sample_path(spec: PathSpec, N: int) -> PathSamples:
    """Sample the path and its derivatives at N+1 evenly spaced nodes."""
    if int(N) != N or N < 2:
        raise PathError("N must be an integer >= 2")
    N = int(N)
    sigma = np.linspace(0.0, 1.0, N + 1)
    pos = bezier_eval(spec, sigma)
    d1 = _zeros_like_derivative(spec, 1, sigma)
    d2 = _zeros_like_derivative(spec, 2, sigma)
    d3 = _zeros_like_derivative(spec, 3, sigma)
    sp12 = d1[:, 0] ** 2 + d1[:, 1] ** 2
    bad = np.flatnonzero(sp12 <= EPS_PATH)
    if bad.size:
        raise PathError(f"degenerate path: s1'^2 + s2'^2 <= {EPS_PATH} at node {int(bad[0])}")
    theta = np.unwrap(np.arctan2(d1[:, 1], d1[:, 0]))
    thetap, thetapp = orientation_derivatives(d1, d2, d3)
    arrays = dict(
        sigma=sigma, s1=pos[:, 0], s2=pos[:, 1], s1p=d1[:, 0], s2p=d1[:, 1],
        s1pp=d2[:, 0], s2pp=d2[:, 1], s1ppp=d3[:, 0], s2ppp=d3[:, 1],
        sp12=sp12, theta=theta, thetap=thetap, thetapp=thetapp,
    )
    for a in arrays.values():
        a.setflags(write=False)
    return PathSamples(**arrays)


def path_point(spec: PathSpec, sigma: float):
    """Position, heading and the derivatives needed by path-following dynamics at one sigma.

    Returns (s, s', s'', theta, theta', theta'') with theta taken from atan2 (not unwrapped).
    """
    s = np.array([sigma])
    p = bezier_eval(spec, s)[0]
    d1 = _zeros_like_derivative(spec, 1, s)
    d2 = _zeros_like_derivative(spec, 2, s)
    d3 = _zeros_like_derivative(spec, 3, s)
    tp, tpp = orientation_derivatives(d1, d2, d3)
    theta = float(np.arctan2(d1[0, 1], d1[0, 0]))
    return p, d1[0], d2[0], theta, float(tp[0]), float(tpp[0])


def random_control_points(
    seed: int,
    count: int = 40,
    step: tuple[float, float] = (12.0, 18.0),
    turn_std: float = 0.25,
) -> np.ndarray:
    """Reproducible random-walk control polygon with forward drift.

    Heading changes are drawn from a zero-mean normal distribution so the
    resulting Bezier curve stays gently curved.
    """
    if count < 5:
        raise PathError("need at least 5 control points")
    rng = np.random.default_rng(seed)
    heading = np.cumsum(np.concatenate([[0.0], rng.normal(0.0, turn_std, count - 2)]))
    lengths = rng.uniform(step[0], step[1], count - 1)
    moves = np.column_stack([lengths * np.cos(heading), lengths * np.sin(heading)])
    return np.vstack([np.zeros(2), np.cumsum(moves, axis=0)])
