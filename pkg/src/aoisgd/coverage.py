"""Stochastic sensor-coverage benchmark and the small problems used in tests.

Agents sit in the plane; agent ``i`` detects a point ``y`` with probability
``exp(-xi * |x_i - y|^2)``. The objective is the detection error probability
averaged over the unit disk; each target adds a Courant-Beltrami penalty
``max(0, p_e - delta)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidInput


def detection_prob(agent_pos, target, xi: float) -> float:
    if not xi > 0:
        raise InvalidInput("xi must be positive")
    d = np.asarray(agent_pos, dtype=float) - np.asarray(target, dtype=float)
    return float(np.exp(-xi * (d @ d)))


def error_prob(positions, target, xi: float) -> float:
    pts = np.asarray(target, dtype=float).reshape(1, 2)
    return float(kernels.error_prob_points(np.asarray(positions, dtype=float), pts, xi)[0])


def sample_unit_disk(count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points on the closed unit disk (polar, radius sqrt(u))."""
    u = rng.random((count, 2))
    r = np.sqrt(u[:, 0])
    th = 2.0 * math.pi * u[:, 1]
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def objective_sample(positions, xi: float, disk_samples=None, rng=None, count: int = 256) -> float:
    """Mean of ``p_e`` over uniform disk samples; estimates (1/pi) * integral over the disk.

    When ``disk_samples`` is None, ``count`` points are drawn from ``rng``.
    """
    if disk_samples is None:
        if rng is None:
            raise InvalidInput("need disk_samples or rng")
        disk_samples = sample_unit_disk(count, rng)
    disk_samples = np.asarray(disk_samples, dtype=float)
    if len(disk_samples) == 0:
        raise InvalidInput("empty disk sample set")
    return float(np.mean(kernels.error_prob_points(positions, disk_samples, xi)))


def penalty(positions, xi: float, targets, delta: float) -> float:
    return kernels.penalty_value(positions, xi, np.asarray(targets, dtype=float).reshape(-1, 2), delta)


def grad_objective_sample(positions, xi: float, disk_samples) -> np.ndarray:
    positions = np.asarray(positions, dtype=float)
    if len(disk_samples) == 0:
        raise InvalidInput("empty disk sample set")
    return np.array([kernels.agent_objective_grad(positions, i, xi, disk_samples)
                     for i in range(len(positions))])


def grad_penalty(positions, xi: float, targets, delta: float) -> np.ndarray:
    positions = np.asarray(positions, dtype=float)
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    return np.array([kernels.agent_penalty_grad(positions, i, xi, targets, delta)
                     for i in range(len(positions))])


@dataclass(frozen=True)
class UniformXi:
    low: float = 0.5
    high: float = 1.5

    def __post_init__(self):
        if not (0 < self.low <= self.high < math.inf):
            raise InvalidInput("xi support must satisfy 0 < low <= high < inf")

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def quadrature(self, nodes: int = 3):
        if self.low == self.high:
            return np.array([self.low]), np.array([1.0])
        x, w = np.polynomial.legendre.leggauss(nodes)
        return self.low + (x + 1.0) * 0.5 * (self.high - self.low), w / 2.0


def xi_sample(distribution: UniformXi, rng: np.random.Generator) -> float:
    """One draw; always consumes exactly one uniform."""
    u = rng.random()
    return distribution.low + (distribution.high - distribution.low) * u


def disk_quadrature(radial: int = 12, angular: int = 24):
    """Product rule on the unit disk with weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(radial)
    r = (x + 1.0) / 2.0
    wr = w / 2.0 * 2.0 * r  # 2 r dr on [0, 1]
    th = 2.0 * math.pi * (np.arange(angular) + 0.5) / angular
    R, TH = np.meshgrid(r, th, indexing="ij")
    W = np.repeat(wr[:, None] / angular, angular, axis=1)
    pts = np.column_stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
    return pts, W.ravel()


def pentagon_targets(radius: float = 0.6, count: int = 5) -> np.ndarray:
    ang = math.pi / 2 + 2 * math.pi * np.arange(count) / count
    return np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])


def annulus_positions(count: int, r_min: float, r_max: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u = rng.random((count, 2))
    r = np.sqrt(u[:, 0] * (r_max ** 2 - r_min ** 2) + r_min ** 2)
    th = 2 * math.pi * u[:, 1]
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


@dataclass
class CoverageProblem:
    agent_count: int
    targets: np.ndarray = field(default_factory=pentagon_targets)
    delta: float = 0.25
    xi: UniformXi = field(default_factory=UniformXi)
    mc_samples: int = 256
    penalty_enabled: bool = True
    eval_radial: int = 12
    eval_angular: int = 24
    eval_xi_nodes: int = 3

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1, 2)
        if not 0 < self.delta < 1:
            raise InvalidInput("delta must lie in (0, 1)")
        if np.any(np.hypot(self.targets[:, 0], self.targets[:, 1]) > 1 + 1e-12):
            raise InvalidInput("targets must lie in the closed unit disk")
        if self.mc_samples < 1:
            raise InvalidInput("mc_samples must be positive")
        self._eval_pts, self._eval_w = disk_quadrature(self.eval_radial, self.eval_angular)
        self._xi_nodes, self._xi_w = self.xi.quadrature(self.eval_xi_nodes)

    dim = 2

    def sample_xi(self, rng: np.random.Generator) -> float:
        return xi_sample(self.xi, rng)

    def agent_gradients(self, values, i, xi, rng):
        pts = sample_unit_disk(self.mc_samples, rng)
        gf = kernels.agent_objective_grad(values, i, xi, pts)
        if self.penalty_enabled and len(self.targets):
            gp = kernels.agent_penalty_grad(values, i, xi, self.targets, self.delta)
        else:
            gp = np.zeros(2)
        return gf, gp

    def evaluate(self, positions) -> dict:
        """Deterministic quadrature of E_xi[F] and E_xi[P], and E_xi[p_e] per target."""
        obj, pen, tpe = kernels.objective_penalty_eval(
            positions, self._eval_pts, self._eval_w, self._xi_nodes, self._xi_w,
            self.targets, self.delta, True)
        return {"objective": obj, "penalty": pen, "target_error": np.asarray(tpe)}


@dataclass
class QuadraticProblem:
    """f(x, xi) = sum_i |x_i - c_i|^2 + xi * 0, no penalty unless ``weight`` > 0.

    The penalty is ``weight * sum_i max(0, x_i - upper)^2`` componentwise.
    """

    centers: np.ndarray
    upper: float = math.inf
    weight: float = 0.0

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def sample_xi(self, rng):
        return 1.0

    def agent_gradients(self, values, i, xi, rng):
        xi_ = np.asarray(values[i], dtype=float)
        gf = 2.0 * (xi_ - self.centers[i])
        gp = 2.0 * self.weight * np.maximum(xi_ - self.upper, 0.0)
        return gf, gp

    def evaluate(self, positions) -> dict:
        x = np.asarray(positions, dtype=float)
        obj = float(np.sum((x - self.centers) ** 2))
        pen = float(self.weight * np.sum(np.maximum(x - self.upper, 0.0) ** 2))
        return {"objective": obj, "penalty": pen, "target_error": np.zeros(0)}


@dataclass
class NullProblem:
    """Zero gradients; used when only the network behaviour is of interest."""

    dim: int = 1

    def sample_xi(self, rng):
        return 1.0

    def agent_gradients(self, values, i, xi, rng):
        return np.zeros(self.dim), np.zeros(self.dim)

    def evaluate(self, positions) -> dict:
        return {"objective": 0.0, "penalty": 0.0, "target_error": np.zeros(0)}
