"""Fake-news onset shapes, release schedules and contaminated information paths."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .stochastic import RngStream, SamplePath, TimeGrid, poisson_release_times

__all__ = [
    "ShapeKind",
    "FakeNewsShape",
    "ReleaseSchedule",
    "FakeNewsSpec",
    "shape_value",
    "shape_slope",
    "fake_news_path",
    "information_path",
]


class ShapeKind(str, Enum):
    LINEAR = "linear"
    DAMPED_LINEAR = "damped_linear"


@dataclass(frozen=True)
class FakeNewsShape:
    """Onset profile ``m(u)`` of one fake-news item, ``u`` time units after release.

    ``linear``: ``m(u) = mu * u``; ``damped_linear``: ``m(u) = mu * u * exp(-alpha * u)``.
    The sign of ``mu`` is the direction in which the public is pushed.
    """

    kind: ShapeKind = ShapeKind.LINEAR
    mu: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ShapeKind(self.kind))
        if not np.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if self.alpha < 0 or not np.isfinite(self.alpha):
            raise ValueError(f"damping rate must be >= 0, got {self.alpha}")
        if self.kind is ShapeKind.LINEAR and self.alpha != 0:
            raise ValueError("linear shape takes no damping rate")

    @classmethod
    def linear(cls, mu: float) -> "FakeNewsShape":
        return cls(ShapeKind.LINEAR, mu)

    @classmethod
    def damped(cls, mu: float, alpha: float) -> "FakeNewsShape":
        return cls(ShapeKind.DAMPED_LINEAR, mu, alpha)

    @property
    def decay(self) -> float:
        return self.alpha if self.kind is ShapeKind.DAMPED_LINEAR else 0.0

    def __call__(self, u):
        return shape_value(self, u)


def shape_value(shape: FakeNewsShape, u):
    u = np.asarray(u, dtype=float)
    up = np.maximum(u, 0.0)
    val = shape.mu * up * np.exp(-shape.decay * up)
    out = np.where(u > 0, val, 0.0)
    return float(out) if out.ndim == 0 else out


def shape_slope(shape: FakeNewsShape, u):
    """``m'(u)``; zero for ``u <= 0``, including the release instant itself."""
    u = np.asarray(u, dtype=float)
    up = np.maximum(u, 0.0)
    a = shape.decay
    val = shape.mu * np.exp(-a * up) * (1.0 - a * up)
    out = np.where(u > 0, val, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class ReleaseSchedule:
    times: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        if times.ndim != 1:
            raise ValueError("release times must be one-dimensional")
        if np.any(np.diff(times) <= 0):
            raise ValueError("release times must be strictly increasing")
        if np.any(times < 0):
            raise ValueError("release times must be non-negative")
        object.__setattr__(self, "times", times)

    def __len__(self):
        return len(self.times)

    def __eq__(self, other):
        return isinstance(other, ReleaseSchedule) and np.array_equal(self.times, other.times)

    @classmethod
    def empty(cls) -> "ReleaseSchedule":
        return cls(np.empty(0))


@dataclass(frozen=True)
class FakeNewsSpec:
    """Shape plus either a Poisson release rate or a fixed schedule."""

    shape: FakeNewsShape
    rate: float | None = None
    schedule: ReleaseSchedule | None = None

    def __post_init__(self):
        if (self.rate is None) == (self.schedule is None):
            raise ValueError("exactly one of rate or fixed schedule must be given")
        if self.rate is not None and (self.rate < 0 or not np.isfinite(self.rate)):
            raise ValueError(f"release rate must be >= 0, got {self.rate}")

    def draw_schedule(self, horizon: float, rng: RngStream | np.random.Generator) -> ReleaseSchedule:
        if self.schedule is not None:
            return self.schedule
        return ReleaseSchedule(poisson_release_times(self.rate, horizon, rng))


def fake_news_path(shape: FakeNewsShape, schedule: ReleaseSchedule, grid: TimeGrid) -> SamplePath:
    """``F_t = sum_i m(t - tau_i)`` on the grid."""
    t = grid.times
    taus = schedule.times
    if taus.size and taus.max() > grid.horizon + 1e-12:
        raise ValueError("release time beyond the horizon")
    if taus.size == 0:
        return SamplePath.zeros(grid)
    return SamplePath(grid, shape_value(shape, t[:, None] - taus[None, :]).sum(axis=1))


def information_path(sigma: float, x_true: float, brownian: SamplePath, fake: SamplePath) -> SamplePath:
    """``eta_t = sigma * x * t + B_t + F_t``; with ``fake`` zero this is the clean path."""
    brownian._check(fake)
    t = brownian.grid.times
    return SamplePath(brownian.grid, sigma * x_true * t + brownian.values + fake.values)
