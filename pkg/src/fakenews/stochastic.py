"""Seedable path generation and the small numerical primitives the filters share."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TimeGrid",
    "SamplePath",
    "RngStream",
    "brownian_path",
    "poisson_release_times",
    "sample_truncated_normal",
    "ito_integral",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_j = j * dt`` on ``[0, horizon]``."""

    horizon: float = 1.0
    n_steps: int = 500

    def __post_init__(self):
        if not self.horizon > 0 or not np.isfinite(self.horizon):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1) * self.dt
        t[-1] = self.horizon
        return t

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; ``t`` must sit on a node."""
        j = int(round(t / self.dt))
        if j < 0 or j > self.n_steps or abs(j * self.dt - t) > 1e-9 * max(1.0, self.horizon):
            raise ValueError(f"time {t} is not a node of {self}")
        return j


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Real values at every node of a grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_steps + 1,):
            raise ValueError(
                f"path needs {self.grid.n_steps + 1} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def _check(self, other: "SamplePath"):
        if other.grid != self.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other: "SamplePath") -> "SamplePath":
        self._check(other)
        return SamplePath(self.grid, self.values + other.values)

    def __sub__(self, other: "SamplePath") -> "SamplePath":
        self._check(other)
        return SamplePath(self.grid, self.values - other.values)

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "SamplePath":
        return cls(grid, np.zeros(grid.n_steps + 1))


@dataclass(frozen=True)
class RngStream:
    """Counter-style random stream keyed by ``(master_seed, *stream ids)``.

    The generator is seeded from ``SeedSequence(master_seed, spawn_key=key)``,
    i.e. a hash of the master seed and the key path, so a run's draws depend only
    on its own key and never on the order in which runs are executed.  Nested
    streams (run -> channel) are built with :meth:`child`.
    """

    master_seed: int
    key: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "key", tuple(int(k) for k in self.key))

    @classmethod
    def of(cls, master_seed: int, stream_id: int) -> "RngStream":
        return cls(master_seed, (stream_id,))

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.master_seed, self.key + tuple(ids))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(seq))


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def brownian_path(grid: TimeGrid, rng) -> SamplePath:
    """Standard Brownian motion sampled on ``grid`` (``B_0 = 0``)."""
    dB = _gen(rng).normal(0.0, np.sqrt(grid.dt), size=grid.n_steps)
    return SamplePath(grid, np.concatenate(([0.0], np.cumsum(dB))))


def poisson_release_times(rate: float, horizon: float, rng) -> np.ndarray:
    """Jump times of a rate-``rate`` Poisson process on ``(0, horizon]``."""
    if rate < 0 or not np.isfinite(rate):
        raise ValueError(f"release rate must be >= 0, got {rate}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if rate == 0:
        return np.empty(0)
    gen = _gen(rng)
    times = []
    t = gen.exponential(1.0 / rate)
    while t <= horizon:
        times.append(t)
        t += gen.exponential(1.0 / rate)
    return np.asarray(times, dtype=float)


def sample_truncated_normal(center, std, lower, upper, rng, size=None, max_rounds=1000):
    """Axis-aligned normal conditioned on the box ``[lower, upper]``.

    Dimensions are independent, so each coordinate is rejection-sampled on its
    own.  ``size`` adds leading sample dimensions; ``None`` returns one vector.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    lower = np.broadcast_to(np.asarray(lower, dtype=float), center.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), center.shape)
    if not std > 0:
        raise ValueError(f"std must be positive, got {std}")
    if np.any(~(lower < upper)):
        raise ValueError(f"infeasible bounds: lower={lower}, upper={upper}")

    gen = _gen(rng)
    shape = (() if size is None else tuple(np.atleast_1d(size))) + center.shape
    out = gen.normal(center, std, size=shape)
    bad = (out < lower) | (out > upper)
    rounds = 0
    while bad.any():
        rounds += 1
        if rounds > max_rounds:
            raise ValueError("truncated-normal acceptance rate too low for rejection sampling")
        redraw = gen.normal(np.broadcast_to(center, shape)[bad], std)
        out[bad] = redraw
        bad = (out < lower) | (out > upper)
    return out


def ito_integral(integrand, path: SamplePath) -> SamplePath:
    """Running left-point sums ``I_k = sum_{j<k} h_j (x_{j+1} - x_j)``.

    ``integrand`` holds values at the nodes; the last node value is unused but
    must be present so the two inputs live on the same grid.
    """
    h = np.asarray(integrand.values if isinstance(integrand, SamplePath) else integrand, dtype=float)
    if isinstance(integrand, SamplePath):
        path._check(integrand)
    if h.shape != path.values.shape:
        raise ValueError(f"integrand shape {h.shape} does not match path grid {path.values.shape}")
    running = np.concatenate(([0.0], np.cumsum(h[:-1] * path.increments)))
    return SamplePath(path.grid, running)
