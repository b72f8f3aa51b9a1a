"""Representative-voter scenarios: a referendum and a two-candidate election."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .fake_news import FakeNewsShape, FakeNewsSpec, ReleaseSchedule, ShapeKind, fake_news_path, information_path
from .filters import (
    DiscreteOutcome,
    PosteriorSeries,
    ReleasePrior,
    SingleReleaseFilter,
    category1_posterior,
    category2_posterior_multi,
    category3_posterior,
)
from .parallel import chunked, parallel_map
from .stochastic import RngStream, SamplePath, TimeGrid, brownian_path

__all__ = [
    "ReferendumScenario",
    "ElectionScenario",
    "RunRecord",
    "FlipResult",
    "simulate_referendum",
    "simulate_election",
    "flip_probability",
    "STREAM_OUTCOME",
    "STREAM_NOISE",
    "STREAM_RELEASES",
    "STREAM_FILTER",
]

# sub-stream ids under a run stream
STREAM_OUTCOME = 0
STREAM_NOISE = 1
STREAM_RELEASES = 2
STREAM_FILTER = 3


def _check_common(sigma, p):
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"prior probability in [0,1] required, got {p}")


@dataclass(frozen=True)
class ReferendumScenario:
    """Yes/no vote with at most one linear fake-news item released at an exponential time."""

    sigma: float = 0.3
    mu: float = 0.5
    rate: float = 3.0
    p: float = 0.5
    grid: TimeGrid = field(default_factory=TimeGrid)
    forced_x: float | None = None
    forced_tau: float | None = None
    belief_mu: float | None = None
    belief_rate: float | None = None

    def __post_init__(self):
        _check_common(self.sigma, self.p)
        if self.rate < 0:
            raise ValueError("release rate must be >= 0")
        if self.forced_x is not None and self.forced_x not in (0, 1):
            raise ValueError("forced outcome must be 0 or 1")

    @property
    def outcome(self) -> DiscreteOutcome:
        return DiscreteOutcome.binary(self.p)

    @property
    def shape(self) -> FakeNewsShape:
        return FakeNewsShape.linear(self.mu)

    def release_prior(self) -> ReleasePrior:
        rate = self.rate if self.belief_rate is None else self.belief_rate
        return ReleasePrior.exponential(rate) if rate > 0 else ReleasePrior.never()


@dataclass(frozen=True)
class ElectionScenario:
    """Two candidates (0 and 1), damped fake news for candidate 1 released at Poisson times."""

    sigma: float = 0.3
    mu: float = 2.0
    alpha: float = 5.0
    rate: float = 10.0
    p: float = 0.5
    grid: TimeGrid = field(default_factory=TimeGrid)
    category2: bool = False
    n_particles: int = 1000
    forced_x: float | None = None
    forced_schedule: tuple[float, ...] | None = None
    belief_mu: float | None = None
    belief_alpha: float | None = None
    belief_rate: float | None = None

    def __post_init__(self):
        _check_common(self.sigma, self.p)
        if not self.alpha > 0:
            raise ValueError("damping rate must be > 0")
        if self.rate < 0:
            raise ValueError("release rate must be >= 0")
        if self.forced_x is not None and self.forced_x not in (0, 1):
            raise ValueError("forced outcome must be 0 or 1")

    @property
    def outcome(self) -> DiscreteOutcome:
        return DiscreteOutcome.binary(self.p)

    @property
    def shape(self) -> FakeNewsShape:
        return FakeNewsShape.damped(self.mu, self.alpha)

    def belief(self) -> FakeNewsSpec:
        shape = FakeNewsShape.damped(
            self.mu if self.belief_mu is None else self.belief_mu,
            self.alpha if self.belief_alpha is None else self.belief_alpha,
        )
        return FakeNewsSpec(shape, rate=self.rate if self.belief_rate is None else self.belief_rate)


@dataclass(eq=False)
class RunRecord:
    x: float
    schedule: ReleaseSchedule
    brownian: SamplePath
    fake: SamplePath
    eta: SamplePath
    xi: SamplePath
    posteriors: dict[int, PosteriorSeries | None]

    @property
    def winners(self) -> dict[int, int | None]:
        return {c: (ps.winner() if ps is not None else None) for c, ps in self.posteriors.items()}


def _draw_x(outcome: DiscreteOutcome, forced, rng: RngStream) -> float:
    if forced is not None:
        return float(forced)
    gen = rng.child(STREAM_OUTCOME).generator()
    return float(outcome.values[gen.choice(len(outcome), p=outcome.priors)])


def _paths(sigma, x, shape, schedule, grid, rng):
    B = brownian_path(grid, rng.child(STREAM_NOISE))
    F = fake_news_path(shape, schedule, grid)
    return B, F, information_path(sigma, x, B, F), information_path(sigma, x, B, SamplePath.zeros(grid))


def simulate_referendum(scenario: ReferendumScenario, rng: RngStream) -> RunRecord:
    grid = scenario.grid
    outcome = scenario.outcome
    x = _draw_x(outcome, scenario.forced_x, rng)
    if scenario.forced_tau is not None:
        tau = float(scenario.forced_tau)
    elif scenario.rate > 0:
        tau = float(rng.child(STREAM_RELEASES).generator().exponential(1.0 / scenario.rate))
    else:
        tau = math.inf
    schedule = ReleaseSchedule([tau] if tau <= grid.horizon else [])
    B, F, eta, xi = _paths(scenario.sigma, x, scenario.shape, schedule, grid, rng)

    belief = scenario.shape if scenario.belief_mu is None else FakeNewsShape.linear(scenario.belief_mu)
    cat2 = SingleReleaseFilter(outcome, scenario.sigma, belief, scenario.release_prior(), eta).posterior()
    posteriors = {
        1: category1_posterior(outcome, scenario.sigma, eta),
        2: cat2,
        3: category3_posterior(outcome, scenario.sigma, eta, F),
    }
    return RunRecord(x, schedule, B, F, eta, xi, posteriors)


def simulate_election(scenario: ElectionScenario, rng: RngStream) -> RunRecord:
    grid = scenario.grid
    outcome = scenario.outcome
    x = _draw_x(outcome, scenario.forced_x, rng)
    if scenario.forced_schedule is not None:
        schedule = ReleaseSchedule(scenario.forced_schedule)
    else:
        schedule = FakeNewsSpec(scenario.shape, rate=scenario.rate).draw_schedule(
            grid.horizon, rng.child(STREAM_RELEASES).generator()
        )
    B, F, eta, xi = _paths(scenario.sigma, x, scenario.shape, schedule, grid, rng)
    cat2 = None
    if scenario.category2:
        cat2 = category2_posterior_multi(
            outcome, scenario.sigma, scenario.belief(), eta, scenario.n_particles, rng.child(STREAM_FILTER)
        )
    posteriors = {
        1: category1_posterior(outcome, scenario.sigma, eta),
        2: cat2,
        3: category3_posterior(outcome, scenario.sigma, eta, F),
    }
    return RunRecord(x, schedule, B, F, eta, xi, posteriors)


@dataclass
class FlipResult:
    flips: int
    runs: int
    records: list[tuple] | None = None

    @property
    def fraction(self) -> float:
        return self.flips / self.runs

    @property
    def ci(self) -> tuple[float, float]:
        """Normal-approximation 95% interval, clipped to [0, 1]."""
        f = self.fraction
        half = 1.959963984540054 * math.sqrt(f * (1 - f) / self.runs)
        return max(0.0, f - half), min(1.0, f + half)


RUN_FIELDS = ("run", "x", "n_releases", "winner_cat1", "winner_cat3", "flipped")


def _flip_chunk(runs: range, scenario: ElectionScenario, master_seed: int) -> list[tuple]:
    out = []
    for r in runs:
        rec = simulate_election(scenario, RngStream(master_seed, (r,)))
        w1, w3 = rec.posteriors[1].winner(), rec.posteriors[3].winner()
        out.append((r, rec.x, len(rec.schedule), w1, w3, int(w1 != w3)))
    return out


def flip_probability(
    scenario: ElectionScenario, n_runs: int, master_seed: int, threads: int = 1, keep_runs: bool = False
) -> FlipResult:
    """Fraction of runs whose final winner differs between contaminated and clean inference."""
    if n_runs < 100:
        raise ValueError(f"n_runs must be >= 100, got {n_runs}")
    scenario = replace(scenario, category2=False)
    work = partial(_flip_chunk, scenario=scenario, master_seed=master_seed)
    chunks = parallel_map(work, chunked(n_runs, max(1, threads) * 4), threads)
    records = [row for chunk in chunks for row in chunk]
    flips = sum(row[-1] for row in records)
    return FlipResult(flips, n_runs, records if keep_runs else None)
