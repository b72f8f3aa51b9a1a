"""Election microstructure: factor channels, voter weight populations and vote shares."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .fake_news import FakeNewsShape, FakeNewsSpec, ReleaseSchedule, fake_news_path, information_path
from .filters import (
    DiscreteOutcome,
    PosteriorSeries,
    category1_posterior,
    category2_posterior_multi,
    category3_posterior,
)
from .parallel import chunked, parallel_map
from .representative import STREAM_FILTER, STREAM_NOISE, STREAM_RELEASES
from .stochastic import RngStream, SamplePath, TimeGrid, brownian_path, sample_truncated_normal

__all__ = [
    "CandidateProfile",
    "ChannelSpec",
    "MixtureComponent",
    "PopulationMixture",
    "VoterPopulation",
    "MicrostructureScenario",
    "ShareSeries",
    "CATEGORIES",
    "sample_population",
    "simulate_channels",
    "channel_posteriors",
    "voter_choice",
    "choices",
    "vote_share_series",
    "average_over_runs",
    "two_bloc_mixture",
    "two_candidate_scenario",
]

CATEGORIES = (1, 2, 3)

# sub-stream ids under a run stream; channels live under child(k, l) of the run
STREAM_POPULATION = 10
STREAM_CHANNELS = 11


@dataclass(frozen=True, eq=False)
class CandidateProfile:
    name: str
    factors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "factors", np.atleast_1d(np.asarray(self.factors, dtype=float)))


@dataclass(frozen=True)
class ChannelSpec:
    """One factor-candidate information process.

    ``fake`` drives the simulated path; ``belief`` is what Category II assumes
    (defaults to ``fake``).  ``fake=None`` means a clean channel.
    """

    sigma: float
    outcome: DiscreteOutcome
    fake: FakeNewsSpec | None = None
    belief: FakeNewsSpec | None = None

    @property
    def assumed(self) -> FakeNewsSpec | None:
        return self.belief if self.belief is not None else self.fake


@dataclass(frozen=True, eq=False)
class MixtureComponent:
    fraction: float
    center: np.ndarray
    std: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "lower", np.broadcast_to(np.asarray(self.lower, dtype=float), center.shape).copy())
        object.__setattr__(self, "upper", np.broadcast_to(np.asarray(self.upper, dtype=float), center.shape).copy())
        if not 0 <= self.fraction <= 1:
            raise ValueError("component fraction must be in [0, 1]")


@dataclass(frozen=True)
class PopulationMixture:
    components: tuple[MixtureComponent, ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("population mixture needs at least one component")
        total = sum(c.fraction for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture fractions must sum to 1, got {total}")
        dims = {c.center.size for c in self.components}
        if len(dims) != 1:
            raise ValueError("all mixture components need the same dimension")

    @property
    def dim(self) -> int:
        return self.components[0].center.size

    def counts(self, n: int) -> np.ndarray:
        """Component sizes ``round(fraction * n)`` fixed up by largest remainder to sum to ``n``."""
        exact = np.array([c.fraction for c in self.components]) * n
        base = np.floor(exact).astype(int)
        short = n - base.sum()
        order = np.argsort(-(exact - base), kind="stable")
        base[order[:short]] += 1
        return base


@dataclass(frozen=True, eq=False)
class VoterPopulation:
    weights: np.ndarray  # (N, K)
    coins: np.ndarray  # (N,) uniform tie-break coins
    component: np.ndarray  # (N,) component label

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def sample_population(mixture: PopulationMixture, n: int, rng) -> VoterPopulation:
    if n < 1:
        raise ValueError("population needs at least one voter")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    counts = mixture.counts(n)
    parts = [
        sample_truncated_normal(c.center, c.std, c.lower, c.upper, gen, size=m) if m else np.empty((0, mixture.dim))
        for c, m in zip(mixture.components, counts)
    ]
    labels = np.repeat(np.arange(len(counts)), counts)
    return VoterPopulation(np.vstack(parts), gen.random(n), labels)


@dataclass(frozen=True)
class MicrostructureScenario:
    """``K`` factors x ``L`` candidates; ``channels[k][l]`` feeds the estimate of factor k of candidate l."""

    candidates: tuple[CandidateProfile, ...]
    channels: tuple[tuple[ChannelSpec, ...], ...]
    mixture: PopulationMixture
    grid: TimeGrid = field(default_factory=TimeGrid)
    n_voters: int = 100_000
    n_particles: int = 500
    resample_population: bool = True
    readout_every: int = 1

    def __post_init__(self):
        if self.readout_every < 1:
            raise ValueError("readout_every must be >= 1")
        K = len(self.channels)
        if K == 0 or any(len(row) != len(self.candidates) for row in self.channels):
            raise ValueError("channels must be a K x L table matching the candidates")
        if any(c.factors.size != K for c in self.candidates):
            raise ValueError("every candidate needs K factor values")
        if self.mixture.dim != K:
            raise ValueError("weight dimension must equal the number of factors")

    @property
    def readout_nodes(self) -> np.ndarray:
        """Every ``readout_every``-th node, always including the final one."""
        nodes = np.arange(0, self.grid.n_steps + 1, self.readout_every)
        if nodes[-1] != self.grid.n_steps:
            nodes = np.append(nodes, self.grid.n_steps)
        return nodes

    @property
    def K(self) -> int:
        return len(self.channels)

    @property
    def L(self) -> int:
        return len(self.candidates)


@dataclass(eq=False)
class ChannelRun:
    """Per-category factor estimates ``estimates[c][l, k, j] = E_t[X_k^l]`` plus the paths behind them."""

    estimates: dict[int, np.ndarray]
    schedules: list[list[ReleaseSchedule]]


def _simulate_channel(spec: ChannelSpec, x: float, grid: TimeGrid, rng: RngStream, n_particles: int,
                      categories=CATEGORIES) -> tuple[dict[int, PosteriorSeries], ReleaseSchedule]:
    if spec.fake is not None:
        schedule = spec.fake.draw_schedule(grid.horizon, rng.child(STREAM_RELEASES).generator())
        F = fake_news_path(spec.fake.shape, schedule, grid)
    else:
        schedule = ReleaseSchedule.empty()
        F = SamplePath.zeros(grid)
    B = brownian_path(grid, rng.child(STREAM_NOISE))
    eta = information_path(spec.sigma, x, B, F)
    out = {}
    if 1 in categories:
        out[1] = category1_posterior(spec.outcome, spec.sigma, eta)
    if 3 in categories:
        out[3] = category3_posterior(spec.outcome, spec.sigma, eta, F)
    if 2 in categories:
        belief = spec.assumed
        if belief is None or (belief.rate == 0 and belief.schedule is None):
            out[2] = category1_posterior(spec.outcome, spec.sigma, eta)
        else:
            out[2] = category2_posterior_multi(
                spec.outcome, spec.sigma, belief, eta, n_particles, rng.child(STREAM_FILTER)
            )
    return out, schedule


def simulate_channels(scenario: MicrostructureScenario, rng: RngStream, categories=CATEGORIES) -> ChannelRun:
    """Filter every channel once; all voters read the same estimates."""
    K, L, n = scenario.K, scenario.L, scenario.grid.n_steps + 1
    est = {c: np.empty((L, K, n)) for c in categories}
    schedules = [[None] * L for _ in range(K)]
    base = rng.child(STREAM_CHANNELS)
    for k in range(K):
        for l in range(L):
            spec = scenario.channels[k][l]
            x = scenario.candidates[l].factors[k]
            series, sched = _simulate_channel(spec, x, scenario.grid, base.child(k, l), scenario.n_particles, categories)
            schedules[k][l] = sched
            for c in categories:
                est[c][l, k] = series[c].mean
    return ChannelRun(est, schedules)


def channel_posteriors(scenario: MicrostructureScenario, rng: RngStream, category: int) -> list[list[PosteriorSeries]]:
    """``[k][l]`` posterior series of ``X_k^l`` under one voter category."""
    base = rng.child(STREAM_CHANNELS)
    return [
        [
            _simulate_channel(scenario.channels[k][l], scenario.candidates[l].factors[k], scenario.grid,
                              base.child(k, l), scenario.n_particles, (category,))[0][category]
            for l in range(scenario.L)
        ]
        for k in range(scenario.K)
    ]


def choices(weights: np.ndarray, estimates: np.ndarray, coins: np.ndarray) -> np.ndarray:
    """Chosen candidate per voter and readout time.

    ``weights`` is (N, K), ``estimates`` (L, K, T); returns (N, T).  Exact ties
    in the score ``w . E[X^l]`` are broken uniformly by each voter's coin.
    """
    weights = np.atleast_2d(weights)
    L, K, T = estimates.shape
    if weights.shape[1] != K:
        raise ValueError(f"weight dimension {weights.shape[1]} does not match {K} factors")
    scores = [weights @ estimates[l] for l in range(L)]  # L x (N, T)
    top = scores[0].copy()
    pick = np.zeros(top.shape, dtype=np.int64)
    for l in range(1, L):
        better = scores[l] > top
        pick[better] = l
        np.maximum(top, scores[l], out=top)
    n_tied = sum((s == top).astype(np.int64) for s in scores)
    amb = n_tied > 1
    if amb.any():
        vi, ti = np.nonzero(amb)
        tied = np.stack([s[vi, ti] == top[vi, ti] for s in scores], axis=1)
        rank = np.floor(coins[vi] * n_tied[vi, ti]).astype(int)
        pick[vi, ti] = np.argmax(np.cumsum(tied, axis=1) > rank[:, None], axis=1)
    return pick


def voter_choice(w, estimates, coin: float) -> int:
    """Candidate chosen by one voter from the (L, K) table of factor estimates."""
    est = np.asarray(estimates, dtype=float)
    if est.ndim != 2:
        raise ValueError("estimates must be an (L, K) table")
    return int(choices(np.asarray(w, dtype=float)[None, :], est[:, :, None], np.array([coin]))[0, 0])


@dataclass(eq=False)
class ShareSeries:
    """``shares[c][j, l]``: fraction of voters choosing candidate l at readout ``nodes[j]`` under category c."""

    grid: TimeGrid
    names: tuple[str, ...]
    shares: dict[int, np.ndarray]
    nodes: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.grid.times[self.nodes]


def _shares_from_estimates(population: VoterPopulation, est: np.ndarray, chunk: int = 128) -> np.ndarray:
    L, _, T = est.shape
    counts = np.empty((T, L), dtype=np.int64)
    W = population.weights
    for a in range(0, T, chunk):
        block = est[:, :, a:a + chunk]
        if L == 2:
            # two candidates: sign of w . (E[X^A] - E[X^B]); zero is a tie
            D = W @ (block[0] - block[1])
            zero = D == 0
            to_b = np.count_nonzero(D < 0, axis=0)
            if zero.any():
                to_b += np.count_nonzero(zero & (population.coins[:, None] >= 0.5), axis=0)
            counts[a:a + chunk, 1] = to_b
            counts[a:a + chunk, 0] = population.n - to_b
        else:
            pick = choices(W, block, population.coins)
            for l in range(L):
                counts[a:a + chunk, l] = np.count_nonzero(pick == l, axis=0)
    return counts / population.n


def vote_share_series(scenario: MicrostructureScenario, population: VoterPopulation, rng: RngStream,
                      categories=CATEGORIES) -> ShareSeries:
    run = simulate_channels(scenario, rng, categories)
    idx = scenario.readout_nodes
    shares = {c: _shares_from_estimates(population, run.estimates[c][:, :, idx]) for c in categories}
    return ShareSeries(scenario.grid, tuple(c.name for c in scenario.candidates), shares, idx)


def _run_chunk(runs: range, scenario: MicrostructureScenario, master_seed: int, categories) -> list[dict]:
    fixed = None
    if not scenario.resample_population:
        fixed = sample_population(scenario.mixture, scenario.n_voters,
                                  RngStream(master_seed).child(STREAM_POPULATION))
    out = []
    for r in runs:
        rng = RngStream(master_seed, (r,))
        pop = fixed if fixed is not None else sample_population(scenario.mixture, scenario.n_voters,
                                                                rng.child(STREAM_POPULATION))
        out.append(vote_share_series(scenario, pop, rng, categories).shares)
    return out


def average_over_runs(scenario: MicrostructureScenario, n_runs: int, master_seed: int, threads: int = 1,
                      categories=CATEGORIES) -> ShareSeries:
    """Run-averaged share curves; runs are summed in index order."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    work = partial(_run_chunk, scenario=scenario, master_seed=master_seed, categories=tuple(categories))
    results = [s for chunk in parallel_map(work, chunked(n_runs, max(1, threads) * 2), threads) for s in chunk]
    mean = {}
    for c in categories:
        acc = np.zeros_like(results[0][c])
        for res in results:
            acc += res[c]
        mean[c] = acc / n_runs
    return ShareSeries(scenario.grid, tuple(c.name for c in scenario.candidates), mean, scenario.readout_nodes)


def two_bloc_mixture() -> PopulationMixture:
    """55% centred at (1, 1, 1), 45% at (-1, 1, 0); std 0.4; w2 > 0 and w3 in [0, 1]."""
    lower = [-np.inf, 0.0, 0.0]
    upper = [np.inf, np.inf, 1.0]
    return PopulationMixture((
        MixtureComponent(0.55, [1.0, 1.0, 1.0], 0.4, lower, upper),
        MixtureComponent(0.45, [-1.0, 1.0, 0.0], 0.4, lower, upper),
    ))


def two_candidate_scenario(sigma: float = 0.2, mu: float = 1.5, alpha: float = 4.0, rate: float = 4.0,
                     p: float = 0.5, grid: TimeGrid | None = None, n_voters: int = 100_000,
                     n_particles: int = 500, fake_news: bool = True, readout_every: int = 1) -> MicrostructureScenario:
    """Candidates A = (1, 1, 1) and B = (-1, -1, -1); fake news pushes A's factors down and B's up."""
    candidates = (CandidateProfile("A", [1.0, 1.0, 1.0]), CandidateProfile("B", [-1.0, -1.0, -1.0]))
    outcome = DiscreteOutcome.symmetric(p)
    direction = (-1.0, 1.0)
    channels = tuple(
        tuple(
            ChannelSpec(sigma, outcome,
                        FakeNewsSpec(FakeNewsShape.damped(direction[l] * abs(mu), alpha), rate=rate) if fake_news else None)
            for l in range(2)
        )
        for _ in range(3)
    )
    return MicrostructureScenario(candidates, channels, two_bloc_mixture(), grid or TimeGrid(),
                                  n_voters=n_voters, n_particles=n_particles, readout_every=readout_every)
