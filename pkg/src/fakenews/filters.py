"""Posterior computations for the three voter categories.

Category I filters the contaminated path as if it were clean, Category III
removes the known fake-news path first, and Category II integrates over the
unknown release times: exactly for a single release, by a particle filter for
Poisson releases.  :func:`brute_force_posterior` is the independent check:
plain Bayes over an explicit list of release hypotheses.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import logsumexp, softmax
from scipy.stats import norm

from .fake_news import FakeNewsShape, FakeNewsSpec, ReleaseSchedule, fake_news_path, shape_value
from .stochastic import RngStream, SamplePath, TimeGrid

__all__ = [
    "DiscreteOutcome",
    "PosteriorSeries",
    "ReleasePrior",
    "ReleaseDensity",
    "SingleReleaseFilter",
    "BruteForceResult",
    "category1_posterior",
    "category3_posterior",
    "conditional_estimate_given_tau",
    "release_time_density",
    "release_time_mean",
    "category2_estimate_single",
    "category2_posterior_single",
    "category2_posterior_multi",
    "single_release_hypotheses",
    "all_release_configurations",
    "brute_force_posterior",
    "MIN_PARTICLES",
    "MAX_BRUTE_FORCE_STEPS",
]

MIN_PARTICLES = 100
MAX_BRUTE_FORCE_STEPS = 16


@dataclass(frozen=True, eq=False)
class DiscreteOutcome:
    values: np.ndarray
    priors: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        priors = np.atleast_1d(np.asarray(self.priors, dtype=float))
        if values.shape != priors.shape or values.ndim != 1 or values.size == 0:
            raise ValueError("values and priors must be matching non-empty vectors")
        if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-12:
            raise ValueError(f"priors must be a probability vector, got {priors}")
        if np.unique(values).size != values.size:
            raise ValueError("outcome values must be distinct")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "priors", priors)

    @classmethod
    def binary(cls, p: float) -> "DiscreteOutcome":
        """Outcomes ``(0, 1)`` with ``P(X = 1) = p``."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"prior probability in [0,1] required, got {p}")
        return cls([0.0, 1.0], [1.0 - p, p])

    @classmethod
    def symmetric(cls, p: float = 0.5) -> "DiscreteOutcome":
        """Outcomes ``(-1, +1)`` with ``P(X = +1) = p``."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"prior probability in [0,1] required, got {p}")
        return cls([-1.0, 1.0], [1.0 - p, p])

    @property
    def log_priors(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.priors)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class PosteriorSeries:
    """``probs[j, i] = P(X = x_i | information up to t_j)``."""

    grid: TimeGrid
    values: np.ndarray
    probs: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.probs @ self.values

    def winner(self, j: int = -1) -> int:
        """Most probable outcome index at node ``j``; ties go to the lower index."""
        return int(np.argmax(self.probs[j]))


def _cat1_logits(outcome: DiscreteOutcome, sigma: float, eta, t) -> np.ndarray:
    x = outcome.values
    eta = np.asarray(eta, dtype=float)[..., None]
    t = np.asarray(t, dtype=float)[..., None]
    return outcome.log_priors + sigma * x * eta - 0.5 * sigma**2 * x**2 * t


def _normalize(logits: np.ndarray, axis=-1) -> np.ndarray:
    # softmax with max subtraction; rows of all -inf are not expected
    return softmax(logits, axis=axis)


def category1_posterior(outcome: DiscreteOutcome, sigma: float, observed: SamplePath) -> PosteriorSeries:
    """Bayes posterior of ``X`` treating ``observed`` as signal plus Brownian noise."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    grid = observed.grid
    probs = _normalize(_cat1_logits(outcome, sigma, observed.values, grid.times))
    return PosteriorSeries(grid, outcome.values, probs)


def category3_posterior(
    outcome: DiscreteOutcome, sigma: float, observed: SamplePath, fake: SamplePath
) -> PosteriorSeries:
    return category1_posterior(outcome, sigma, observed - fake)


def conditional_estimate_given_tau(
    outcome: DiscreteOutcome, sigma: float, shape: FakeNewsShape, eta_t: float, t: float, tau: float
) -> float:
    """``E[X | eta_t, tau]`` for a single release at ``tau``."""
    x = outcome.values
    shift = shape_value(shape, t - tau) if t >= tau else 0.0
    logits = outcome.log_priors + sigma * x * eta_t - 0.5 * sigma**2 * x**2 * t - sigma * x * shift
    return float(_normalize(logits) @ x)


# ---------------------------------------------------------------------------
# single release: exact marginalisation over the release time


class PriorKind(str, Enum):
    EXPONENTIAL = "exponential"
    POINT_MASS = "point_mass"
    GRID_DENSITY = "grid_density"


@dataclass(frozen=True, eq=False)
class ReleasePrior:
    """Prior law of a single release time, reduced to atoms on the horizon.

    ``exponential``: one atom per grid cell carrying the cell's exact
    probability, placed at the cell's conditional mean (the midpoint up to
    ``O(rate dt^2)``), plus the mass beyond the horizon.  With that placement
    the atoms reproduce every conditional mean ``E[tau | tau > t_j]`` exactly.
    ``point_mass``: a single atom at ``u0``.
    ``grid_density``: user-supplied atoms ``nodes``/``masses`` and an optional
    ``tail_mass`` beyond the last node with conditional mean ``tail_mean``.
    """

    kind: PriorKind
    rate: float = 0.0
    u0: float = 0.0
    nodes: np.ndarray | None = None
    masses: np.ndarray | None = None
    tail_mass: float = 0.0
    tail_mean: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind(self.kind))
        if self.kind is PriorKind.EXPONENTIAL and not self.rate > 0:
            raise ValueError("exponential release prior needs rate > 0")
        if self.kind is PriorKind.POINT_MASS and self.u0 < 0:
            raise ValueError("point-mass release time must be >= 0")
        if self.kind is PriorKind.GRID_DENSITY:
            nodes = np.asarray(self.nodes, dtype=float)
            masses = np.asarray(self.masses, dtype=float)
            if nodes.shape != masses.shape or nodes.ndim != 1:
                raise ValueError("nodes and masses must be matching vectors")
            if np.any(np.diff(nodes) <= 0) or np.any(masses < 0) or self.tail_mass < 0:
                raise ValueError("nodes must increase and masses be non-negative")
            if abs(masses.sum() + self.tail_mass - 1.0) > 1e-9:
                raise ValueError("release prior must have total mass 1")
            if self.tail_mass > 0 and np.isnan(self.tail_mean):
                raise ValueError("tail_mean required when tail_mass > 0")
            object.__setattr__(self, "nodes", nodes)
            object.__setattr__(self, "masses", masses)

    @classmethod
    def exponential(cls, rate: float) -> "ReleasePrior":
        return cls(PriorKind.EXPONENTIAL, rate=rate)

    @classmethod
    def point_mass(cls, u0: float) -> "ReleasePrior":
        return cls(PriorKind.POINT_MASS, u0=u0)

    @classmethod
    def never(cls) -> "ReleasePrior":
        """No release within any finite horizon."""
        return cls(PriorKind.GRID_DENSITY, nodes=[], masses=[], tail_mass=1.0, tail_mean=np.inf)

    @classmethod
    def grid_density(cls, nodes, masses, tail_mass: float = 0.0, tail_mean: float = np.inf) -> "ReleasePrior":
        return cls(PriorKind.GRID_DENSITY, nodes=nodes, masses=masses, tail_mass=tail_mass, tail_mean=tail_mean)

    def atoms(self, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray, float, float]:
        """``(nodes, masses, beyond_mass, beyond_mean)`` for releases on and after the horizon."""
        T = grid.horizon
        if self.kind is PriorKind.EXPONENTIAL:
            edges = grid.times
            cdf = -np.expm1(-self.rate * edges)
            h = np.diff(edges)
            # conditional mean of the prior within each cell; h/2 + O(rate h^2) from the left edge
            centroid = edges[:-1] + 1.0 / self.rate - h / np.expm1(self.rate * h)
            return centroid, np.diff(cdf), float(np.exp(-self.rate * T)), T + 1.0 / self.rate
        if self.kind is PriorKind.POINT_MASS:
            if self.u0 < T:
                return np.array([self.u0]), np.array([1.0]), 0.0, np.inf
            return np.empty(0), np.empty(0), 1.0, self.u0
        return self.nodes, self.masses, self.tail_mass, self.tail_mean

    def tail_mean_after(self, t: float, grid: TimeGrid) -> float:
        """Prior mean of the release time conditional on ``tau >= t`` (no release seen yet)."""
        if self.kind is PriorKind.EXPONENTIAL:
            return t + 1.0 / self.rate
        nodes, masses, beyond, beyond_mean = self.atoms(grid)
        keep = nodes >= t
        mass = masses[keep].sum() + beyond
        if mass <= 0:
            return np.nan
        tail = beyond * beyond_mean if beyond > 0 else 0.0
        return float((masses[keep] @ nodes[keep] + tail) / mass)


@dataclass(frozen=True, eq=False)
class ReleaseDensity:
    """Posterior of the release time at ``t``: atoms released before ``t`` plus the not-yet tail."""

    t: float
    nodes: np.ndarray
    weights: np.ndarray
    tail_mass: float
    tail_mean: float

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum() + self.tail_mass)

    @property
    def mean(self) -> float:
        tail = self.tail_mass * self.tail_mean if self.tail_mass > 0 else 0.0
        return float(self.weights @ self.nodes + tail)


class SingleReleaseFilter:
    """Category II filter for at most one release with a known shape.

    The drift correction ``m'(s - u)`` is integrated against ``d eta`` step by
    step using its average over each grid step, ``(m(t_{j+1}-u) - m(t_j-u)) / dt``.
    That keeps the time integral of the slope equal to ``m(t - u)`` exactly,
    so the joint posterior over ``(X, tau)`` factorises into the release-time
    density times the conditional estimate given ``tau``.
    """

    def __init__(self, outcome: DiscreteOutcome, sigma: float, shape: FakeNewsShape,
                 prior: ReleasePrior, observed: SamplePath):
        self.outcome = outcome
        self.sigma = sigma
        self.shape = shape
        self.prior = prior
        self.observed = observed
        grid = self.grid = observed.grid
        t = grid.times
        dt = grid.dt
        x = outcome.values

        nodes, masses, beyond, _ = prior.atoms(grid)
        self.nodes = nodes
        lag = t[None, :] - nodes[:, None]  # (K, n+1)
        M = np.asarray(shape_value(shape, lag)).reshape(lag.shape)
        d = np.diff(M, axis=1)
        deta = observed.increments
        A = np.zeros_like(M)
        A[:, 1:] = np.cumsum((d * deta - 0.5 * d * d) / dt, axis=1)
        active = nodes[:, None] < t[None, :]

        base = _cat1_logits(outcome, sigma, observed.values, t)  # (n+1, I)
        # (K, n+1, I): log P(X = x_i, eta | tau = u_k) up to factors common to all k and i
        cond = base[None, :, :] - sigma * x[None, None, :] * M[:, :, None]
        with np.errstate(divide="ignore"):
            log_m = np.log(masses)
            inactive_mass = np.where(active, 0.0, masses[:, None]).sum(axis=0) + beyond
            log_tail = np.log(inactive_mass)
        node_logit = log_m[:, None] + A + logsumexp(cond, axis=2)
        node_logit = np.where(active, node_logit, -np.inf)
        tail_logit = log_tail + logsumexp(base, axis=1)

        allw = _normalize(np.vstack([node_logit, tail_logit[None, :]]), axis=0)
        self.node_weights = allw[:-1]  # (K, n+1)
        self.tail_weights = allw[-1]  # (n+1,)
        self.cond_probs = _normalize(cond, axis=2)
        self.tail_probs = _normalize(base, axis=1)

    def density(self, j: int) -> ReleaseDensity:
        t = self.grid.times[j]
        active = self.nodes < t
        return ReleaseDensity(
            t=t,
            nodes=self.nodes[active],
            weights=self.node_weights[active, j],
            tail_mass=float(self.tail_weights[j]),
            tail_mean=self.prior.tail_mean_after(t, self.grid),
        )

    def posterior(self) -> PosteriorSeries:
        probs = np.einsum("kn,kni->ni", self.node_weights, self.cond_probs)
        probs += self.tail_weights[:, None] * self.tail_probs
        return PosteriorSeries(self.grid, self.outcome.values, probs)

    def release_mean(self) -> np.ndarray:
        return np.array([self.density(j).mean for j in range(self.grid.n_steps + 1)])


def release_time_density(outcome, sigma, shape, prior, observed, t) -> ReleaseDensity:
    j = observed.grid.index_of(t)
    return SingleReleaseFilter(outcome, sigma, shape, prior, observed).density(j)


def release_time_mean(prior: ReleasePrior, density: ReleaseDensity) -> float:
    """Posterior mean release time; the not-yet tail contributes its prior conditional mean."""
    return density.mean


def category2_estimate_single(outcome, sigma, shape, prior, observed: SamplePath, t: float) -> float:
    """Mixture of conditional estimates over the release-time posterior at ``t``."""
    dens = release_time_density(outcome, sigma, shape, prior, observed, t)
    eta_t = observed.values[observed.grid.index_of(t)]
    est = sum(w * conditional_estimate_given_tau(outcome, sigma, shape, eta_t, t, u)
              for u, w in zip(dens.nodes, dens.weights))
    return float(est + dens.tail_mass * conditional_estimate_given_tau(outcome, sigma, shape, eta_t, t, np.inf))


def category2_posterior_single(outcome, sigma, shape, prior, observed) -> PosteriorSeries:
    return SingleReleaseFilter(outcome, sigma, shape, prior, observed).posterior()


# ---------------------------------------------------------------------------
# Poisson releases: Rao-Blackwellised bootstrap particle filter


def _lse(a: np.ndarray, axis: int) -> np.ndarray:
    # lean log-sum-exp for the particle loop; scipy's wrapper dominates at this size
    m = a.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def _systematic_resample(weights: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    n = weights.size
    positions = (gen.random() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(weights), positions, side="right")
    return np.minimum(idx, n - 1)


def category2_posterior_multi(
    outcome: DiscreteOutcome,
    sigma: float,
    spec: FakeNewsSpec,
    observed: SamplePath,
    n_particles: int,
    rng,
) -> PosteriorSeries:
    """Posterior of ``X`` when releases arrive as a Poisson process of known rate.

    Each particle is a hypothesised release history; a release occurs at the
    start of each step with probability ``1 - exp(-rate * dt)``.  For a
    (damped-)linear shape the superposed fake-news term is carried exactly by
    ``s1 = sum exp(-alpha u_r)`` and ``s2 = sum u_r exp(-alpha u_r)``, with
    ``F = mu * s2``.  ``X`` is integrated out per particle, so each particle
    keeps a log-weight per outcome.  Systematic resampling when ESS < N/2.
    """
    if n_particles < MIN_PARTICLES:
        raise ValueError(f"n_particles must be >= {MIN_PARTICLES}, got {n_particles}")
    grid = observed.grid
    dt = grid.dt
    x = outcome.values
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    deta = observed.increments
    P = n_particles
    probs = np.empty((grid.n_steps + 1, x.size))
    probs[0] = outcome.priors

    logw = np.tile(outcome.log_priors, (P, 1))
    if spec.schedule is not None:
        # releases known in law exactly: every particle carries the same path
        dF = np.broadcast_to(fake_news_path(spec.shape, spec.schedule, grid).increments, (P, grid.n_steps))
        q = None
    else:
        q = -np.expm1(-spec.rate * dt)
        decay = np.exp(-spec.shape.decay * dt)
        s1 = np.zeros(P)
        s2 = np.zeros(P)

    for j in range(grid.n_steps):
        if q is None:
            step = dF[:, j]
        else:
            if q > 0:
                s1 = s1 + (gen.random(P) < q)
            new_s2 = decay * (s2 + dt * s1)
            s1 = decay * s1
            step = spec.shape.mu * (new_s2 - s2)
            s2 = new_s2
        resid = deta[j] - sigma * x[None, :] * dt - step[:, None]
        logw = logw - resid * resid / (2 * dt)

        marg = _lse(logw, 1)
        total = _lse(marg, 0)
        probs[j + 1] = np.exp(logw - total).sum(axis=0)
        w = np.exp(marg - total)
        ess = 1.0 / np.sum(w * w)
        if ess < P / 2:
            idx = _systematic_resample(w, gen)
            logw = logw[idx] - marg[idx, None]
            if q is not None:
                s1, s2 = s1[idx], s2[idx]
        else:
            logw = logw - total

    probs /= probs.sum(axis=1, keepdims=True)
    return PosteriorSeries(grid, x, probs)


# ---------------------------------------------------------------------------
# brute-force oracle


@dataclass(frozen=True, eq=False)
class BruteForceResult:
    grid: TimeGrid
    values: np.ndarray
    hypotheses: list
    outcome_probs: np.ndarray  # (n+1, I)
    hypothesis_probs: np.ndarray  # (n+1, H)

    def outcome_series(self) -> PosteriorSeries:
        return PosteriorSeries(self.grid, self.values, self.outcome_probs)


def single_release_hypotheses(prior: ReleasePrior, grid: TimeGrid) -> list[tuple[tuple[float, ...], float]]:
    """Release hypotheses ``(schedule, mass)`` for one release: each atom, plus none."""
    nodes, masses, beyond, _ = prior.atoms(grid)
    hyps = [((float(u),), float(w)) for u, w in zip(nodes, masses)]
    if beyond > 0:
        hyps.append(((), float(beyond)))
    return hyps


def all_release_configurations(grid: TimeGrid, prob: float) -> list[tuple[tuple[float, ...], float]]:
    """Every subset of step-start nodes as a release schedule, each node independently w.p. ``prob``."""
    n = grid.n_steps
    t = grid.times
    hyps = []
    for bits in itertools.product((0, 1), repeat=n):
        k = sum(bits)
        sched = tuple(float(t[j]) for j in range(n) if bits[j])
        hyps.append((sched, prob**k * (1 - prob) ** (n - k)))
    return hyps


def brute_force_posterior(
    outcome: DiscreteOutcome,
    sigma: float,
    shape: FakeNewsShape,
    hypotheses,
    observed: SamplePath,
) -> BruteForceResult:
    """Exact Bayes over outcomes and an explicit finite set of release schedules.

    The likelihood of each (outcome, schedule) pair is the product of Gaussian
    densities of the observed increments, mean ``sigma x dt + dF`` and variance
    ``dt``.  Only small grids are accepted.
    """
    grid = observed.grid
    if grid.n_steps > MAX_BRUTE_FORCE_STEPS:
        raise ValueError(f"brute-force oracle limited to {MAX_BRUTE_FORCE_STEPS} steps, got {grid.n_steps}")
    masses = np.array([w for _, w in hypotheses], dtype=float)
    if abs(masses.sum() - 1.0) > 1e-9:
        raise ValueError("hypothesis masses must sum to 1")
    dF = np.array([fake_news_path(shape, ReleaseSchedule(np.array(s)), grid).increments for s, _ in hypotheses])
    deta = observed.increments
    x = outcome.values
    sd = np.sqrt(grid.dt)
    # (H, I, n)
    loglik = norm.logpdf(deta[None, None, :], loc=sigma * x[None, :, None] * grid.dt + dF[:, None, :], scale=sd)
    cum = np.concatenate([np.zeros(loglik.shape[:2] + (1,)), np.cumsum(loglik, axis=2)], axis=2)
    with np.errstate(divide="ignore"):
        prior = np.log(masses)[:, None] + outcome.log_priors[None, :]
    joint = prior[:, :, None] + cum  # (H, I, n+1)
    flat = joint.reshape(-1, joint.shape[2])
    post = np.exp(flat - logsumexp(flat, axis=0)).reshape(joint.shape)
    return BruteForceResult(
        grid=grid,
        values=x,
        hypotheses=[s for s, _ in hypotheses],
        outcome_probs=post.sum(axis=0).T,
        hypothesis_probs=post.sum(axis=1).T,
    )
