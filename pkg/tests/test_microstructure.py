import math
import time

import numpy as np
import pytest

from fakenews.filters import DiscreteOutcome
from fakenews.microstructure import (
    CandidateProfile,
    ChannelSpec,
    MicrostructureScenario,
    MixtureComponent,
    PopulationMixture,
    VoterPopulation,
    _shares_from_estimates,
    average_over_runs,
    channel_posteriors,
    choices,
    two_bloc_mixture,
    two_candidate_scenario,
    sample_population,
    simulate_channels,
    vote_share_series,
    voter_choice,
)
from fakenews.stochastic import RngStream, TimeGrid

SMALL = TimeGrid(1.0, 100)


# --- populations -------------------------------------------------------------


def test_two_bloc_split():
    counts = two_bloc_mixture().counts(1_000_000)
    assert counts.tolist() == [550_000, 450_000]
    assert two_bloc_mixture().counts(7).sum() == 7


def test_population_respects_truncation():
    pop = sample_population(two_bloc_mixture(), 20_000, RngStream(1))
    assert pop.weights.shape == (20_000, 3)
    assert np.all(pop.weights[:, 1] >= 0)
    assert np.all((pop.weights[:, 2] >= 0) & (pop.weights[:, 2] <= 1))
    assert np.count_nonzero(pop.component == 0) == 11_000
    assert np.all((pop.coins >= 0) & (pop.coins < 1))


def test_single_voter():
    pop = sample_population(two_bloc_mixture(), 1, RngStream(2))
    assert pop.n == 1 and 0 <= pop.weights[0, 2] <= 1 and pop.weights[0, 1] >= 0


def test_single_component_mean():
    center = np.array([0.3, -1.0, 2.0])
    mix = PopulationMixture((MixtureComponent(1.0, center, 0.7, -np.inf, np.inf),))
    pop = sample_population(mix, 100_000, RngStream(3))
    se = 0.7 / math.sqrt(100_000)
    assert np.all(np.abs(pop.weights.mean(axis=0) - center) < 3 * se)


def test_mixture_validation():
    with pytest.raises(ValueError):
        PopulationMixture(())
    with pytest.raises(ValueError):
        PopulationMixture((MixtureComponent(0.5, [0.0], 1.0, -np.inf, np.inf),))
    with pytest.raises(ValueError):
        sample_population(two_bloc_mixture(), 0, RngStream(0))


# --- channels ---------------------------------------------------------------------


def test_agnostic_estimates_start_at_zero():
    sc = two_candidate_scenario(grid=SMALL, n_voters=10, n_particles=200)
    run = simulate_channels(sc, RngStream(4, (0,)))
    for c in (1, 2, 3):
        assert run.estimates[c].shape == (2, 3, SMALL.n_steps + 1)
        np.testing.assert_allclose(run.estimates[c][:, :, 0], 0.0, atol=1e-15)
        assert np.all(np.abs(run.estimates[c]) <= 1)


def test_clean_channels_categories_agree():
    sc = two_candidate_scenario(grid=SMALL, n_voters=10, fake_news=False)
    run = simulate_channels(sc, RngStream(5, (0,)))
    np.testing.assert_array_equal(run.estimates[1], run.estimates[3])
    np.testing.assert_allclose(run.estimates[2], run.estimates[1], atol=1e-9)


def test_channel_posteriors_match_joint_simulation():
    sc = two_candidate_scenario(grid=SMALL, n_voters=10, n_particles=200)
    run = simulate_channels(sc, RngStream(6, (0,)))
    for c in (1, 2, 3):
        table = channel_posteriors(sc, RngStream(6, (0,)), c)
        assert len(table) == 3 and all(len(row) == 2 for row in table)
        for k in range(3):
            for l in range(2):
                np.testing.assert_array_equal(table[k][l].mean, run.estimates[c][l, k])
                np.testing.assert_allclose(table[k][l].probs.sum(axis=1), 1.0, atol=1e-9)


def test_fake_news_direction():
    sc = two_candidate_scenario(grid=SMALL, n_voters=10)
    run = simulate_channels(sc, RngStream(7, (0,)))
    for k in range(3):
        for l, sign in ((0, -1), (1, 1)):
            sched = run.schedules[k][l]
            if len(sched):
                assert np.sign(sc.channels[k][l].fake.shape.mu) == sign


# --- choices --------------------------------------------------------------


def test_voter_choice_examples():
    est = np.array([[1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]])
    assert voter_choice([1, 1, 1], est, 0.9) == 0
    assert voter_choice([-1, -1, -1], est, 0.1) == 1
    tie = np.zeros((3, 3))
    assert [voter_choice([1, 2, 3], tie, c) for c in (0.0, 0.34, 0.99)] == [0, 1, 2]
    with pytest.raises(ValueError):
        voter_choice([1, 1], est, 0.5)


def test_coin_flip_share_at_time_zero():
    n = 1_000_000
    pop = sample_population(two_bloc_mixture(), n, RngStream(8))
    shares = _shares_from_estimates(pop, np.zeros((2, 3, 1)))
    assert abs(shares[0, 0] - 0.5) < 3 * math.sqrt(0.25 / n)


def test_positive_rescaling_never_changes_choices():
    gen = np.random.default_rng(9)
    W = gen.normal(size=(5000, 3))
    E = gen.normal(size=(3, 3, 20))
    E[:, :, 0] = 0.0
    E[1, :, 1] = E[0, :, 1]
    coins = gen.random(5000)
    base = choices(W, E, coins)
    for c in (2.0**-10, 0.5, 4.0, 2.0**20):
        np.testing.assert_array_equal(choices(c * W, E, coins), base)
    scale = 2.0 ** gen.integers(-30, 30, size=(5000, 1))
    np.testing.assert_array_equal(choices(scale * W, E, coins), base)


def test_two_candidate_fast_path_matches_general():
    gen = np.random.default_rng(10)
    pop = VoterPopulation(gen.normal(size=(3000, 3)), gen.random(3000), np.zeros(3000, int))
    E = np.round(gen.normal(size=(2, 3, 40)), 1)
    E[:, :, :3] = 0.0
    fast = _shares_from_estimates(pop, E)
    pick = choices(pop.weights, E, pop.coins)
    slow = np.stack([(pick == l).mean(axis=0) for l in range(2)], axis=1)
    np.testing.assert_array_equal(fast, slow)


def test_three_candidates_shares():
    cands = tuple(CandidateProfile(n, [v]) for n, v in (("a", 1.0), ("b", 0.0), ("c", -1.0)))
    out = DiscreteOutcome([-1.0, 0.0, 1.0], [1 / 3, 1 / 3, 1 / 3])
    chans = ((ChannelSpec(0.5, out),) * 3,)
    mix = PopulationMixture((MixtureComponent(1.0, [0.0], 1.0, -np.inf, np.inf),))
    sc = MicrostructureScenario(cands, chans, mix, SMALL, n_voters=2000)
    pop = sample_population(mix, 2000, RngStream(11))
    s = vote_share_series(sc, pop, RngStream(11, (0,)))
    for c in (1, 2, 3):
        np.testing.assert_allclose(s.shares[c].sum(axis=1), 1.0, atol=1e-12)
        assert s.shares[c].shape == (SMALL.n_steps + 1, 3)


# --- share series ---------------------------------------------------------------


def test_shares_sum_to_one_and_unanimity():
    sc = two_candidate_scenario(grid=SMALL, n_voters=500, n_particles=200)
    rng = RngStream(12, (0,))
    pop = sample_population(sc.mixture, 500, rng.child(10))
    s = vote_share_series(sc, pop, rng)
    for c in (1, 2, 3):
        assert np.all(s.shares[c].sum(axis=1) == 1.0)
    same = VoterPopulation(np.tile([1.0, 0.5, 0.2], (500, 1)), pop.coins, pop.component)
    u = vote_share_series(sc, same, rng)
    for c in (1, 2, 3):
        assert set(np.unique(u.shares[c][1:, 0])) <= {0.0, 1.0}


def test_single_run_average_equals_run():
    sc = two_candidate_scenario(grid=SMALL, n_voters=2000, n_particles=200, readout_every=7)
    avg = average_over_runs(sc, 1, 13)
    rng = RngStream(13, (0,))
    pop = sample_population(sc.mixture, sc.n_voters, rng.child(10))
    one = vote_share_series(sc, pop, rng)
    assert avg.nodes.tolist() == one.nodes.tolist() and avg.nodes[-1] == SMALL.n_steps
    for c in (1, 2, 3):
        np.testing.assert_array_equal(avg.shares[c], one.shares[c])


def test_average_thread_independent():
    sc = two_candidate_scenario(grid=SMALL, n_voters=1000, n_particles=150, readout_every=10)
    a = average_over_runs(sc, 4, 14, threads=1)
    b = average_over_runs(sc, 4, 14, threads=2)
    for c in (1, 2, 3):
        assert a.shares[c].tobytes() == b.shares[c].tobytes()


def test_fixed_population_mode():
    from dataclasses import replace

    sc = replace(two_candidate_scenario(grid=SMALL, n_voters=500, fake_news=False, readout_every=50),
                 resample_population=False)
    avg = average_over_runs(sc, 3, 15, categories=(1,))
    assert avg.shares[1].shape == (3, 2)


def test_symmetric_setup_centres_on_split():
    cands = (CandidateProfile("A", [1.0, 1.0]), CandidateProfile("B", [-1.0, -1.0]))
    out = DiscreteOutcome.symmetric(0.5)
    chans = tuple((ChannelSpec(0.3, out), ChannelSpec(0.3, out)) for _ in range(2))
    mix = PopulationMixture((
        MixtureComponent(0.5, [1.0, 0.5], 0.5, -np.inf, np.inf),
        MixtureComponent(0.5, [-1.0, -0.5], 0.5, -np.inf, np.inf),
    ))
    sc = MicrostructureScenario(cands, chans, mix, TimeGrid(1.0, 50), n_voters=2000, readout_every=50)
    finals = []
    for r in range(200):
        rng = RngStream(16, (r,))
        pop = sample_population(mix, 2000, rng.child(10))
        finals.append(vote_share_series(sc, pop, rng, categories=(1,)).shares[1][-1, 0])
    finals = np.array(finals)
    assert abs(finals.mean() - 0.5) < 3 * finals.std(ddof=1) / math.sqrt(len(finals))


def test_voter_cost_scales_sublinearly_in_channels():
    sc = two_candidate_scenario(n_voters=10, n_particles=200)
    run = simulate_channels(sc, RngStream(17, (0,)), categories=(1,))
    est = run.estimates[1]
    small = sample_population(sc.mixture, 10_000, RngStream(1))
    large = sample_population(sc.mixture, 100_000, RngStream(1))

    def total(pop):
        t0 = time.perf_counter()
        simulate_channels(sc, RngStream(17, (0,)), categories=(1, 2, 3))
        _shares_from_estimates(pop, est[:, :, ::10])
        return time.perf_counter() - t0

    total(small)
    assert total(large) < 3 * total(small)
