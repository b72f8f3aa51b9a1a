"""Acceptance criteria, one test each; every test prints a PASS/FAIL line with its measurements.

Run ``pytest tests/test_acceptance.py -v`` (lines appear even without ``-s``) or
``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from fakenews.config import parse_config
from fakenews.fake_news import FakeNewsShape, FakeNewsSpec, ReleaseSchedule, fake_news_path, information_path
from fakenews.filters import (
    DiscreteOutcome,
    ReleasePrior,
    SingleReleaseFilter,
    all_release_configurations,
    brute_force_posterior,
    category1_posterior,
    category2_estimate_single,
    category2_posterior_multi,
    category2_posterior_single,
    category3_posterior,
    conditional_estimate_given_tau,
    release_time_mean,
    single_release_hypotheses,
)
from fakenews.harness import run_scenario
from fakenews.microstructure import average_over_runs, two_candidate_scenario
from fakenews.representative import ElectionScenario, flip_probability
from fakenews.stochastic import RngStream, SamplePath, TimeGrid, brownian_path

# worst normalisation error seen by each criterion, checked together at the end
NORMALISATION: dict[str, float] = {}


def _report(capsys, number, title, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def _norm_err(probs) -> float:
    return float(np.max(np.abs(np.asarray(probs).sum(axis=-1) - 1.0)))


def _track(key, err):
    NORMALISATION[key] = max(NORMALISATION.get(key, 0.0), float(err))


def test_criterion_1_flip_probability(capsys):
    sc = ElectionScenario(sigma=0.3, mu=2.0, alpha=5.0, rate=10.0, p=0.5, grid=TimeGrid(1.0, 500))
    t0 = time.perf_counter()
    res = flip_probability(sc, 10_000, 20261016)
    elapsed = time.perf_counter() - t0
    lo, hi = res.ci
    ok = abs(res.fraction - 0.30) <= 0.10
    _report(capsys, 1, "flip fraction within 0.30 +/- 0.10", ok,
            f"fraction={res.fraction:.4f} (95% CI {lo:.4f}-{hi:.4f}), flips={res.flips}/{res.runs}, {elapsed:.1f}s")


def test_criterion_2_oracle_equivalence(capsys):
    grid = TimeGrid(1.0, 8)
    rate = 3.0
    nodes = grid.times[:-1]
    masses = np.diff(-np.expm1(-rate * grid.times))
    prior = ReleasePrior.grid_density(nodes, masses, math.exp(-rate), 1.0 + 1.0 / rate)
    hyps = single_release_hypotheses(prior, grid)
    hyp_tau = np.array([s[0] if s else 1.0 + 1.0 / rate for s, _ in hyps])
    gen = np.random.default_rng(20261016)
    worst = {"cat1": 0.0, "cat2": 0.0, "tv": 0.0, "mean": 0.0}
    t0 = time.perf_counter()
    for i in range(50):
        sigma = float(gen.uniform(0.2, 1.5))
        shape = FakeNewsShape.linear(float(gen.uniform(-2.0, 2.0)))
        out = DiscreteOutcome.binary(float(gen.uniform(0.1, 0.9)))
        x = float(gen.integers(0, 2))
        k = gen.choice(len(hyps), p=[w for _, w in hyps])
        schedule = ReleaseSchedule(list(hyps[k][0]))
        B = brownian_path(grid, RngStream(20261016, (2, i)))
        eta = information_path(sigma, x, B, fake_news_path(shape, schedule, grid))

        bf = brute_force_posterior(out, sigma, shape, hyps, eta)
        cat1_bf = brute_force_posterior(out, sigma, shape, [((), 1.0)], eta)
        c1 = category1_posterior(out, sigma, eta)
        worst["cat1"] = max(worst["cat1"], float(np.max(np.abs(c1.probs - cat1_bf.outcome_probs))))
        filt = SingleReleaseFilter(out, sigma, shape, prior, eta)
        _track("criterion 2 posterior rows", _norm_err(filt.posterior().probs))
        _track("criterion 2 posterior rows", _norm_err(bf.outcome_probs))
        for j in range(grid.n_steps + 1):
            t = grid.times[j]
            est = category2_estimate_single(out, sigma, shape, prior, eta, t)
            worst["cat2"] = max(worst["cat2"], abs(est - bf.outcome_probs[j] @ out.values))
            d = filt.density(j)
            _track("criterion 2 release densities", abs(d.total_mass - 1.0))
            active = nodes < t
            node_p = bf.hypothesis_probs[j, :-1]
            oracle = np.concatenate([node_p[active], [node_p[~active].sum() + bf.hypothesis_probs[j, -1]]])
            ours = np.concatenate([d.weights, [d.tail_mass]])
            worst["tv"] = max(worst["tv"], 0.5 * float(np.abs(ours - oracle).sum()))
            worst["mean"] = max(worst["mean"], abs(release_time_mean(prior, d) - bf.hypothesis_probs[j] @ hyp_tau))
    elapsed = time.perf_counter() - t0
    ok = worst["cat1"] <= 1e-10 and worst["cat2"] <= 1e-3 and worst["tv"] <= 1e-3 and elapsed < 10
    _report(capsys, 2, "filters match brute-force enumeration on 8-step grids", ok,
            f"cat1 max err={worst['cat1']:.2e}, cat2 max err={worst['cat2']:.2e}, "
            f"release-time TV={worst['tv']:.2e}, release-time mean err={worst['mean']:.2e}, {elapsed:.2f}s")


def test_criterion_3_exact_identities(capsys):
    grid = TimeGrid(1.0, 200)
    gen = np.random.default_rng(3)
    worst = [0.0, 0.0, 0.0]
    for i in range(100):
        sigma = float(gen.uniform(0.1, 2.0))
        shape = FakeNewsShape.damped(float(gen.uniform(-3, 3)), float(gen.uniform(0, 6)))
        out = DiscreteOutcome.binary(float(gen.uniform(0.05, 0.95)))
        x = float(gen.integers(0, 2))
        tau = float(gen.uniform(0, 1.2))
        schedule = ReleaseSchedule([tau] if tau <= 1.0 else [])
        B = brownian_path(grid, RngStream(3, (i,)))
        F = fake_news_path(shape, schedule, grid)
        eta = information_path(sigma, x, B, F)
        xi = information_path(sigma, x, B, SamplePath.zeros(grid))

        shifted = category1_posterior(out, sigma, eta - F).mean
        direct = [conditional_estimate_given_tau(out, sigma, shape, eta.values[j], grid.times[j], tau)
                  for j in range(grid.n_steps + 1)]
        worst[0] = max(worst[0], float(np.max(np.abs(shifted - direct))))
        c3 = category3_posterior(out, sigma, eta, F)
        worst[1] = max(worst[1], float(np.max(np.abs(c3.probs - category1_posterior(out, sigma, xi).probs))))
        c2 = category2_posterior_single(out, sigma, shape, ReleasePrior.point_mass(tau), eta)
        worst[2] = max(worst[2], float(np.max(np.abs(c2.probs - c3.probs))))
        _track("criterion 3 posterior rows", max(_norm_err(c2.probs), _norm_err(c3.probs)))
    ok = max(worst) <= 1e-12
    _report(capsys, 3, "exact identities over 100 paths", ok,
            f"known-release vs shifted={worst[0]:.2e}, cat3 vs clean cat1={worst[1]:.2e}, "
            f"point-mass cat2 vs cat3={worst[2]:.2e}")


def test_criterion_4_martingale(capsys):
    grid = TimeGrid(1.0, 500)
    p, sigma = 0.3, 1.0
    out = DiscreteOutcome.binary(p)
    checkpoints = [grid.index_of(t) for t in (0.2, 0.4, 0.6, 0.8, 1.0)]
    t0 = time.perf_counter()
    rows = []
    for i in range(5000):
        rng = RngStream(4, (i,))
        x = float(rng.child(0).generator().random() < p)
        eta = information_path(sigma, x, brownian_path(grid, rng.child(1)), SamplePath.zeros(grid))
        ps = category1_posterior(out, sigma, eta)
        _track("criterion 4 posterior rows", _norm_err(ps.probs))
        rows.append(ps.probs[checkpoints, 1])
    elapsed = time.perf_counter() - t0
    rows = np.array(rows)
    mean = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / math.sqrt(len(rows))
    z = np.abs(mean - p) / se
    ok = bool(np.all(z <= 3)) and elapsed < 30
    _report(capsys, 4, "mean Category I posterior equals the prior", ok,
            "means=" + ",".join(f"{m:.4f}" for m in mean) + f", max |z|={z.max():.2f}, {elapsed:.1f}s")


def test_criterion_5_particle_filter_vs_enumeration(capsys):
    grid = TimeGrid(1.0, 8)
    sigma, rate = 1.0, 2.0
    shape = FakeNewsShape.damped(2.0, 5.0)
    out = DiscreteOutcome.binary(0.5)
    eta = information_path(sigma, 0.0, brownian_path(grid, RngStream(5, (0,))),
                           fake_news_path(shape, ReleaseSchedule([0.25, 0.5]), grid))
    q = -math.expm1(-rate * grid.dt)
    t0 = time.perf_counter()
    exact = brute_force_posterior(out, sigma, shape, all_release_configurations(grid, q), eta).outcome_probs[:, 1]
    reps = []
    for r in range(20):
        pf = category2_posterior_multi(out, sigma, FakeNewsSpec(shape, rate=rate), eta, 10_000, RngStream(5, (1, r)))
        _track("criterion 5 posterior rows", _norm_err(pf.probs))
        reps.append(pf.probs[:, 1])
    elapsed = time.perf_counter() - t0
    reps = np.array(reps)
    se = reps.std(axis=0, ddof=1) / math.sqrt(len(reps))
    err = np.abs(reps.mean(axis=0) - exact)
    ok = bool(np.all(err <= 3 * se + 1e-12)) and elapsed < 60
    z = err[1:] / se[1:]
    _report(capsys, 5, "particle filter matches 2^8 enumeration", ok,
            f"max |err|={err.max():.2e}, max |z|={z.max():.2f}, {elapsed:.1f}s")


def test_criterion_6_vote_share_ordering(capsys):
    sc = two_candidate_scenario(n_voters=100_000, readout_every=50)
    t0 = time.perf_counter()
    avg = average_over_runs(sc, 100, 20261016)
    elapsed = time.perf_counter() - t0
    s1, s2, s3 = (float(avg.shares[c][-1, 0]) for c in (1, 2, 3))
    for c in (1, 2, 3):
        _track("criterion 6 share rows", _norm_err(avg.shares[c]))
    ok = s3 > 0.55 and s3 >= s2 >= s1 and (s2 - s1) >= 0.5 * (s3 - s1) and elapsed < 300
    _report(capsys, 6, "final share of A ordered III >= II >= I, II recovers most of the gap", ok,
            f"share_A cat1={s1:.4f} cat2={s2:.4f} cat3={s3:.4f}, "
            f"recovered={(s2 - s1) / (s3 - s1):.2f}, {elapsed:.1f}s")


DETERMINISM_CASES = {
    "referendum": {"n_runs": 3},
    "election": {"n_runs": 3, "category2": True, "n_particles": 200},
    "flip-prob": {"n_runs": 400, "n_steps": 200},
    "micro": {"n_runs": 4, "n_voters": 5000, "n_particles": 150, "n_steps": 100, "readout_every": 5},
}


def test_criterion_7_determinism(tmp_path, capsys):
    import json

    mismatches = []
    compared = 0
    for kind, params in DETERMINISM_CASES.items():
        outputs = []
        for threads in (1, 8):
            cfg = parse_config(json.dumps({**params, "seed": 77}), kind,
                               {"threads": threads, "out": str(tmp_path / f"{kind}-{threads}")})
            outputs.append(run_scenario(cfg))
        a, b = outputs
        for f in a.files:
            compared += 1
            if f.read_bytes() != (b.out_dir / f.name).read_bytes():
                mismatches.append(f"{kind}/{f.name}")
    src = tmp_path / "referendum-1" / "path_0000.csv"
    filtered = []
    for threads in (1, 8):
        cfg = parse_config('{"release_model": "poisson", "n_particles": 200}', "filter",
                           {"input": str(src), "threads": threads, "out": str(tmp_path / f"filter-{threads}")})
        filtered.append((run_scenario(cfg).out_dir / "filtered.csv").read_bytes())
    compared += 1
    if filtered[0] != filtered[1]:
        mismatches.append("filter/filtered.csv")
    ok = not mismatches
    _report(capsys, 7, "byte-identical CSVs at 1 and 8 workers", ok,
            f"{compared} CSV files compared, mismatches: {mismatches or 'none'}")


def _normalisation_sweep():
    grid = TimeGrid(1.0, 100)
    shape = FakeNewsShape.damped(1.5, 3.0)
    for i in range(20):
        out = DiscreteOutcome([-1.0, 0.0, 2.0], [0.2, 0.5, 0.3])
        eta = information_path(0.8, 0.0, brownian_path(grid, RngStream(8, (i,))),
                               fake_news_path(shape, ReleaseSchedule([0.3]), grid))
        _track("sweep posterior rows", _norm_err(category1_posterior(out, 0.8, eta).probs))
        filt = SingleReleaseFilter(out, 0.8, shape, ReleasePrior.exponential(2.0), eta)
        _track("sweep posterior rows", _norm_err(filt.posterior().probs))
        _track("sweep release densities", float(np.max(np.abs(filt.node_weights.sum(axis=0) + filt.tail_weights - 1))))
        pf = category2_posterior_multi(out, 0.8, FakeNewsSpec(shape, rate=3.0), eta, 200, RngStream(8, (1, i)))
        _track("sweep posterior rows", _norm_err(pf.probs))


def test_criterion_8_normalisation(capsys):
    _normalisation_sweep()
    worst = max(NORMALISATION.values())
    ok = worst <= 1e-9
    detail = ", ".join(f"{k}={v:.1e}" for k, v in sorted(NORMALISATION.items()))
    _report(capsys, 8, "posterior rows and release densities sum to one", ok, f"worst={worst:.1e}; {detail}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
