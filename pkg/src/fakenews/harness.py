"""Scenario dispatch, CSV/manifest emission and optional SVG figures."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .fake_news import FakeNewsShape, FakeNewsSpec
from .filters import (
    DiscreteOutcome,
    ReleasePrior,
    SingleReleaseFilter,
    category1_posterior,
    category2_posterior_multi,
    category3_posterior,
)
from .microstructure import (
    CATEGORIES,
    CandidateProfile,
    ChannelSpec,
    MicrostructureScenario,
    MixtureComponent,
    PopulationMixture,
    average_over_runs,
)
from .parallel import chunked, parallel_map
from .plotting import PlotSpec, emit_plot
from .representative import (
    RUN_FIELDS,
    ElectionScenario,
    ReferendumScenario,
    RunRecord,
    flip_probability,
    simulate_election,
    simulate_referendum,
)
from .stochastic import RngStream, SamplePath, TimeGrid

__all__ = [
    "RunOutput",
    "run_scenario",
    "format_number",
    "write_csv",
    "path_header",
    "read_eta_csv",
    "referendum_from_config",
    "election_from_config",
    "micro_from_config",
]

log = logging.getLogger(__name__)

SUMMARY_HEADER = ("flips", "runs", "fraction", "ci_low", "ci_high")


def format_number(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if np.isnan(v):
        return "nan"
    return format(v, ".12g")


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
    return path


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# config -> scenario objects


def _grid(cfg: ScenarioConfig) -> TimeGrid:
    return TimeGrid(float(cfg["horizon"]), int(cfg["n_steps"]))


def referendum_from_config(cfg: ScenarioConfig) -> ReferendumScenario:
    return ReferendumScenario(
        sigma=cfg["sigma"], mu=cfg["mu"], rate=cfg["rate"], p=cfg["p"], grid=_grid(cfg),
        forced_x=cfg["forced_x"], forced_tau=cfg["forced_tau"],
        belief_mu=cfg["belief_mu"], belief_rate=cfg["belief_rate"],
    )


def election_from_config(cfg: ScenarioConfig) -> ElectionScenario:
    extra = {}
    if cfg.kind == "election":
        sched = cfg["forced_schedule"]
        extra = dict(
            category2=cfg["category2"], n_particles=cfg["n_particles"], forced_x=cfg["forced_x"],
            forced_schedule=tuple(sched) if sched is not None else None,
            belief_mu=cfg["belief_mu"], belief_alpha=cfg["belief_alpha"], belief_rate=cfg["belief_rate"],
        )
    return ElectionScenario(sigma=cfg["sigma"], mu=cfg["mu"], alpha=cfg["alpha"], rate=cfg["rate"],
                            p=cfg["p"], grid=_grid(cfg), **extra)


def _bound(v, default):
    return default if v is None else float(v)


def micro_from_config(cfg: ScenarioConfig) -> MicrostructureScenario:
    names = list(cfg["candidates"])
    candidates = tuple(CandidateProfile(n, cfg["candidates"][n]) for n in names)
    K = candidates[0].factors.size
    outcome = DiscreteOutcome.symmetric(cfg["p"])
    signs = cfg["fake_news_signs"]
    channels = []
    for k in range(K):
        row = []
        for name in names:
            s = signs.get(name, [0.0] * K)[k]
            fake = None
            if s != 0 and cfg["mu"] != 0:
                fake = FakeNewsSpec(FakeNewsShape.damped(np.sign(s) * abs(cfg["mu"]), cfg["alpha"]), rate=cfg["rate"])
            row.append(ChannelSpec(cfg["sigma"], outcome, fake))
        channels.append(tuple(row))
    mixture = PopulationMixture(tuple(
        MixtureComponent(
            c["fraction"], c["center"], c["std"],
            [_bound(v, -np.inf) for v in c["lower"]], [_bound(v, np.inf) for v in c["upper"]],
        )
        for c in cfg["mixture"]
    ))
    return MicrostructureScenario(
        candidates, tuple(channels), mixture, _grid(cfg), n_voters=cfg["n_voters"],
        n_particles=cfg["n_particles"], resample_population=cfg["resample_population"],
        readout_every=cfg["readout_every"],
    )


# ---------------------------------------------------------------------------
# path CSVs


def path_header(n_outcomes: int) -> list[str]:
    """Binary outcomes carry ``p1_cat*`` only; more outcomes append ``p0``, ``p2``, ... columns."""
    header = ["t", "eta", "xi", "f"] + [f"p1_cat{c}" for c in CATEGORIES]
    if n_outcomes > 2:
        for i in _extra_outcomes(n_outcomes):
            header += [f"p{i}_cat{c}" for c in CATEGORIES]
    return header


def _extra_outcomes(n_outcomes: int) -> list[int]:
    return [i for i in range(n_outcomes) if i != 1] if n_outcomes > 2 else []


def _path_rows(t, eta, xi, f, posteriors: dict, n_outcomes: int):
    cols = [t, eta, xi, f]
    nan = np.full(t.size, np.nan)
    order = [1] + _extra_outcomes(n_outcomes)
    for i in order:
        for c in CATEGORIES:
            ps = posteriors.get(c)
            cols.append(ps.probs[:, i] if ps is not None else nan)
    return np.column_stack(cols)


def _record_rows(rec: RunRecord):
    g = rec.eta.grid
    return _path_rows(g.times, rec.eta.values, rec.xi.values, rec.fake.values, rec.posteriors, 2)


def _paths_chunk(runs, scenario, seed, simulate):
    return [(r, _record_rows(rec), rec.schedule.times) for r in runs
            for rec in [simulate(scenario, RngStream(seed, (r,)))]]


def read_eta_csv(path) -> tuple[SamplePath, SamplePath | None]:
    """Load ``t,eta[,f]`` from a CSV; ``t`` must be a uniform grid starting at 0."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "t" not in fields or "eta" not in fields:
            raise ValueError(f"{path}: input CSV needs columns t and eta")
        rows = list(reader)
    t = np.array([float(r["t"]) for r in rows])
    if t.size < 2 or t[0] != 0.0:
        raise ValueError(f"{path}: time column must start at 0 and have at least two rows")
    grid = TimeGrid(float(t[-1]), t.size - 1)
    if not np.allclose(t, grid.times, rtol=0, atol=1e-9 * max(1.0, grid.horizon)):
        raise ValueError(f"{path}: time column must be a uniform grid")
    eta = SamplePath(grid, [float(r["eta"]) for r in rows])
    fake = SamplePath(grid, [float(r["f"]) for r in rows]) if "f" in fields else None
    return eta, fake


# ---------------------------------------------------------------------------


@dataclass
class RunOutput:
    out_dir: Path
    files: list[Path]
    manifest: Path
    summary: dict


def _plot_paths(out: Path, csv_path: Path, releases, categories, stem: str) -> list[Path]:
    labels = {1: "Category I", 2: "Category II", 3: "Category III"}
    series = [f"p1_cat{c}" for c in categories]
    a = emit_plot(csv_path, PlotSpec(series, [labels[c] for c in categories], list(releases),
                                     ylabel="P(X = 1)", ylim=(0, 1)), out / f"{stem}.svg")
    b = emit_plot(csv_path, PlotSpec(["xi", "eta"], ["xi (clean)", "eta (with fake news)"], list(releases),
                                     ylabel="information"), out / f"{stem}_info.svg")
    return [a, b]


def _run_paths(cfg, out: Path, plot: bool, files: list, kind: str) -> dict:
    if kind == "referendum":
        scenario, simulate = referendum_from_config(cfg), simulate_referendum
        cats = CATEGORIES
    else:
        scenario, simulate = election_from_config(cfg), simulate_election
        cats = CATEGORIES if scenario.category2 else (1, 3)
    n_runs, seed, threads = cfg["n_runs"], cfg["seed"], cfg["threads"]
    work = partial(_paths_chunk, scenario=scenario, seed=seed, simulate=simulate)
    results = [item for chunk in parallel_map(work, chunked(n_runs, threads), threads) for item in chunk]
    header = path_header(2)
    release_rows = []
    for r, rows, taus in results:
        stem = "path" if n_runs == 1 else f"path_{r:04d}"
        p = write_csv(out / f"{stem}.csv", header, rows)
        files.append(p)
        release_rows += [(r, tau) for tau in taus]
        if plot:
            files.extend(_plot_paths(out, p, taus, cats, stem))
    files.append(write_csv(out / "releases.csv", ("run", "tau"), release_rows))
    return {"runs": n_runs, "releases": len(release_rows)}


def _run_flip(cfg, out: Path, plot: bool, files: list) -> dict:
    scenario = election_from_config(cfg)
    res = flip_probability(scenario, cfg["n_runs"], cfg["seed"], cfg["threads"], keep_runs=cfg["keep_runs"])
    lo, hi = res.ci
    files.append(write_csv(out / "summary.csv", SUMMARY_HEADER, [(res.flips, res.runs, res.fraction, lo, hi)]))
    if res.records is not None:
        files.append(write_csv(out / "runs.csv", RUN_FIELDS, res.records))
    return {"flips": res.flips, "runs": res.runs, "fraction": res.fraction, "ci_low": lo, "ci_high": hi}


def _run_micro(cfg, out: Path, plot: bool, files: list) -> dict:
    scenario = micro_from_config(cfg)
    avg = average_over_runs(scenario, cfg["n_runs"], cfg["seed"], cfg["threads"])
    header = ["t"] + [f"share_{name}_cat{c}" for name in avg.names for c in CATEGORIES]
    cols = [avg.times] + [avg.shares[c][:, l] for l in range(len(avg.names)) for c in CATEGORIES]
    p = write_csv(out / "shares.csv", header, np.column_stack(cols))
    files.append(p)
    if plot:
        first = avg.names[0]
        labels = {1: "Category I", 2: "Category II", 3: "Category III"}
        files.append(emit_plot(p, PlotSpec([f"share_{first}_cat{c}" for c in CATEGORIES],
                                           [labels[c] for c in CATEGORIES],
                                           ylabel=f"share voting {first}"), out / "shares.svg"))
    final = {f"share_{name}_cat{c}": float(avg.shares[c][-1, l])
             for l, name in enumerate(avg.names) for c in CATEGORIES}
    return {"final": final}


def _run_filter(cfg, out: Path, plot: bool, files: list) -> dict:
    if cfg["input"] is None:
        raise ValueError("filter needs an input CSV (--input or config key 'input')")
    eta, fake = read_eta_csv(cfg["input"])
    grid = eta.grid
    if cfg["values"] is not None:
        outcome = DiscreteOutcome(cfg["values"], cfg["priors"])
    else:
        outcome = DiscreteOutcome.binary(cfg["p"])
    sigma = cfg["sigma"]
    shape = FakeNewsShape(cfg["shape"], cfg["mu"], cfg["alpha"])
    posts = {1: category1_posterior(outcome, sigma, eta)}
    if cfg["release_model"] == "single":
        prior = ReleasePrior.exponential(cfg["rate"]) if cfg["rate"] > 0 else ReleasePrior.never()
        posts[2] = SingleReleaseFilter(outcome, sigma, shape, prior, eta).posterior()
    else:
        posts[2] = category2_posterior_multi(outcome, sigma, FakeNewsSpec(shape, rate=cfg["rate"]), eta,
                                             cfg["n_particles"], RngStream(cfg["seed"], (0,)))
    nan = np.full(grid.n_steps + 1, np.nan)
    if fake is not None:
        posts[3] = category3_posterior(outcome, sigma, eta, fake)
        xi, f = (eta - fake).values, fake.values
    else:
        posts[3] = None
        xi, f = nan, nan
    rows = _path_rows(grid.times, eta.values, xi, f, posts, len(outcome))
    p = write_csv(out / "filtered.csv", path_header(len(outcome)), rows)
    files.append(p)
    if plot and len(outcome) == 2:
        cats = [c for c in CATEGORIES if posts[c] is not None]
        labels = {1: "Category I", 2: "Category II", 3: "Category III"}
        files.append(emit_plot(p, PlotSpec([f"p1_cat{c}" for c in cats], [labels[c] for c in cats],
                                           ylabel="P(X = x_1)", ylim=(0, 1)), out / "filtered.svg"))
    return {"n_steps": grid.n_steps}


_DISPATCH = {
    "referendum": partial(_run_paths, kind="referendum"),
    "election": partial(_run_paths, kind="election"),
    "flip-prob": _run_flip,
    "micro": _run_micro,
    "filter": _run_filter,
}


def run_scenario(cfg: ScenarioConfig, plot: bool = False) -> RunOutput:
    """Run the configured scenario and write its CSVs, figures and ``manifest.json``.

    Files written before a failure are removed again.
    """
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    start = time.perf_counter()
    try:
        summary = _DISPATCH[cfg.kind](cfg, out, plot, files)
        manifest = {
            "tool": "fakenews",
            "version": __version__,
            "scenario": cfg.kind,
            "config": cfg.to_dict(),
            "master_seed": cfg["seed"],
            "runtime_seconds": round(time.perf_counter() - start, 3),
            "summary": summary,
            "files": [{"path": p.name, "sha256": _digest(p)} for p in files],
        }
        mpath = out / "manifest.json"
        mpath.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    except BaseException:
        for p in files:
            p.unlink(missing_ok=True)
        raise
    log.info("wrote %d files to %s", len(files) + 1, out)
    return RunOutput(out, files, mpath, summary)
