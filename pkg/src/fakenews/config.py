"""Scenario configuration: JSON text in, validated and fully resolved parameters out."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

__all__ = ["ConfigError", "ScenarioConfig", "parse_config", "load_config", "resolve", "DEFAULTS", "KINDS"]

KINDS = ("referendum", "election", "flip-prob", "micro", "filter")

_COMMON = {
    "seed": 0,
    "n_runs": 1,
    "threads": 1,
    "out": "out",
    "horizon": 1.0,
    "n_steps": 500,
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "referendum": {
        **_COMMON,
        "sigma": 0.3, "mu": 0.5, "rate": 3.0, "p": 0.5,
        "forced_x": None, "forced_tau": None, "belief_mu": None, "belief_rate": None,
    },
    "election": {
        **_COMMON,
        "sigma": 0.3, "mu": 2.0, "alpha": 5.0, "rate": 10.0, "p": 0.5,
        "category2": False, "n_particles": 1000,
        "forced_x": None, "forced_schedule": None,
        "belief_mu": None, "belief_alpha": None, "belief_rate": None,
    },
    "flip-prob": {
        **_COMMON, "n_runs": 10_000,
        "sigma": 0.3, "mu": 2.0, "alpha": 5.0, "rate": 10.0, "p": 0.5,
        "keep_runs": False,
    },
    "micro": {
        **_COMMON, "n_runs": 100,
        "sigma": 0.2, "mu": 1.5, "alpha": 4.0, "rate": 4.0, "p": 0.5,
        "n_voters": 100_000, "n_particles": 500,
        "candidates": {"A": [1.0, 1.0, 1.0], "B": [-1.0, -1.0, -1.0]},
        "fake_news_signs": {"A": [-1.0, -1.0, -1.0], "B": [1.0, 1.0, 1.0]},
        "mixture": [
            {"fraction": 0.55, "center": [1.0, 1.0, 1.0], "std": 0.4,
             "lower": [None, 0.0, 0.0], "upper": [None, None, 1.0]},
            {"fraction": 0.45, "center": [-1.0, 1.0, 0.0], "std": 0.4,
             "lower": [None, 0.0, 0.0], "upper": [None, None, 1.0]},
        ],
        "resample_population": True,
        "readout_every": 1,
    },
    "filter": {
        "seed": 0, "threads": 1, "out": "out", "input": None,
        "sigma": 0.3, "p": 0.5, "values": None, "priors": None,
        "shape": "linear", "mu": 0.5, "alpha": 0.0,
        "release_model": "single", "rate": 3.0, "n_particles": 1000,
    },
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    params: dict

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self) -> dict:
        return {"scenario": self.kind, **self.params}


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(f"constraint violated: {message}")


def _number(params, key, low=-math.inf, high=math.inf, low_open=False, what=None):
    v = params[key]
    if v is None:
        return
    _require(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v),
             f"{key} must be a finite number")
    ok_low = v > low if low_open else v >= low
    _require(ok_low and v <= high, what or f"{key} out of range")


def _validate(kind: str, p: dict):
    _number(p, "seed", 0, 2**64 - 1, what="seed must be a 64-bit unsigned integer")
    _require(isinstance(p["seed"], int), "seed must be an integer")
    _require(isinstance(p["threads"], int) and p["threads"] >= 1, "threads must be a positive integer")
    if "n_runs" in p:
        _require(isinstance(p["n_runs"], int) and p["n_runs"] >= 1, "n_runs must be a positive integer")
    if "horizon" in p:
        _number(p, "horizon", 0, low_open=True, what="horizon T > 0")
        _require(isinstance(p["n_steps"], int) and p["n_steps"] >= 1, "n_steps must be a positive integer")
    _number(p, "sigma", 0, what="sigma >= 0")
    _number(p, "p", 0, 1, what="prior probability in [0,1]")
    _number(p, "mu")
    _number(p, "rate", 0, what="release rate >= 0")
    if "n_particles" in p:
        _require(isinstance(p["n_particles"], int) and p["n_particles"] >= 100, "n_particles >= 100")
    if kind in ("election", "flip-prob", "micro"):
        _number(p, "alpha", 0, low_open=True, what="damping rate alpha > 0")
    if kind == "flip-prob":
        _require(p["n_runs"] >= 100, "flip-prob needs n_runs >= 100")
    if kind in ("referendum", "election"):
        _require(p["forced_x"] in (None, 0, 1), "forced_x must be 0 or 1")
        for key in ("belief_mu", "belief_rate", "belief_alpha"):
            if key in p:
                _number(p, key)
        if p.get("belief_rate") is not None:
            _require(p["belief_rate"] >= 0, "belief_rate >= 0")
    if kind == "referendum" and p["forced_tau"] is not None:
        _number(p, "forced_tau", 0, what="forced_tau >= 0")
    if kind == "election" and p["forced_schedule"] is not None:
        s = p["forced_schedule"]
        _require(isinstance(s, list) and all(isinstance(v, (int, float)) for v in s), "forced_schedule must be a list of times")
        _require(all(0 <= v <= p["horizon"] for v in s), "forced_schedule times in [0, horizon]")
        _require(all(b > a for a, b in zip(s, s[1:])), "forced_schedule strictly increasing")
    if kind == "micro":
        cands = p["candidates"]
        _require(isinstance(cands, dict) and len(cands) >= 2, "micro needs at least two candidates")
        dims = {len(v) for v in cands.values()}
        _require(len(dims) == 1, "all candidates need the same number of factors")
        K = dims.pop()
        signs = p["fake_news_signs"]
        _require(isinstance(signs, dict) and set(signs) <= set(cands), "fake_news_signs keys must be candidates")
        _require(all(len(v) == K for v in signs.values()), "fake_news_signs need one entry per factor")
        mix = p["mixture"]
        _require(isinstance(mix, list) and len(mix) >= 1, "mixture needs at least one component")
        for comp in mix:
            _require(set(comp) == {"fraction", "center", "std", "lower", "upper"},
                     "mixture components take fraction, center, std, lower, upper")
            _require(len(comp["center"]) == K and len(comp["lower"]) == K and len(comp["upper"]) == K,
                     "mixture vectors need one entry per factor")
            _require(comp["std"] > 0, "mixture std > 0")
        _require(abs(sum(c["fraction"] for c in mix) - 1.0) < 1e-9, "mixture fractions sum to 1")
        _require(isinstance(p["n_voters"], int) and p["n_voters"] >= 1, "n_voters >= 1")
        _require(isinstance(p["readout_every"], int) and p["readout_every"] >= 1, "readout_every >= 1")
    if kind == "filter":
        _require(p["shape"] in ("linear", "damped_linear"), "shape is 'linear' or 'damped_linear'")
        _require(p["release_model"] in ("single", "poisson"), "release_model is 'single' or 'poisson'")
        _number(p, "alpha", 0, what="damping rate alpha >= 0")
        _require(p["shape"] == "damped_linear" or p["alpha"] == 0, "linear shape takes alpha = 0")
        if p["values"] is not None or p["priors"] is not None:
            _require(p["values"] is not None and p["priors"] is not None and len(p["values"]) == len(p["priors"]),
                     "values and priors must be given together with equal length")
            _require(abs(sum(p["priors"]) - 1.0) < 1e-12 and min(p["priors"]) >= 0, "priors form a probability vector")


def resolve(raw: dict, kind: str | None = None, overrides: dict | None = None) -> ScenarioConfig:
    """Fill defaults for the scenario kind, reject unknown keys and check every constraint."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    declared = raw.pop("scenario", None)
    if kind is None:
        kind = declared
    elif declared is not None and declared != kind:
        raise ConfigError(f"config is for scenario {declared!r}, not {kind!r}")
    if kind not in KINDS:
        raise ConfigError(f"unknown scenario {kind!r}; expected one of {', '.join(KINDS)}")
    defaults = DEFAULTS[kind]
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key(s) for {kind}: {', '.join(unknown)}")
    params = {**json.loads(json.dumps(defaults)), **raw}
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in defaults:
                raise ConfigError(f"option {key} does not apply to {kind}")
            params[key] = value
    _validate(kind, params)
    return ScenarioConfig(kind, params)


def parse_config(text: str, kind: str | None = None, overrides: dict | None = None) -> ScenarioConfig:
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return resolve(raw, kind, overrides)


def load_config(path, kind: str | None = None, overrides: dict | None = None) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), kind, overrides)
