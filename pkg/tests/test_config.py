import json

import pytest

from fakenews.config import DEFAULTS, ConfigError, load_config, parse_config, resolve


def test_minimal_referendum_fills_defaults():
    cfg = parse_config('{"scenario": "referendum", "mu": 0.5, "sigma": 0.3, "rate": 3, "p": 0.5}')
    assert cfg.kind == "referendum"
    assert cfg["horizon"] == 1.0 and cfg["n_steps"] == 500
    assert set(cfg.params) == set(DEFAULTS["referendum"])


def test_prior_out_of_range():
    with pytest.raises(ConfigError, match=r"prior probability in \[0,1\]"):
        parse_config('{"p": 1.3}', "referendum")


def test_election_round_trip():
    text = json.dumps({"scenario": "election", "sigma": 0.3, "mu": 2, "alpha": 5, "p": 0.5, "rate": 10})
    cfg = parse_config(text)
    again = parse_config(json.dumps(cfg.to_dict()))
    assert again == cfg
    assert again.to_dict() == cfg.to_dict()


def test_unknown_key():
    with pytest.raises(ConfigError, match="unknown key.*colour"):
        parse_config('{"colour": 1}', "election")


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config('{\n  "mu": 1,\n  "sigma": ,\n}', "referendum")


def test_kind_mismatch_and_unknown_kind():
    with pytest.raises(ConfigError):
        parse_config('{"scenario": "micro"}', "referendum")
    with pytest.raises(ConfigError, match="unknown scenario"):
        parse_config('{"scenario": "poll"}')
    with pytest.raises(ConfigError):
        resolve([], "referendum")


@pytest.mark.parametrize(
    "kind, text, needle",
    [
        ("election", '{"alpha": 0}', "alpha > 0"),
        ("election", '{"sigma": -1}', "sigma >= 0"),
        ("election", '{"rate": -1}', "release rate"),
        ("flip-prob", '{"n_runs": 50}', "n_runs >= 100"),
        ("election", '{"n_particles": 10}', "n_particles >= 100"),
        ("micro", '{"mixture": []}', "mixture"),
        ("election", '{"forced_schedule": [0.5, 0.2]}', "strictly increasing"),
        ("referendum", '{"n_steps": 0}', "n_steps"),
        ("filter", '{"shape": "cubic"}', "shape"),
        ("referendum", '{"mu": "big"}', "finite number"),
    ],
)
def test_constraint_messages(kind, text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text, kind)


def test_overrides():
    cfg = parse_config("", "flip-prob", {"seed": 42, "n_runs": 200, "threads": None})
    assert cfg["seed"] == 42 and cfg["n_runs"] == 200 and cfg["threads"] == 1
    with pytest.raises(ConfigError):
        parse_config("", "filter", {"n_runs": 5})


def test_load_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"scenario": "micro", "n_voters": 1000}')
    cfg = load_config(path)
    assert cfg["n_voters"] == 1000 and cfg["readout_every"] == 1
