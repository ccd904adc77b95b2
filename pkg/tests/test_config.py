import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pshlab.config import DEFAULTS, OPERATIONS, load_config, parse_config, with_overrides
from pshlab.errors import ConfigError


def test_empty_config_runs_acceptance(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    cfg = load_config(str(p))
    assert cfg.operation == "acceptance"
    assert cfg.numeric["criteria"] is None
    assert load_config(None) == cfg


def test_every_default_lands_in_a_section():
    cfg = parse_config({})
    flat = cfg.echo()
    for key in DEFAULTS:
        if not key.startswith("output."):
            assert key in flat


def test_unknown_key_reports_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "numeric.seed": 1,\n  "numeric.sede": 2\n}\n')
    with pytest.raises(ConfigError, match=r"numeric.sede.*line 3"):
        load_config(str(p))


def test_json_syntax_error_reports_position(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "numeric.seed": 1,\n}\n')
    with pytest.raises(ConfigError, match=r"c.json:3:1"):
        load_config(str(p))


def test_domain_parameters_pass_through():
    cfg = parse_config({"domain.name": "cone", "domain.C": 2.0})
    assert cfg.domain_params() == {"C": 2.0}


@pytest.mark.parametrize("bad", [
    {"operation": "domain.explode"},
    {"numeric.nu": 0},
    {"numeric.nu": -1e-3},
    {"numeric.samples": 0},
    {"numeric.samples": 2.5},
    {"numeric.seed": -1},
    {"numeric.seed": True},
    {"exhaustion.rho": 1.0},
    {"output.format": "xml"},
    {"numeric.criteria": [0]},
    {"numeric.criteria": "1,2"},
])
def test_out_of_range_knobs(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_not_an_object():
    with pytest.raises(ConfigError):
        parse_config([1, 2])


def test_overrides_ignore_none():
    cfg = parse_config({"numeric.seed": 3})
    assert with_overrides(cfg, {"numeric.seed": None}).seed == 3
    assert with_overrides(cfg, {"numeric.seed": 4}).seed == 4


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(OPERATIONS), st.integers(0, 2 ** 31), st.floats(1e-6, 1e-2))
def test_echo_round_trip(op, seed, nu):
    cfg = parse_config({"operation": op, "numeric.seed": seed, "numeric.nu": nu})
    again = parse_config(json.loads(json.dumps(cfg.echo())))
    assert again == with_overrides(cfg, {"output.dir": None})
