import json

import pytest

from gtflow.config import (ConfigError, load_preset, parse_config, preset_names)

MINIMAL = '{"seed": 4}'


def test_minimal_config_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.seed == 4
    assert cfg["solver"]["alpha"] == 6.0
    assert cfg["network"]["khop"] == 2
    assert cfg.sections["nonlinearity"]["x"]["kind"] == "identity"


def test_round_trip_is_stable():
    cfg = parse_config(MINIMAL)
    echoed = cfg.to_json()
    again = parse_config(echoed)
    assert again.normalized() == cfg.normalized()
    assert again.to_json() == echoed


def test_missing_seed_is_an_error():
    with pytest.raises(ConfigError, match="seed"):
        parse_config("{}")


def test_all_violations_reported_at_once():
    bad = json.dumps({
        "seed": "nope",
        "solver": {"alpha": -1, "etaa": 3},
        "network": {"total_weight": 2.0},
        "bogus": {},
    })
    with pytest.raises(ConfigError) as err:
        parse_config(bad)
    text = str(err.value)
    assert "'seed' must be an integer" in text
    assert "solver.alpha must be positive" in text
    assert "unknown key solver.etaa" in text
    assert "network.total_weight" in text
    assert "unknown section 'bogus'" in text


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown key data.radins"):
        parse_config('{"seed": 1, "data": {"radins": 0.5}}')


def test_enum_values_checked():
    with pytest.raises(ConfigError, match="solver.method"):
        parse_config('{"seed": 1, "solver": {"method": "heun"}}')


def test_nonlinearity_flat_applies_to_both_lines():
    cfg = parse_config('{"seed": 1, "nonlinearity": {"kind": "log_quantizer", "rho": 0.5}}')
    assert cfg.sections["nonlinearity"]["x"]["rho"] == 0.5
    assert cfg.sections["nonlinearity"]["y"]["rho"] == 0.5


def test_nonlinearity_split_lines():
    cfg = parse_config(json.dumps({
        "seed": 1,
        "nonlinearity": {"x": {"kind": "log_quantizer", "rho": 1.0},
                         "y": {"kind": "identity"}},
    }))
    assert cfg.sections["nonlinearity"]["x"]["kind"] == "log_quantizer"
    assert cfg.sections["nonlinearity"]["y"]["kind"] == "identity"


def test_nonlinearity_unknown_kind():
    with pytest.raises(ConfigError, match="nonlinearity.x.kind"):
        parse_config('{"seed": 1, "nonlinearity": {"kind": "cubic"}}')


def test_sweep_axis_validation():
    with pytest.raises(ConfigError, match="sweep axis"):
        parse_config('{"seed": 1, "sweep": {"axes": {"beta": [1, 2]}}}')
    with pytest.raises(ConfigError, match="non-empty list"):
        parse_config('{"seed": 1, "sweep": {"axes": {"alpha": []}}}')


def test_presets_all_parse():
    names = preset_names()
    assert {"fig2-nonlinear-dsvm", "fig3-linear-dsvm",
            "table1-sector-ratios", "fig5-sensitivity"} <= set(names)
    for name in names:
        cfg = parse_config(load_preset(name))
        assert cfg.description


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        load_preset("fig9-imaginary")
