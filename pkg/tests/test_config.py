import json

import pytest

from tricavity.config import ScenarioConfig, build_config, load_config, parse_config_text
from tricavity.errors import ConfigError


def _write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_defaults_are_valid():
    cfg = build_config({})
    assert cfg == ScenarioConfig()
    assert cfg.dt == 0.01 and cfg.dt_sample == 0.1


def test_full_file(tmp_path):
    path = _write(tmp_path, """
scenario: sweep-g
params: {g: 0.2, j1: 0.1, j2: 0.12, omega_q: 1.0, variant: qubit-rwa}
initial: {state: coherent, alpha: 0.5}
numerics: {n_max: 6, dt: 0.02, dt_sample: 0.1, t_end: 50, method: exact}
sweep: {g_min: 0.1, g_max: 0.3, step: 0.01}
output: {dir: out}
workers: 2
seed: 7
""")
    cfg = load_config(path)
    assert (cfg.scenario, cfg.g, cfg.j2, cfg.variant) == ("sweep-g", 0.2, 0.12, "qubit-rwa")
    assert (cfg.n_max, cfg.method, cfg.t_end, cfg.out, cfg.workers, cfg.seed) == \
        (6, "exact", 50.0, "out", 2, 7)


@pytest.mark.parametrize("text, line, fragment", [
    ("scenario: transfer\nparams:\n  g: 0.1\n  gg: 0.2\n", 4, "unknown key 'gg'"),
    ("scenario: transfer\nnumerix: {}\n", 2, "unknown key 'numerix'"),
    ("params:\n  g: 0.1\n  g: 0.2\n", 3, "duplicate key 'g'"),
    ("params:\n  g: -1\n", 2, "g must be >= 0"),
    ("params:\n  g: fast\n", 2, "finite number"),
    ("numerics:\n  n_max: 0\n", 2, "n_max"),
    ("numerics:\n  dt: 0.03\n  dt_sample: 0.1\n", 3, "integer multiple"),
    ("initial:\n  state: cat\n", 2, "state must be one of"),
    ("initial:\n  p: 1.5\n", 2, "p must lie in [0, 1]"),
    ("params: [1, 2]\n", 1, "must be a mapping"),
    ("scenario: transfer\n  bad: [\n", 2, "cannot parse"),
])
def test_errors_carry_line_numbers(tmp_path, text, line, fragment):
    path = _write(tmp_path, text)
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"{path}:{line}:")


def test_overrides_win(tmp_path):
    path = _write(tmp_path, "params:\n  g: 0.1\n")
    cfg = load_config(path, {"g": 0.3, "j1": None})
    assert cfg.g == 0.3 and cfg.j1 == 0.1


def test_override_validation_has_no_line():
    with pytest.raises(ConfigError) as info:
        load_config(None, {"dt": -1.0})
    assert info.value.line is None


def test_roundtrip_through_dict():
    cfg = ScenarioConfig(scenario="boxcount", window=(1.0, 10.0), j2_values=(0.1, 0.2), n_max="auto")
    values, _ = parse_config_text(json.dumps({"manifest_version": 1, "config": cfg.to_dict()}))
    assert build_config(values) == cfg


def test_empty_file(tmp_path):
    assert load_config(_write(tmp_path, "")) == ScenarioConfig()
