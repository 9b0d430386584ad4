"""Scenario configuration: strict YAML schema, defaults and flag overrides.

A config file is a mapping of sections::

    scenario: transfer
    params:   {g: 0.9, j1: 0.1, j2: 0.1, omega_q: 1.0, variant: full}
    initial:  {state: single_photon, alpha: 1.0, p: null, theta: null}
    numerics: {n_max: null, tol: 1.0e-3, dt: 0.01, dt_sample: 0.1, t_end: null, method: trotter4}
    sweep:    {g_min: 0.0, g_max: 1.0, step: 0.005, quantity: amplitude, ...}
    boxcount: {series: n1, window: auto, input: null}
    output:   {dir: results}
    workers: null
    seed: 0

Unknown or duplicated keys are errors carrying the line they appear on. A run
manifest (JSON) is also accepted: its ``config`` block is read the same way.
``n_max: null`` selects the default cutoff (8 below g = 0.4, 12 above) and
``n_max: auto`` escalates it until photon numbers converge to ``tol``.
"""

from dataclasses import asdict, dataclass, fields, replace
import math

import yaml

from .errors import ConfigError
from .model import Variant

SCENARIOS = ("transfer", "sweep-g", "sweep-j2", "boxcount", "fidelity", "degenerate")
INITIAL_STATES = ("single_photon", "coherent", "superposition")
METHODS = ("trotter4", "exact")
SWEEP_QUANTITIES = ("amplitude", "gc")
SERIES = ("n1", "n2", "n3", "qubit_excitation", "delta_n")
USC_THRESHOLD = 0.4
DEFAULT_N_MAX = {"sc": 8, "usc": 12}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "transfer"
    # params
    g: float = 0.0
    j1: float = 0.1
    j2: float = 0.1
    omega_q: float = 1.0
    variant: str = "full"
    # initial
    state: str = "single_photon"
    alpha: float = 1.0
    p: float = None
    theta: float = None
    # numerics
    n_max: object = None
    tol: float = 1e-3
    dt: float = 0.01
    dt_sample: float = 0.1
    t_end: float = None
    method: str = "trotter4"
    # sweep
    g_min: float = 0.0
    g_max: float = 1.0
    step: float = 0.005
    quantity: str = "amplitude"
    j2_min: float = 0.0
    j2_max: float = 0.02
    j2_step: float = 0.0005
    j2_values: tuple = (0.06, 0.08, 0.10, 0.12, 0.14)
    gc_g_min: float = 0.70
    gc_g_max: float = 0.98
    # boxcount
    series: str = "n1"
    window: object = "auto"
    input: str = None
    # output
    out: str = "results"
    workers: int = None
    seed: int = 0

    def to_dict(self):
        flat = asdict(self)
        nested = {}
        for section, names in SECTIONS.items():
            if names is None:
                nested[section] = flat[section]
            else:
                nested[section] = {_yaml_key(n): _plain(flat[n]) for n in names}
        return nested


def _plain(value):
    return list(value) if isinstance(value, tuple) else value


# section name -> field names (None: the section is itself a scalar field)
SECTIONS = {
    "scenario": None,
    "params": ("g", "j1", "j2", "omega_q", "variant"),
    "initial": ("state", "alpha", "p", "theta"),
    "numerics": ("n_max", "tol", "dt", "dt_sample", "t_end", "method"),
    "sweep": ("g_min", "g_max", "step", "quantity", "j2_min", "j2_max", "j2_step",
              "j2_values", "gc_g_min", "gc_g_max"),
    "boxcount": ("series", "window", "input"),
    "output": ("out",),
    "workers": None,
    "seed": None,
}
_KEY_ALIASES = {("output", "dir"): "out"}


def _yaml_key(name):
    return "dir" if name == "out" else name


def _field_for(section, key):
    if (section, key) in _KEY_ALIASES:
        return _KEY_ALIASES[(section, key)]
    names = SECTIONS[section]
    if key in names and key != "out":
        return key
    return None


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_float(name, v, minimum=None, positive=False, allow_none=False):
    if v is None and allow_none:
        return None
    if not _is_number(v) or not math.isfinite(v):
        raise ValueError(f"{name} must be a finite number, got {v!r}")
    v = float(v)
    if positive and v <= 0:
        raise ValueError(f"{name} must be > 0, got {v}")
    if minimum is not None and v < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {v}")
    return v


def _check_choice(name, v, choices):
    if v not in choices:
        raise ValueError(f"{name} must be one of {', '.join(choices)}; got {v!r}")
    return v


def _validate_field(name, v):
    """Return the normalised value of field ``name`` or raise ValueError."""
    if name == "scenario":
        return _check_choice(name, v, SCENARIOS)
    if name in ("g", "j1", "j2", "g_min", "g_max", "j2_min", "j2_max", "gc_g_min", "gc_g_max"):
        return _check_float(name, v, minimum=0.0)
    if name in ("alpha", "omega_q"):
        return _check_float(name, v)
    if name in ("dt", "dt_sample", "step", "j2_step", "tol"):
        return _check_float(name, v, positive=True)
    if name == "t_end":
        return _check_float(name, v, minimum=0.0, allow_none=True)
    if name == "p":
        v = _check_float(name, v, allow_none=True)
        if v is not None and not 0.0 <= v <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {v}")
        return v
    if name == "theta":
        return _check_float(name, v, allow_none=True)
    if name == "variant":
        return _check_choice(name, v, tuple(x.value for x in Variant))
    if name == "state":
        return _check_choice(name, v, INITIAL_STATES)
    if name == "method":
        return _check_choice(name, v, METHODS)
    if name == "quantity":
        return _check_choice(name, v, SWEEP_QUANTITIES)
    if name == "series":
        return _check_choice(name, v, SERIES)
    if name == "n_max":
        if v is None or v == "auto":
            return v
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ValueError(f"n_max must be a positive integer, 'auto' or null; got {v!r}")
        return v
    if name in ("workers",):
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ValueError(f"workers must be a positive integer or null; got {v!r}")
        return v
    if name == "seed":
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ValueError(f"seed must be a non-negative integer; got {v!r}")
        return v
    if name == "j2_values":
        if not isinstance(v, (list, tuple)) or not v:
            raise ValueError("j2_values must be a non-empty list of numbers")
        return tuple(_check_float("j2_values entry", x, minimum=0.0) for x in v)
    if name == "window":
        if v == "auto":
            return v
        if isinstance(v, (list, tuple)) and len(v) == 2:
            lo, hi = (_check_float("window bound", x, positive=True) for x in v)
            if lo >= hi:
                raise ValueError("window must be [tau_min, tau_max] with tau_min < tau_max")
            return (lo, hi)
        raise ValueError(f"window must be 'auto' or [tau_min, tau_max]; got {v!r}")
    if name == "input":
        if v is not None and (not isinstance(v, str) or not v):
            raise ValueError("boxcount input must be a path to a trajectory CSV")
        return v
    if name == "out":
        if not isinstance(v, str) or not v:
            raise ValueError("output dir must be a non-empty string")
        return v
    raise ValueError(f"unknown field {name!r}")


def _check_consistency(cfg, lines, source):
    def fail(msg, key):
        raise ConfigError(msg, lines.get(key), source)

    if cfg.g_min > cfg.g_max:
        fail("sweep g_min must not exceed g_max", "g_min")
    if cfg.j2_min > cfg.j2_max:
        fail("sweep j2_min must not exceed j2_max", "j2_min")
    if cfg.gc_g_min >= cfg.gc_g_max:
        fail("sweep gc_g_min must be below gc_g_max", "gc_g_min")
    if cfg.scenario == "degenerate" and cfg.variant not in ("full", "degenerate"):
        fail("the degenerate scenario always uses the degenerate variant", "variant")
    ratio = cfg.dt_sample / cfg.dt
    if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
        fail(f"dt_sample={cfg.dt_sample} is not an integer multiple of dt={cfg.dt}", "dt_sample")


def build_config(values, lines=None, source=None):
    """Validate a flat ``{field: value}`` dict into a ScenarioConfig."""
    lines = lines or {}
    clean = {}
    for name, v in values.items():
        try:
            clean[name] = _validate_field(name, v)
        except ValueError as exc:
            raise ConfigError(str(exc), lines.get(name), source) from None
    cfg = ScenarioConfig(**clean)
    _check_consistency(cfg, lines, source)
    return cfg


class _StrictLoader(yaml.SafeLoader):
    pass


def _construct(node):
    return _StrictLoader("").construct_object(node, deep=True)


def _mapping_items(node, where, source):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{where} must be a mapping", node.start_mark.line + 1, source)
    seen = set()
    for key_node, value_node in node.value:
        key = _construct(key_node)
        line = key_node.start_mark.line + 1
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} in {where}", line, source)
        seen.add(key)
        yield key, value_node, line


def parse_config_text(text, source="<config>"):
    """Parse YAML (or JSON manifest) text into ``(flat values, line numbers)``."""
    try:
        root = yaml.compose(text, Loader=_StrictLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"cannot parse: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    if root is None:
        return {}, {}
    top = {k: (v, line) for k, v, line in _mapping_items(root, "config", source)}
    if "config" in top and "manifest_version" in top:
        root = top["config"][0]
        top = {k: (v, line) for k, v, line in _mapping_items(root, "config", source)}
    values, lines = {}, {}
    for section, (node, line) in top.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown key {section!r}; expected one of "
                              f"{', '.join(SECTIONS)}", line, source)
        if SECTIONS[section] is None:
            values[section], lines[section] = _construct(node), line
            continue
        for key, value_node, kline in _mapping_items(node, section, source):
            name = _field_for(section, key)
            if name is None:
                allowed = ", ".join(_yaml_key(n) for n in SECTIONS[section])
                raise ConfigError(f"unknown key {key!r} in {section}; expected one of {allowed}",
                                  kline, source)
            values[name], lines[name] = _construct(value_node), kline
    return values, lines


def load_config(path, overrides=None):
    """Read ``path`` (may be None), apply ``overrides`` and validate."""
    values, lines, source = {}, {}, None
    if path is not None:
        source = str(path)
        with open(path) as fh:
            text = fh.read()
        values, lines = parse_config_text(text, source)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values, lines, source)


def default_n_max(g):
    """Default cutoff: SC runs below g = 0.4 use 8, USC runs 12."""
    return DEFAULT_N_MAX["sc"] if g < USC_THRESHOLD else DEFAULT_N_MAX["usc"]


def with_changes(cfg, **changes):
    return replace(cfg, **changes)


def field_names():
    return [f.name for f in fields(ScenarioConfig)]
