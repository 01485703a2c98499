"""Scenario configuration: TOML documents validated against per-scenario schemas.

A config file names the scenario in a top-level ``scenario`` key and groups
parameters in sections; every key has a type, a default and (for numbers) an
allowed range.  Unknown sections or keys are errors, and validation reports
every problem it finds, not just the first.  Example::

    scenario = "cold-oscillation"

    [physics]
    tau = 1e-3

    [grid]
    nz = 256
    nv = 256

``serialize`` writes the fully defaulted scenario back to TOML, and
``parse_config(serialize(s)) == s``.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Any

import tomli_w

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCENARIOS = ("runaway", "pusher-compare", "cold-oscillation", "dispersion-scan", "entropy-budget")
TAU_RANGE = (0.0, 0.1)
METHOD_NAMES = ("lorentz-dirac", "landau-lifshitz", "tau-series", "dirac-asymptotic")
FIELD_KINDS = ("none", "uniform-electric", "uniform-magnetic", "uniform", "plane-wave")


@dataclass(frozen=True)
class Key:
    kind: str  # float | int | str | bool | vec3 | vec4 | floats | strs
    default: Any
    lo: float | None = None
    hi: float | None = None
    lo_open: bool = False
    choices: tuple = ()
    doc: str = ""


def _tau(default, allow_zero=False, doc="omega_p tau (radiation time in plasma units)"):
    return Key("float", default, 0.0, TAU_RANGE[1], lo_open=not allow_zero, doc=doc)


_GRID = {
    "nz": Key("int", 256, 8, None, doc="cells in z"),
    "nv": Key("int", 256, 8, None, doc="cells in v"),
    "length": Key("float", 80 * math.pi, 0.0, None, True, doc="box length in c/omega_p"),
    "v_max": Key("float", 2.0, 0.0, None, True, doc="velocity box half-width"),
}

_PLASMA_NUMERICS = {
    "dt": Key("float", 0.05, 0.0, None, True),
    "periods": Key("float", 20.0, 0.0, None, True, doc="run length in plasma periods"),
    "scheme": Key("str", "spectral", choices=("spectral", "van-leer")),
    "splitting": Key("str", "strang", choices=("strang", "yoshida4")),
    "diag_every": Key("int", 1, 1, None, doc="steps between diagnostics records"),
}

SCHEMAS = {
    "runaway": {
        "physics": {"tau": _tau(0.01), "q_over_m": Key("float", -1.0)},
        "initial": {"v": Key("vec3", [0.0, 0.0, 0.0]), "a": Key("vec3", [0.1, 0.0, 0.0])},
        "numerics": {
            "span": Key("float", 5.0, 0.0, None, True, doc="integration length in units of tau"),
            "steps_per_tau": Key("int", 50, 4, None),
        },
    },
    "pusher-compare": {
        "physics": {"tau": _tau(0.01), "q_over_m": Key("float", -1.0)},
        "field": {
            "kind": Key("str", "uniform-electric", choices=FIELD_KINDS),
            "E": Key("vec3", [0.0, 0.0, 0.5]),
            "B": Key("vec3", [0.0, 0.0, 0.0]),
            "amplitude": Key("float", 0.1),
            "wavevector": Key("vec3", [0.0, 0.0, 1.0]),
            "polarization": Key("vec3", [1.0, 0.0, 0.0]),
            "phase": Key("float", 0.0),
        },
        "initial": {"x": Key("vec4", [0.0, 0.0, 0.0, 0.0]), "v": Key("vec3", [0.5, 0.0, 0.0])},
        "numerics": {
            "lambda_end": Key("float", 3.0, 0.0, None, True),
            "step": Key("float", 0.01, 0.0, None, True),
            "methods": Key("strs", ["landau-lifshitz", "tau-series", "dirac-asymptotic"], choices=METHOD_NAMES),
            "order": Key("int", 1, 0, 2, doc="tau-series truncation N"),
            "quadrature": Key("str", "exponential", choices=("laguerre", "exponential")),
        },
    },
    "cold-oscillation": {
        "physics": {
            "tau": _tau(1e-3, allow_zero=True),
            "order": Key("int", 1, 0, 2, doc="closure order N"),
            "amplitude": Key("float", 1e-3, 0.0, 0.5, True),
            "mode": Key("int", 1, 1, None),
        },
        "grid": dict(_GRID),
        "numerics": dict(_PLASMA_NUMERICS),
        "output": {"snapshot": Key("bool", False, doc="write the final distribution as CSV")},
    },
    "dispersion-scan": {
        "physics": {
            "taus": Key("floats", [1e-4, 1e-3, 1e-2], 0.0, TAU_RANGE[1], True),
            "ks": Key("floats", [0.0], 0.0, None),
        },
        "background": {
            "kind": Key("str", "cold", choices=("cold", "maxwellian")),
            "v_th": Key("float", 1e-3, 0.0, None, True),
            "nodes": Key("int", 64, 8, None),
        },
        "numerics": {"classify": Key("bool", True)},
    },
    "entropy-budget": {
        "physics": {
            "tau": _tau(1e-3, allow_zero=True),
            "order": Key("int", 1, 0, 2),
            "amplitude": Key("float", 1e-2, 0.0, 0.5, True),
            "mode": Key("int", 1, 1, None),
        },
        "grid": {**_GRID, "nz": Key("int", 64, 8, None), "nv": Key("int", 128, 8, None),
                 "length": Key("float", 20 * math.pi, 0.0, None, True)},
        "numerics": {**_PLASMA_NUMERICS, "dt": Key("float", 0.005, 0.0, None, True),
                     "periods": Key("float", 2.0, 0.0, None, True),
                     "diag_every": Key("int", 20, 1, None)},
    },
}


@dataclass
class Scenario:
    name: str
    params: dict = field(default_factory=dict)

    def get(self, dotted):
        section, key = dotted.split(".", 1)
        return self.params[section][key]


def _type_ok(key: Key, value):
    num = (int, float)
    if key.kind == "float":
        return isinstance(value, num) and not isinstance(value, bool)
    if key.kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if key.kind == "str":
        return isinstance(value, str)
    if key.kind == "bool":
        return isinstance(value, bool)
    if key.kind in ("vec3", "vec4"):
        n = 3 if key.kind == "vec3" else 4
        return isinstance(value, list) and len(value) == n and all(
            isinstance(x, num) and not isinstance(x, bool) for x in value)
    if key.kind == "floats":
        return isinstance(value, list) and len(value) > 0 and all(
            isinstance(x, num) and not isinstance(x, bool) for x in value)
    if key.kind == "strs":
        return isinstance(value, list) and all(isinstance(x, str) for x in value)
    raise AssertionError(key.kind)


def _range_errors(path, key: Key, value):
    errs = []
    values = value if key.kind == "floats" else [value]
    if key.kind in ("float", "int", "floats"):
        for x in values:
            low_bad = key.lo is not None and (x <= key.lo if key.lo_open else x < key.lo)
            high_bad = key.hi is not None and x > key.hi
            if low_bad or high_bad or (isinstance(x, float) and not math.isfinite(x)):
                lo = "-inf" if key.lo is None else repr(key.lo)
                hi = "inf" if key.hi is None else repr(key.hi)
                interval = ("(" if key.lo_open else "[") + f"{lo}, {hi}" + ("]" if key.hi is not None else ")")
                errs.append(f"{path} = {x!r} out of range; allowed {interval}")
    if key.choices:
        items = value if key.kind == "strs" else [value]
        for x in items:
            if x not in key.choices:
                errs.append(f"{path} = {x!r} not one of {list(key.choices)}")
    return errs


def _normalise(key: Key, value):
    if key.kind == "float":
        return float(value)
    if key.kind in ("vec3", "vec4", "floats"):
        return [float(x) for x in value]
    if key.kind == "strs":
        return list(value)
    return value


def validate(doc: dict) -> Scenario:
    """Validate a decoded document; raises :class:`ConfigError` listing every problem."""
    errors = []
    name = doc.get("scenario")
    if name is None:
        raise ConfigError(["missing top-level key 'scenario'"])
    if name not in SCHEMAS:
        raise ConfigError([f"unknown scenario {name!r}; expected one of {list(SCENARIOS)}"])
    schema = SCHEMAS[name]
    params = {}
    for sec in doc:
        if sec == "scenario":
            continue
        if sec not in schema:
            errors.append(f"unknown section [{sec}] for scenario {name!r}")
        elif not isinstance(doc[sec], dict):
            errors.append(f"[{sec}] must be a table")
    for sec, keys in schema.items():
        given = doc.get(sec, {})
        if not isinstance(given, dict):
            continue
        for k in given:
            if k not in keys:
                errors.append(f"unknown key {sec}.{k}")
        out = {}
        for k, key in keys.items():
            value = given.get(k, key.default)
            path = f"{sec}.{k}"
            if not _type_ok(key, value):
                errors.append(f"{path} has wrong type; expected {key.kind}, got {type(value).__name__}")
                continue
            errs = _range_errors(path, key, value)
            errors.extend(errs)
            out[k] = _normalise(key, value)
        params[sec] = out
    if errors:
        raise ConfigError(errors)
    return Scenario(name, params)


def parse_config(text: str) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"not valid TOML: {exc}"]) from None
    return validate(doc)


def load_config(path, overrides=()) -> Scenario:
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"{path}: not valid TOML: {exc}"]) from None
    apply_overrides(doc, overrides)
    return validate(doc)


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(doc: dict, overrides):
    """Apply ``section.key=value`` strings in place; values use TOML syntax (bare strings allowed)."""
    errors = []
    for item in overrides:
        if "=" not in item:
            errors.append(f"override {item!r} is not of the form key=value")
            continue
        path, raw = item.split("=", 1)
        path = path.strip()
        value = _parse_value(raw.strip())
        if path == "scenario":
            doc["scenario"] = value
            continue
        if "." not in path:
            errors.append(f"override key {path!r} must be section.key")
            continue
        sec, key = path.split(".", 1)
        doc.setdefault(sec, {})
        if not isinstance(doc[sec], dict):
            errors.append(f"[{sec}] is not a table")
            continue
        doc[sec][key] = value
    if errors:
        raise ConfigError(errors)
    return doc


def to_document(s: Scenario) -> dict:
    doc = {"scenario": s.name}
    doc.update({sec: dict(vals) for sec, vals in s.params.items()})
    return doc


def serialize(s: Scenario) -> str:
    return tomli_w.dumps(to_document(s))


def describe_schema(name=None) -> str:
    """Plain-text listing of the schema (all scenarios or one)."""
    lines = []
    for scen in ([name] if name else SCENARIOS):
        lines.append(f"scenario = {scen!r}")
        for sec, keys in SCHEMAS[scen].items():
            lines.append(f"  [{sec}]")
            for k, key in keys.items():
                extra = f"  # {key.doc}" if key.doc else ""
                lines.append(f"    {k} ({key.kind}) = {key.default!r}{extra}")
    return "\n".join(lines)
