"""Experiment configuration: YAML schema, expression grammar and diagnostics.

Domain expressions (prefix notation, ``N`` the dimension)::

    ball c_1 .. c_N r          box lo_1 .. lo_N hi_1 .. hi_N
    interval a b               halfspace n_1 .. n_N offset
    full                       cusp
    union A B                  inter A B
    diff A B                   complC A
    olambda A lam              trunc L A
    smooth A lam width         flag {extension,non_extension,unknown} A

Field expressions::

    affine a_1 .. a_N b        bump c_1 .. c_N r h
    cuspfield                  indicator A

Parentheses may group any sub-expression, e.g. ``diff (box -1 -1 1 1) (ball 0 0 0.5)``.
The dimension is taken from the ``dim`` key, or inferred when exactly
one dimension in 1..3 parses both expressions.

Diagnostic codes
----------------
E100 unknown key, E101 missing key, E102 malformed document,
E200 unparseable expression, E300 value out of range, E301 wrong type.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from typing import Optional

import yaml

from . import geometry as geo
from .fields import ScalarField, affine, bump, cusp_field, indicator
from .limits import DEFAULT_S_GRID, MAX_S

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "MODES",
    "parse_config",
    "serialize",
    "parse_domain",
    "parse_field",
]

MODES = ("sweep", "probe", "kappa_table", "mollifier", "cross_term")
EXPECTATIONS = ("convergent", "divergent")
CONSTANTS = ("bbm", "kappa")
METHODS = ("auto", "fft", "direct")


class ConfigError(ValueError):
    """Configuration diagnostic with a code, the offending key and a position."""

    def __init__(self, code: str, key: Optional[str], message: str,
                 position: Optional[int] = None):
        self.code, self.key, self.position = code, key, position
        where = f" at column {position}" if position is not None else ""
        label = f" [{key}]" if key else ""
        super().__init__(f"{code}{label}{where}: {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    mode: str = "sweep"
    domain: str = ""
    field: str = ""
    dim: Optional[int] = None
    p: float = 2.0
    s_grid: tuple = DEFAULT_S_GRID
    cells: Optional[int] = None
    fine_cells: Optional[int] = None
    fine_from: float = 0.95
    target_cells: Optional[int] = None
    tolerance: float = 0.02
    constant: str = "bbm"
    expect: str = "convergent"
    probe_s: Optional[float] = None
    pitch_schedule: tuple = ()
    eps: tuple = ()
    R: Optional[float] = None
    domain2: str = ""
    reference: tuple = ()
    dims: tuple = ()
    ps: tuple = ()
    method: str = "auto"
    description: str = ""
    output_dir: str = "results"


_TUPLE_KEYS = {"s_grid", "pitch_schedule", "eps", "reference", "dims", "ps"}
_KEYS = {f.name for f in fields(ExperimentConfig)}


# ---------------------------------------------------------------- grammar

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_FLAGS = {"extension": geo.EXTENSION, "non_extension": geo.NON_EXTENSION,
          "unknown": geo.UNKNOWN}


class _Tokens:
    def __init__(self, text: str, key: str):
        self.items = [(m.group(), m.start() + 1) for m in _TOKEN.finditer(text)]
        self.i = 0
        self.key = key
        self.end = len(text) + 1

    def error(self, message, pos=None):
        if pos is None:
            pos = self.items[self.i][1] if self.i < len(self.items) else self.end
        return ConfigError("E200", self.key, message, pos)

    def peek(self):
        return self.items[self.i][0] if self.i < len(self.items) else None

    def next(self):
        if self.i >= len(self.items):
            raise self.error("unexpected end of expression")
        tok = self.items[self.i]
        self.i += 1
        return tok

    def numbers(self, n: int, what: str):
        out = []
        for _ in range(n):
            if self.i >= len(self.items):
                raise self.error(f"{what} needs {n} numbers, got {len(out)}")
            tok, pos = self.items[self.i]
            if not _NUMBER.match(tok):
                raise self.error(f"{what} needs {n} numbers, got {tok!r}", pos)
            out.append(float(tok))
            self.i += 1
        return out


def _domain(t: _Tokens, dim: int) -> geo.Domain:
    tok, pos = t.next()
    if tok == "(":
        d = _domain(t, dim)
        if t.peek() != ")":
            raise t.error("expected ')'")
        t.next()
        return d
    try:
        if tok == "ball":
            v = t.numbers(dim + 1, "ball")
            return geo.make_primitive("ball", v[:dim], v[dim])
        if tok == "box":
            v = t.numbers(2 * dim, "box")
            return geo.make_primitive("box", v[:dim], v[dim:])
        if tok == "interval":
            if dim != 1:
                raise t.error("interval is one-dimensional", pos)
            v = t.numbers(2, "interval")
            return geo.make_primitive("box", v[:1], v[1:])
        if tok == "halfspace":
            v = t.numbers(dim + 1, "halfspace")
            return geo.make_primitive("halfspace", v[:dim], v[dim])
        if tok == "full":
            return geo.FullSpace(dim)
        if tok == "cusp":
            if dim != 2:
                raise t.error("cusp is two-dimensional", pos)
            return geo.cusp_domain()
        if tok in ("union", "inter", "diff"):
            a = _domain(t, dim)
            b = _domain(t, dim)
            op = {"union": "union", "inter": "intersection", "diff": "difference"}[tok]
            return geo.csg(op, a, b)
        if tok == "complC":
            return geo.csg("complement_of_closure", _domain(t, dim))
        if tok == "olambda":
            a = _domain(t, dim)
            return geo.omega_lambda(a, t.numbers(1, "olambda")[0])
        if tok == "trunc":
            L = t.numbers(1, "trunc")[0]
            a = _domain(t, dim)
            if L <= 0:
                raise t.error("truncation half-width must be positive", pos)
            return a.with_truncation([-L] * dim, [L] * dim)
        if tok == "smooth":
            a = _domain(t, dim)
            lam, width = t.numbers(2, "smooth")
            return geo.smooth_inner_approximation(a, geo.InnerRegionParams(lam, width))
        if tok == "flag":
            name, fpos = t.next()
            if name not in _FLAGS:
                raise t.error(f"unknown extension flag {name!r}", fpos)
            return _domain(t, dim).with_extension_flag(_FLAGS[name])
    except ConfigError:
        raise
    except (ValueError, geo.ConstructionFailed) as exc:
        raise t.error(f"invalid {tok}: {exc}", pos) from None
    raise t.error(f"unknown domain constructor {tok!r}", pos)


def _field(t: _Tokens, dim: int) -> ScalarField:
    tok, pos = t.next()
    if tok == "(":
        f = _field(t, dim)
        if t.peek() != ")":
            raise t.error("expected ')'")
        t.next()
        return f
    try:
        if tok == "affine":
            v = t.numbers(dim + 1, "affine")
            return affine(v[:dim], v[dim])
        if tok == "bump":
            v = t.numbers(dim + 2, "bump")
            return bump(v[:dim], v[dim], v[dim + 1])
        if tok == "cuspfield":
            if dim != 2:
                raise t.error("cuspfield is two-dimensional", pos)
            return cusp_field()
        if tok == "indicator":
            return indicator(_domain(t, dim))
    except ConfigError:
        raise
    except ValueError as exc:
        raise t.error(f"invalid {tok}: {exc}", pos) from None
    raise t.error(f"unknown field constructor {tok!r}", pos)


def _parse_all(text: str, dim: int, key: str, rule):
    t = _Tokens(text, key)
    if not t.items:
        raise ConfigError("E200", key, "empty expression", 1)
    out = rule(t, dim)
    if t.i != len(t.items):
        raise t.error(f"trailing tokens after expression: {t.peek()!r}")
    return out


def parse_domain(text: str, dim: int, key: str = "domain") -> geo.Domain:
    return _parse_all(text, dim, key, _domain)


def parse_field(text: str, dim: int, key: str = "field") -> ScalarField:
    return _parse_all(text, dim, key, _field)


def infer_dim(exprs: dict) -> int:
    """The unique dimension in 1..3 under which all expressions parse."""
    ok, errors = [], []
    for dim in (1, 2, 3):
        try:
            for key, (text, rule) in exprs.items():
                _parse_all(text, dim, key, rule)
        except ConfigError as exc:
            errors.append(exc)
            continue
        ok.append(dim)
    if len(ok) == 1:
        return ok[0]
    if not ok:
        # the attempt that parsed furthest points at the real mistake
        order = list(exprs)
        raise max(errors, key=lambda e: (order.index(e.key), e.position or 0))
    raise ConfigError("E200", "dim", f"expressions parse in dimensions {ok}; set 'dim'")


# ---------------------------------------------------------------- documents

def _as_float(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("E301", key, f"expected a number, got {value!r}")
    return float(value)


def _as_int(key, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("E301", key, f"expected an integer, got {value!r}")
    return value


def _as_str(key, value):
    if not isinstance(value, str):
        raise ConfigError("E301", key, f"expected a string, got {value!r}")
    return value


def _as_list(key, value, conv):
    if not isinstance(value, (list, tuple)):
        raise ConfigError("E301", key, f"expected a list, got {value!r}")
    return tuple(conv(key, v) for v in value)


_CONVERT = {
    "name": _as_str, "mode": _as_str, "domain": _as_str, "field": _as_str, "dim": _as_int,
    "p": _as_float, "cells": _as_int, "fine_cells": _as_int, "fine_from": _as_float,
    "target_cells": _as_int, "tolerance": _as_float, "constant": _as_str, "expect": _as_str,
    "probe_s": _as_float, "R": _as_float, "domain2": _as_str, "method": _as_str,
    "description": _as_str, "output_dir": _as_str,
    "s_grid": lambda k, v: _as_list(k, v, _as_float),
    "pitch_schedule": lambda k, v: _as_list(k, v, _as_float),
    "eps": lambda k, v: _as_list(k, v, _as_float),
    "reference": lambda k, v: _as_list(k, v, _as_float),
    "dims": lambda k, v: _as_list(k, v, _as_int),
    "ps": lambda k, v: _as_list(k, v, _as_float),
}


def _range(key, ok, message):
    if not ok:
        raise ConfigError("E300", key, message)


def _validate(cfg: ExperimentConfig) -> ExperimentConfig:
    _range("mode", cfg.mode in MODES, f"mode must be one of {MODES}")
    _range("tolerance", 0 < cfg.tolerance < 0.5, "tolerance must lie in (0, 0.5)")
    _range("p", cfg.p >= 1, "p must be >= 1")
    _range("constant", cfg.constant in CONSTANTS, f"constant must be one of {CONSTANTS}")
    _range("expect", cfg.expect in EXPECTATIONS, f"expect must be one of {EXPECTATIONS}")
    _range("method", cfg.method in METHODS, f"method must be one of {METHODS}")
    _range("s_grid", all(0 < s < 1 for s in cfg.s_grid), "s values must lie in (0, 1)")
    _range("s_grid", all(s <= MAX_S for s in cfg.s_grid), f"s values above {MAX_S} are refused")
    _range("s_grid", all(b > a for a, b in zip(cfg.s_grid, cfg.s_grid[1:])),
           "s values must be strictly increasing")
    for key in ("cells", "fine_cells", "target_cells"):
        v = getattr(cfg, key)
        _range(key, v is None or 4 <= v <= 4096, "cell counts must lie in [4, 4096]")
    _range("dim", cfg.dim is None or 1 <= cfg.dim <= 3, "dim must be 1, 2 or 3")
    _range("probe_s", cfg.probe_s is None or 0 < cfg.probe_s < 1, "probe_s must lie in (0, 1)")
    _range("pitch_schedule", all(h > 0 for h in cfg.pitch_schedule), "pitches must be positive")
    _range("R", cfg.R is None or cfg.R > 0, "R must be positive")
    _range("eps", all(0 < e * cfg.p < 1 for e in cfg.eps), "need 0 < eps p < 1")
    _range("dims", all(d >= 1 for d in cfg.dims), "dimensions must be positive")
    _range("ps", all(p >= 1 for p in cfg.ps), "kappa exponents must be >= 1")
    _range("name", bool(re.fullmatch(r"[A-Za-z0-9_.-]+", cfg.name)),
           "name must be a plain file stem")

    if cfg.mode == "kappa_table":
        _range("dims", bool(cfg.dims), "kappa_table needs 'dims'")
        _range("ps", bool(cfg.ps), "kappa_table needs 'ps'")
        return cfg
    for key in ("domain", "field"):
        if not getattr(cfg, key):
            raise ConfigError("E101", key, f"mode {cfg.mode!r} needs '{key}'")
    if cfg.mode == "probe":
        _range("probe_s", cfg.probe_s is not None, "probe mode needs 'probe_s'")
        _range("pitch_schedule", len(cfg.pitch_schedule) >= 4, "need at least 4 pitches")
    if cfg.mode == "mollifier":
        _range("eps", len(cfg.eps) >= 1, "mollifier mode needs 'eps'")
        _range("R", cfg.R is not None, "mollifier mode needs 'R'")
    if cfg.mode == "cross_term" and not cfg.domain2:
        raise ConfigError("E101", "domain2", "cross_term mode needs 'domain2'")
    if cfg.reference:
        n = {"mollifier": len(cfg.eps)}.get(cfg.mode, len(cfg.s_grid))
        _range("reference", len(cfg.reference) == n, f"reference needs {n} values")

    exprs = {"domain": (cfg.domain, _domain), "field": (cfg.field, _field)}
    if cfg.domain2:
        exprs["domain2"] = (cfg.domain2, _domain)
    if cfg.dim is None:
        infer_dim(exprs)
    else:
        for key, (text, rule) in exprs.items():
            _parse_all(text, cfg.dim, key, rule)
    return cfg


def config_from_mapping(doc) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("E102", None, "a configuration must be a mapping of keys to values")
    for key in doc:
        if key not in _KEYS:
            raise ConfigError("E100", str(key), f"unknown key {key!r}")
    if "name" not in doc:
        raise ConfigError("E101", "name", "missing required key 'name'")
    kwargs = {k: (None if v is None else _CONVERT[k](k, v)) for k, v in doc.items()}
    kwargs = {k: v for k, v in kwargs.items() if v is not None or k in ("dim", "probe_s", "R")}
    return _validate(ExperimentConfig(**kwargs))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment description."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("E102", None, f"YAML syntax error: {exc}",
                          None if mark is None else mark.column + 1) from None
    return config_from_mapping(doc)


def to_mapping(cfg: ExperimentConfig) -> dict:
    """Non-default keys in declaration order (``name`` always included)."""
    out = {}
    for f in fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        if f.name != "name" and v == f.default:
            continue
        out[f.name] = list(v) if f.name in _TUPLE_KEYS else v
    return out


def serialize(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_mapping(cfg), sort_keys=False, default_flow_style=None)


def resolved_dim(cfg: ExperimentConfig) -> int:
    if cfg.dim is not None:
        return cfg.dim
    exprs = {"domain": (cfg.domain, _domain), "field": (cfg.field, _field)}
    if cfg.domain2:
        exprs["domain2"] = (cfg.domain2, _domain)
    return infer_dim(exprs)
