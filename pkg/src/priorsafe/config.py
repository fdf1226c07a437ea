"""Experiment configuration: JSON schema, semantic checks and object builders."""

import copy
import json
from pathlib import Path

import jsonschema
import numpy as np

from .closedloop import PriorKnowledge, box_disturbance, box_prior
from .datagen import LinearSystem
from .setops import ConstrainedZonotope, Polytope

CONFIG_VERSION = 1

_matrix = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}}
_vector = {"type": "array", "minItems": 1, "items": {"type": "number"}}
_czono = {
    "type": "object",
    "required": ["G", "c"],
    "properties": {
        "G": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "c": _vector,
        "A": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "b": {"type": "array", "items": {"type": "number"}},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "system", "data", "prior", "disturbance", "safe_set", "synthesis"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "description": {"type": "string"},
        "system": {
            "type": "object",
            "required": ["A_true", "B_true", "x0"],
            "additionalProperties": False,
            "properties": {"A_true": _matrix, "B_true": _matrix, "x0": _vector},
        },
        "data": {
            "type": "object",
            "required": ["T", "u_range", "seed"],
            "additionalProperties": False,
            "properties": {
                "T": {"type": "integer", "minimum": 1},
                "u_range": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "prior": {
            "oneOf": [
                {"const": "none"},
                {
                    "type": "object",
                    "required": ["lower", "upper"],
                    "additionalProperties": False,
                    "properties": {"lower": _matrix, "upper": _matrix},
                },
            ]
        },
        "disturbance": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["family", "level"],
                    "additionalProperties": False,
                    "properties": {"family": {"const": "box"}, "level": {"type": "number", "minimum": 0}},
                },
                {
                    "type": "object",
                    "required": ["family", "set"],
                    "additionalProperties": False,
                    "properties": {"family": {"const": "czonotope"}, "set": _czono},
                },
            ]
        },
        "safe_set": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["type", "H", "h"],
                    "additionalProperties": False,
                    "properties": {"type": {"const": "polytope"}, "H": _matrix, "h": _vector},
                },
                {
                    "type": "object",
                    "required": ["type", "set"],
                    "additionalProperties": False,
                    "properties": {"type": {"const": "czonotope"}, "set": _czono},
                },
            ]
        },
        "synthesis": {
            "type": "object",
            "required": ["method", "lam"],
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["polytope", "czono"]},
                "lam": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "bound_mode": {"enum": ["paper", "sound"]},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "sweep": {
                    "type": "object",
                    "required": ["param"],
                    "additionalProperties": False,
                    "properties": {
                        "param": {"enum": ["lam", "b"]},
                        "values": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
                        "tol": {"type": "number", "exclusiveMinimum": 0},
                        "b_max": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "validation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"samples": {"type": "integer", "minimum": 0}, "seed": {"type": "integer", "minimum": 0}},
        },
        "trajectory": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": {"type": "integer", "minimum": 0},
                "runs": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["json", "csv"]}},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


def _field(path):
    out = "config"
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _shape(x):
    return np.atleast_2d(np.asarray(x, dtype=float)).shape


def validate_config(cfg):
    """Schema plus dimension checks. Raises :class:`ConfigError`."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as err:
        # oneOf failures carry sub-errors; report the deepest one
        best = jsonschema.exceptions.best_match([err])
        leaf = best
        while leaf.context:
            leaf = jsonschema.exceptions.best_match(leaf.context)
        raise ConfigError(_field(leaf.absolute_path), leaf.message) from None
    for key in ("A_true", "B_true"):
        rows = cfg["system"][key]
        if len({len(r) for r in rows}) != 1:
            raise ConfigError(f"config.system.{key}", "rows have different lengths")
    n, nA = _shape(cfg["system"]["A_true"])
    if n != nA:
        raise ConfigError("config.system.A_true", f"must be square, got {n}x{nA}")
    nB, m = _shape(cfg["system"]["B_true"])
    if nB != n:
        raise ConfigError("config.system.B_true", f"needs {n} rows, got {nB}")
    if len(cfg["system"]["x0"]) != n:
        raise ConfigError("config.system.x0", f"needs {n} entries")
    if cfg["data"]["T"] < n + 1:
        raise ConfigError("config.data.T", f"need T >= n + 1 = {n + 1}, got {cfg['data']['T']}")
    if cfg["prior"] != "none":
        for key in ("lower", "upper"):
            if _shape(cfg["prior"][key]) != (n, n + m):
                raise ConfigError(f"config.prior.{key}", f"must be {n}x{n + m}")
        if np.any(np.asarray(cfg["prior"]["lower"]) > np.asarray(cfg["prior"]["upper"])):
            raise ConfigError("config.prior.lower", "exceeds config.prior.upper")
    dist = cfg["disturbance"]
    if dist["family"] == "czonotope":
        _check_czono(dist["set"], n, "config.disturbance.set")
    safe = cfg["safe_set"]
    if safe["type"] == "polytope":
        H = _shape(safe["H"])
        if H[1] != n:
            raise ConfigError("config.safe_set.H", f"needs {n} columns")
        if len(safe["h"]) != H[0]:
            raise ConfigError("config.safe_set.h", f"needs {H[0]} entries")
    else:
        _check_czono(safe["set"], n, "config.safe_set.set")
    method = cfg["synthesis"]["method"]
    if (method == "polytope") != (safe["type"] == "polytope"):
        raise ConfigError("config.synthesis.method", f"'{method}' does not match safe set type '{safe['type']}'")
    sweep = cfg["synthesis"].get("sweep")
    if sweep and sweep["param"] == "lam":
        if any(not 0 < v < 1 for v in sweep.get("values", [])):
            raise ConfigError("config.synthesis.sweep.values", "contraction levels must lie in (0, 1)")
    if sweep and sweep["param"] == "b" and dist["family"] != "box":
        raise ConfigError("config.synthesis.sweep.param", "a disturbance sweep needs the box disturbance family")
    return cfg


def _check_czono(d, n, name):
    try:
        S = czono_from_dict(d)
    except ValueError as err:
        raise ConfigError(name, str(err)) from None
    if S.dim != n:
        raise ConfigError(f"{name}.c", f"needs {n} entries")


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError("config", f"cannot read {path}: {err.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("config", f"invalid JSON at line {err.lineno}: {err.msg}") from None
    return validate_config(cfg)


def czono_from_dict(d):
    G = np.asarray(d["G"], dtype=float)
    c = np.asarray(d["c"], dtype=float)
    G = G.reshape(c.size, -1) if G.size else np.zeros((c.size, 0))
    A = d.get("A")
    b = d.get("b")
    if A is not None:
        A = np.asarray(A, dtype=float).reshape(-1, G.shape[1]) if len(A) else None
    b = None if A is None else np.asarray(b, dtype=float)
    return ConstrainedZonotope(G, c, A, b)


def build_system(cfg):
    return LinearSystem(cfg["system"]["A_true"], cfg["system"]["B_true"])


def build_disturbance(cfg, level=None):
    dist = cfg["disturbance"]
    n = len(cfg["system"]["x0"])
    if dist["family"] == "box":
        return box_disturbance(dist["level"] if level is None else level, n)
    return czono_from_dict(dist["set"])


def build_prior(cfg, level=None):
    Zw = build_disturbance(cfg, level)
    if cfg["prior"] == "none":
        return PriorKnowledge(None, Zw)
    return box_prior(cfg["prior"]["lower"], cfg["prior"]["upper"], Zw)


def build_safe_set(cfg):
    safe = cfg["safe_set"]
    if safe["type"] == "polytope":
        return Polytope(safe["H"], safe["h"])
    return czono_from_dict(safe["set"])


# Demo: the two-state example system, its interval prior and a symmetric
# four-facet safe set {|x1| <= 2, |0.8 x1 + x2| <= 1} on which it is stabilizable.
DEMO_CONFIG = {
    "version": CONFIG_VERSION,
    "description": "two-state demo with interval prior on [A B] and box disturbances",
    "system": {"A_true": [[0.8, 0.5], [-0.4, 1.2]], "B_true": [[0.0], [1.0]], "x0": [0.0, 0.0]},
    "data": {"T": 10, "u_range": 1.0, "seed": 1},
    "prior": {"lower": [[0.6, 0.35, -0.1], [-0.5, 1.0, 0.8]], "upper": [[1.0, 0.65, 0.1], [-0.3, 1.4, 1.2]]},
    "disturbance": {"family": "box", "level": 0.03},
    "safe_set": {"type": "polytope", "H": [[0.5, 0.0], [0.8, 1.0], [-0.5, 0.0], [-0.8, -1.0]], "h": [1.0, 1.0, 1.0, 1.0]},
    "synthesis": {"method": "polytope", "lam": 0.95, "bound_mode": "sound", "tol": 1e-7, "sweep": {"param": "lam", "tol": 0.005}},
    "validation": {"samples": 10000, "seed": 0},
    "trajectory": {"horizon": 50, "runs": 5, "seed": 0},
    "output": {"directory": "priorsafe-out", "formats": ["json", "csv"]},
}


def demo_config():
    return copy.deepcopy(DEMO_CONFIG)
