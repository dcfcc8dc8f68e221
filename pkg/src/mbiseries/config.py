"""Run configuration files (JSON, schema version 1)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .convergence import DEFAULT_SAFETY, MODES
from .errors import ConfigError
from .grid import DEFAULT_ALPHA, GridSpec
from .potential import DEFAULT_BOUNDARY_TOL
from .sources import KINDS, SourceConfig

SCHEMA_VERSION = 1

_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}

SOURCE_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(KINDS)},
        "center": _vec3,
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "amplitude": {"type": "number"},
        "axis": _vec3,
        "major_radius": {"type": "number", "exclusiveMinimum": 0},
        "minor_radius": {"type": "number", "exclusiveMinimum": 0},
        "children": {"type": "array", "items": {"$ref": "#/$defs/source"}},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "grid", "sources"],
    "additionalProperties": False,
    "$defs": {"source": SOURCE_SCHEMA},
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "grid": {
            "type": "object",
            "required": ["dims", "spacing"],
            "additionalProperties": False,
            "properties": {
                "dims": {"oneOf": [
                    {"type": "integer", "minimum": 8},
                    {"type": "array", "items": {"type": "integer", "minimum": 8},
                     "minItems": 3, "maxItems": 3},
                ]},
                "spacing": {"type": "number", "exclusiveMinimum": 0},
                "origin": _vec3,
            },
        },
        "sources": {"type": "array", "items": {"$ref": "#/$defs/source"}},
        "beta": {"type": "number", "minimum": 0},
        "order": {"type": "integer", "minimum": 0, "maximum": 64},
        "mode": {"enum": list(MODES)},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "method": {"enum": ["fast_transform", "direct_sum"]},
        "kernel": {"enum": ["lattice", "continuum"]},
        "xy_method": {"enum": ["auto", "combinatorial", "series"]},
        "safety": {"type": "number", "minimum": 1},
        "boundary_tol": {"type": "number", "exclusiveMinimum": 0},
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "vtk": {"type": "boolean"},
                "binary": {"type": "boolean"},
            },
        },
    },
}


@dataclass
class RunConfig:
    grid: GridSpec
    sources: list
    beta: float = 0.0
    order: int = 4
    mode: str = "em"
    alpha: float = DEFAULT_ALPHA
    method: str = "fast_transform"
    kernel: str = "lattice"
    xy_method: str = "auto"
    safety: float = DEFAULT_SAFETY
    boundary_tol: float = DEFAULT_BOUNDARY_TOL
    outputs: dict = field(default_factory=lambda: {"vtk": True, "binary": True})

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        leaves = [leaf for s in self.sources for leaf in s.leaves()]
        has_rho = any(leaf.kind in ("mollified_ball", "truncated_gaussian") and leaf.amplitude
                      for leaf in leaves)
        has_j = any(leaf.kind == "ring_current" and leaf.amplitude for leaf in leaves)
        if self.mode == "electrostatic" and has_j:
            raise ConfigError("electrostatic mode does not allow current sources")
        if self.mode == "magnetostatic" and has_rho:
            raise ConfigError("magnetostatic mode does not allow charge sources")
        if self.beta < 0 or self.order < 0:
            raise ConfigError("beta and order must be non-negative")

    @classmethod
    def from_dict(cls, d):
        try:
            jsonschema.validate(d, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid config at {where}: {exc.message}") from None
        g = d["grid"]
        dims = g["dims"]
        dims = (dims, dims, dims) if isinstance(dims, int) else tuple(dims)
        if "origin" in g:
            grid = GridSpec(dims, g["spacing"], tuple(g["origin"]))
        else:
            grid = GridSpec.centered(dims, g["spacing"])
        kwargs = {k: d[k] for k in ("beta", "order", "mode", "alpha", "method", "kernel",
                                    "xy_method", "safety", "boundary_tol") if k in d}
        outputs = {"vtk": True, "binary": True}
        outputs.update(d.get("outputs", {}))
        sources = [SourceConfig.from_dict(s) for s in d["sources"]]
        return cls(grid=grid, sources=sources, outputs=outputs, **kwargs)

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "grid": self.grid.to_dict(),
            "sources": [s.to_dict() for s in self.sources],
            "beta": self.beta, "order": self.order, "mode": self.mode, "alpha": self.alpha,
            "method": self.method, "kernel": self.kernel, "xy_method": self.xy_method,
            "safety": self.safety, "boundary_tol": self.boundary_tol, "outputs": dict(self.outputs),
        }
