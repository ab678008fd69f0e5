"""JSON run configuration: schema, presets and object construction."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema
import numpy as np

from .acoustics import FreeFieldModel, MeasuredModel, RigidSphereModel, load_ir_set
from .design import DesignSpec
from .geometry import ArrayGeometry, Direction, linear_array, make_pld_grid, spherical_cap_array

__all__ = [
    "ConfigError",
    "PRESETS",
    "SCHEMA",
    "build_design_spec",
    "build_geometry",
    "build_model",
    "load_config",
    "merge",
    "plds_from_config",
    "validate",
]


class ConfigError(ValueError):
    pass


_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_RANGE = dict(_PAIR, description="[lo, hi] in degrees")

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "polybeam run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "array": {
            "description": "Microphone layout.",
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["spherical_cap", "linear", "positions"]},
                "n": {"type": "integer", "minimum": 1, "description": "number of microphones"},
                "radius": {"type": "number", "exclusiveMinimum": 0, "description": "sphere radius in m"},
                "cap_deg": {"type": "number", "exclusiveMinimum": 0, "maximum": 180},
                "front": dict(_PAIR, description="cap axis [az, el] in degrees"),
                "spacing": {"type": "number", "exclusiveMinimum": 0, "description": "line spacing in m"},
                "axis": {"enum": [0, 1, 2]},
                "positions": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                         "minItems": 3, "maxItems": 3}, "minItems": 1},
            },
        },
        "model": {
            "description": "Sensor response model.",
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["free_field", "rigid_sphere", "measured"]},
                "sound_speed": {"type": "number", "exclusiveMinimum": 0},
                "path": {"type": "string", "description": "IR set directory (measured)"},
                "nearest": {"type": "boolean", "description": "snap to nearest measured direction"},
            },
        },
        "design": {
            "description": "Beamformer design parameters.",
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fs": {"type": "number", "exclusiveMinimum": 0},
                "fir_length": {"type": "integer", "minimum": 2, "multipleOf": 2},
                "P": {"type": "integer", "minimum": 0},
                "R": {"type": "integer", "minimum": 0},
                "plds": {
                    "description": "tensor grid {az, el, step} or explicit list of [az, el]",
                    "oneOf": [
                        {"type": "object", "additionalProperties": False, "required": ["az", "el", "step"],
                         "properties": {"az": _RANGE, "el": _RANGE, "step": {"type": "number", "exclusiveMinimum": 0}}},
                        {"type": "array", "items": _PAIR, "minItems": 1},
                    ],
                },
                "gamma_db": {"type": "number", "description": "WNG lower bound in dB"},
                "beamwidth_3db": {"type": "number", "exclusiveMinimum": 0},
                "grid_step": {"type": "number", "exclusiveMinimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "workers": {"type": "integer", "minimum": 1},
                "offgrid_check": {"type": "boolean", "description": "re-solve on a 4x grid to report FIR error"},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "steering": dict(_PAIR, description="[d_phi, d_theta] in [-1, 1]"),
                "look": dict(_PAIR, description="[az, el]; overrides steering"),
                "freqs": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "band": _RANGE,
            },
        },
        "compare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"az": _RANGE, "el": _RANGE, "step": {"type": "number", "exclusiveMinimum": 0},
                           "band": _RANGE},
        },
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sources": {
                    "type": "array", "minItems": 1,
                    "items": {
                        "type": "object", "additionalProperties": False, "required": ["direction"],
                        "properties": {
                            "direction": _PAIR,
                            "wav": {"type": "string"},
                            "synthetic_seed": {"type": "integer", "minimum": 0},
                        },
                    },
                },
                "duration": {"type": "number", "exclusiveMinimum": 0},
                "snr_db": {"type": ["number", "null"]},
                "ir_length": {"type": "integer", "minimum": 1},
                "reference_channel": {"type": "integer", "minimum": 0},
            },
        },
        "process": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "block_size": {"type": "integer", "minimum": 1},
                "crossfade": {"type": "boolean"},
                "format": {"enum": ["float32", "pcm16"]},
            },
        },
    },
}

_BASE = {
    "array": {"kind": "spherical_cap", "n": 12, "radius": 0.09, "cap_deg": 75.0, "front": [90.0, 90.0]},
    "model": {"kind": "free_field", "sound_speed": 343.0},
    "analysis": {"steering": [0.0, 0.0], "freqs": [500.0, 1000.0, 2000.0, 4000.0], "band": [300.0, 5000.0]},
    "compare": {"az": [30.0, 150.0], "el": [30.0, 150.0], "step": 15.0, "band": [300.0, 5000.0]},
    "simulate": {
        "sources": [{"direction": [90.0, 90.0], "synthetic_seed": 1},
                    {"direction": [150.0, 90.0], "synthetic_seed": 2}],
        "duration": 10.0, "snr_db": 40.0, "ir_length": 64, "reference_channel": 0,
    },
    "process": {"block_size": 256, "crossfade": True, "format": "float32"},
}


def merge(base: dict, override: dict) -> dict:
    """Recursive dictionary merge; ``override`` wins, lists are replaced."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


PRESETS = {
    "desk": merge(_BASE, {"design": {
        "fs": 16000.0, "fir_length": 128, "P": 2, "R": 2,
        "plds": {"az": [60.0, 120.0], "el": [60.0, 120.0], "step": 30.0},
        "gamma_db": -20.0, "beamwidth_3db": 20.0, "grid_step": 10.0,
        "tol": 1e-9, "max_iter": 200, "workers": 1, "offgrid_check": True,
    }, "compare": {"az": [60.0, 120.0], "el": [60.0, 120.0], "step": 15.0}}),
    "paper": merge(_BASE, {
        "design": {
            "fs": 16000.0, "fir_length": 512, "P": 4, "R": 4,
            "plds": {"az": [30.0, 150.0], "el": [30.0, 150.0], "step": 30.0},
            "gamma_db": -20.0, "beamwidth_3db": 20.0, "grid_step": 5.0,
            "tol": 1e-9, "max_iter": 200, "workers": 4, "offgrid_check": False,
        },
        "model": {"kind": "rigid_sphere"},
        "compare": {"az": [30.0, 150.0], "el": [30.0, 150.0], "step": 5.0},
        "simulate": {"duration": 20.0},
    }),
}


def validate(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    return cfg


def load_config(path=None, preset: str = "desk") -> dict:
    """Preset merged with an optional JSON file, validated against :data:`SCHEMA`."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    cfg = PRESETS[preset]
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{p}: top level must be an object")
        validate(user)
        cfg = merge(cfg, user)
    return validate(cfg)


def build_geometry(acfg: dict) -> ArrayGeometry:
    kind = acfg["kind"]
    if kind == "spherical_cap":
        return spherical_cap_array(acfg.get("n", 12), acfg.get("radius", 0.09), acfg.get("cap_deg", 75.0),
                                   Direction(*acfg.get("front", [90.0, 90.0])))
    if kind == "linear":
        if "spacing" not in acfg or "n" not in acfg:
            raise ConfigError("linear arrays need 'n' and 'spacing'")
        return linear_array(acfg["n"], acfg["spacing"], acfg.get("axis", 0))
    if "positions" not in acfg:
        raise ConfigError("array kind 'positions' needs a 'positions' list")
    return ArrayGeometry(np.asarray(acfg["positions"], dtype=float))


def build_model(cfg: dict, base_dir: Path | None = None):
    mcfg = cfg["model"]
    kind = mcfg.get("kind", "free_field")
    c = mcfg.get("sound_speed", 343.0)
    if kind == "measured":
        if "path" not in mcfg:
            raise ConfigError("measured model needs 'path'")
        p = Path(mcfg["path"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return MeasuredModel(load_ir_set(p), mcfg.get("nearest", False), str(mcfg["path"]))
    geo = build_geometry(cfg["array"])
    if kind == "rigid_sphere":
        return RigidSphereModel.from_geometry(geo, c)
    return FreeFieldModel(geo, c)


def plds_from_config(p) -> list[Direction]:
    if isinstance(p, dict):
        return make_pld_grid(p["az"], p["el"], p["step"])
    return [Direction(a, e) for a, e in p]


def build_design_spec(cfg: dict, model) -> DesignSpec:
    d = cfg.get("design")
    if d is None:
        raise ConfigError("config has no 'design' section")
    try:
        return DesignSpec(
            model=model,
            fs=float(d["fs"]),
            fir_length=int(d["fir_length"]),
            P=int(d["P"]),
            R=int(d["R"]),
            plds=plds_from_config(d["plds"]),
            gamma=10.0 ** (float(d["gamma_db"]) / 10.0),
            beamwidth_3db=float(d["beamwidth_3db"]),
            grid_step=float(d["grid_step"]),
            tol=float(d.get("tol", 1e-9)),
            max_iter=int(d.get("max_iter", 200)),
        )
    except KeyError as exc:
        raise ConfigError(f"design section lacks {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
