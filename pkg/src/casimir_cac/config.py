"""Run configuration: a single JSON file, schema-checked before any compute."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .contours import Contour, EquivalentMaterial, TabulatedMaterial
from .experiment import FluidModel
from .geometry import (IntegrationSurface, PistonGeometry, build_channel_plate,
                       build_parallel_plates_1d, build_piston, build_single_block,
                       load_mask_csv, setup_from_mask)
from .quadrature import QuadratureSpec
from .stress import FIELD_MODELS

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POSINT = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["builder"],
            "properties": {
                "builder": {"enum": ["piston", "single_block", "parallel_plates_1d",
                                     "channel_plate", "mask"]},
                "params": {"type": "object"},
                "surface_density": _POSINT,
                "mask_path": {"type": "string"},
                "surface": {
                    "type": "object", "additionalProperties": False,
                    "required": ["x0", "x1", "y0", "y1", "body"],
                    "properties": {"x0": _NUM, "x1": _NUM, "y0": _NUM, "y1": _NUM,
                                   "body": {"type": "string"}},
                },
            },
        },
        "contours": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["wick", "rotation", "conductive", "vacuum", "constant",
                                      "tabulated", "fluid", "fluid_tabulated"]},
                    "phi": _NUM,
                    "sigma": _POS,
                    "eps_s": _NUM,
                    "re": _NUM,
                    "im": _NUM,
                    "path": {"type": "string"},
                    "symmetric_extension": {"type": "boolean"},
                    "d_m": _POS,
                    "sigma_S_per_m": _POS,
                },
            },
        },
        "model": {"enum": sorted(FIELD_MODELS)},
        "quadrature": {
            "type": "object", "additionalProperties": False,
            "properties": {"xi_max": _POS, "xi_switch": _POS, "xi_linear": _POS,
                           "panel_width": _POS, "log_ratio": _POS, "order": _POSINT,
                           "rel_tol": _POS, "max_nodes": _POSINT},
        },
        "resolutions": {"type": "array", "minItems": 1, "maxItems": 2,
                        "items": {"type": "integer", "minimum": 8}},
        "out": {"type": "string"},
        "jobs": _POSINT,
        "vacuum_subtraction": {"type": "boolean"},
        "use_symmetry": {"type": "boolean"},
        "closure_offset": _NUM,
        "probes": {
            "type": "object", "additionalProperties": False,
            "properties": {"min": _POS, "max": _POS, "n": _POSINT},
        },
        "scan": {
            "type": "object", "additionalProperties": False,
            "properties": {"re_min": _NUM, "re_max": _NUM, "im_min": _NUM, "im_max": _NUM,
                           "n_re": _POSINT, "n_im": _POSINT, "resolution": {"type": "integer",
                                                                             "minimum": 8}},
        },
        "experiment": {
            "type": "object", "additionalProperties": False,
            "properties": {"d_m": _POS, "eps_s": {"type": "number", "minimum": 1},
                           "sigma_S_per_m": _POS, "ceiling_Hz": _POS,
                           "fraction": {"type": "number", "exclusiveMinimum": 0,
                                        "exclusiveMaximum": 1},
                           "orientations": {"type": "array", "minItems": 1,
                                            "items": {"enum": ["x", "y", "z"]}},
                           "f_min_Hz": _POS, "f_max_Hz": _POS, "n_freq": _POSINT,
                           "antennas": _POSINT},
        },
    },
}

DEFAULTS = {
    "geometry": {"builder": "piston", "params": {}, "surface_density": 1},
    "contours": [{"kind": "conductive", "sigma": 100.0}],
    "model": "2d-tm",
    "quadrature": {},
    "resolutions": [32],
    "out": "out",
    "jobs": 1,
    "vacuum_subtraction": False,
    "use_symmetry": True,
    "closure_offset": 0.0,
    "probes": {"min": 1e-4, "max": 1e2, "n": 25},
    "scan": {"re_min": 0.0, "re_max": 10.0, "im_min": 0.0, "im_max": 10.0,
             "n_re": 11, "n_im": 11, "resolution": 16},
    "experiment": {"d_m": 0.3, "eps_s": 80.0, "sigma_S_per_m": 5.0, "ceiling_Hz": 10e9,
                   "fraction": 0.9, "orientations": ["x", "y", "z"],
                   "f_min_Hz": 1e5, "f_max_Hz": 2e9, "n_freq": 60, "antennas": 4},
}

# keys that do not change numerical output
_NON_NUMERIC = ("out", "jobs")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        jsonschema.validate(raw, SCHEMA)
        return cls(_merge(DEFAULTS, raw))

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def override(self, **kw) -> "RunConfig":
        data = copy.deepcopy(self.data)
        for k, v in kw.items():
            if v is not None:
                data[k] = v
        jsonschema.validate(data, SCHEMA)
        return RunConfig(data)

    def __getitem__(self, key):
        return self.data[key]

    def sha256(self) -> str:
        numeric = {k: v for k, v in self.data.items() if k not in _NON_NUMERIC}
        blob = json.dumps(numeric, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def header(self) -> str:
        return f"casimir_cac {__version__} config_sha256={self.sha256()}"

    # -- builders -------------------------------------------------------

    def setup(self, resolution: int):
        g = self.data["geometry"]
        params = dict(g.get("params", {}))
        density = g.get("surface_density", 1)
        builder = g["builder"]
        if builder == "piston":
            return build_piston(PistonGeometry(**params), resolution, density)
        if builder == "single_block":
            return build_single_block(PistonGeometry(**params), resolution, density)
        if builder == "parallel_plates_1d":
            return build_parallel_plates_1d(resolution=resolution, **params)
        if builder == "channel_plate":
            return build_channel_plate(resolution=resolution, **params)
        if "mask_path" not in g or "surface" not in g:
            raise ValueError("mask geometry needs mask_path and surface")
        grid, material = load_mask_csv(g["mask_path"])
        if grid.resolution != resolution:
            raise ValueError(f"mask is at resolution {grid.resolution}, not {resolution}")
        s = g["surface"]
        surface = IntegrationSurface.rectangle(s["x0"], s["x1"], s["y0"], s["y1"], s["body"])
        return setup_from_mask(grid, material, surface, density)

    def contours(self) -> list:
        return [contour_from_record(r) for r in self.data["contours"]]

    def quadrature(self, contour: Contour) -> QuadratureSpec:
        return QuadratureSpec.for_contour(contour, **self.data["quadrature"])

    def fluid(self) -> FluidModel:
        e = self.data["experiment"]
        return FluidModel(e["eps_s"], e["sigma_S_per_m"], e["ceiling_Hz"])


def contour_from_record(rec: dict) -> Contour:
    kind = rec["kind"]
    if kind == "wick":
        return Contour.wick()
    if kind == "rotation":
        return Contour.rotation(rec.get("phi", np.pi / 4))
    if kind == "conductive":
        if "sigma" not in rec:
            raise ValueError("conductive contour needs sigma")
        return Contour.conductive(rec["sigma"])
    if kind == "vacuum":
        return Contour.from_material(EquivalentMaterial.vacuum())
    if kind == "constant":
        return Contour.from_material(EquivalentMaterial.constant(
            complex(rec.get("re", 1.0), rec.get("im", 0.0))))
    if kind == "tabulated":
        if "path" not in rec:
            raise ValueError("tabulated contour needs path")
        return Contour.from_material(
            TabulatedMaterial.from_csv(rec["path"], rec.get("symmetric_extension", False)))
    fluid = FluidModel(rec.get("eps_s", 80.0), rec.get("sigma_S_per_m", 5.0))
    d = rec.get("d_m", 0.3)
    if kind == "fluid":
        return Contour.from_material(fluid.equivalent_material(d))
    # fluid_tabulated: samples of the SI model, interpolated
    return Contour.from_material(tabulated_fluid(fluid, d))


def tabulated_fluid(fluid: FluidModel, d_si: float, n: int = 60) -> TabulatedMaterial:
    from .experiment import fluid_eps, xi_to_hz
    xi = np.logspace(-6, 3, n)
    vals = fluid_eps(fluid, xi_to_hz(xi, d_si), warn=False)
    return TabulatedMaterial(xi, vals, True, f"tabulated fluid (d={d_si:g} m)")
