"""Experiment recipes: one JSON document describing phantom, acquisition,
forward model and reconstruction method.

Schema (all sections except ``name`` and ``phantom`` optional)::

    {
      "name": "disk2-born",
      "phantom": {"kind": "disk", "radius": 2.0, "amplitude": 1.0},
      "acquisition": {"n_angles": 40, "frequencies": [1.0], "r_m": 10.0,
                      "l_m": 10.0, "m": 200, "c0": 1.0,
                      "source": {"kind": "plane"}, "snr_db": 50.0, "seed": 1},
      "forward": {"ppw": 12.0, "rotate": "medium", "dispersion": null,
                  "receiver_order": 3, "margin_wavelengths": 2.0},
      "reconstruction": {"method": "born", "grid_n": 240, "half_width": null,
                         "cg_iters": 20, "psnr_window": 14.142},
      "fwi": {"frequencies": [1.0], "n_iter": 50, "ppw": 10.0, "margin": 2.0,
              "window_radius": null, "parameter": "speed", "step_fraction": 0.01},
      "compare": {"models": ["pde-scattered", "born-convolution"],
                  "frequency": 1.0, "angle_index": 0}
    }

Frequencies are ``omega / 2 pi``; potentials are given at
``omega / 2 pi = 1``.  Phantom kinds: ``disk`` (``radius``,
``amplitude``), ``phantom1`` (``heart_amplitude``), ``phantom2``
(``amplitude``), ``scene`` (``primitives`` as in :class:`SceneSpec`) and
``none`` (zero contrast).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .fields import AcquisitionConfig, Grid, RealField, SourceConfig
from .phantom import SceneSpec, disk_potential, phantom1, phantom2, potential_to_speed, render_scene

REFERENCE_OMEGA = 2 * np.pi
METHODS = ("born", "rytov", "fwi")
COMPARE_MODELS = ("pde-scattered", "born-pde", "born-convolution", "line-source", "point-source")

_DEFAULTS = {
    "acquisition": {"n_angles": 40, "frequencies": [1.0], "r_m": 10.0, "l_m": 10.0, "m": 200,
                    "c0": 1.0, "source": {"kind": "plane"}, "snr_db": None, "seed": 0},
    "forward": {"ppw": 12.0, "rotate": "medium", "dispersion": None, "receiver_order": 3,
                "margin_wavelengths": 2.0},
    "reconstruction": {"method": "born", "grid_n": 240, "half_width": None, "cg_iters": 20,
                       "psnr_window": None},
    "fwi": {"frequencies": None, "n_iter": 50, "ppw": 10.0, "margin": 2.0, "window_radius": None,
            "parameter": "speed", "step_fraction": 0.01},
    "compare": {"models": ["pde-scattered", "born-convolution"], "frequency": 1.0,
                "angle_index": 0, "line_source": {"count": 441, "half_length": 22.0,
                                                  "distance": 15.0},
                "point_source": {"distance": 480.0}},
}


class RecipeError(ValueError):
    pass


def _merge(defaults: dict, given: dict, where: str) -> dict:
    unknown = set(given) - set(defaults)
    if unknown:
        raise RecipeError(f"{where}: unknown keys {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    out.update(copy.deepcopy(given))
    return out


@dataclass
class Recipe:
    name: str
    phantom: dict
    acquisition: dict = field(default_factory=dict)
    forward: dict = field(default_factory=dict)
    reconstruction: dict = field(default_factory=dict)
    fwi: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "Recipe":
        d = dict(d)
        unknown = set(d) - {"name", "phantom", *_DEFAULTS}
        if unknown:
            raise RecipeError(f"unknown recipe sections {sorted(unknown)}")
        if "name" not in d or "phantom" not in d:
            raise RecipeError("a recipe needs 'name' and 'phantom'")
        sections = {k: _merge(v, d.get(k, {}), k) for k, v in _DEFAULTS.items()}
        r = cls(name=str(d["name"]), phantom=dict(d["phantom"]), **sections)
        r.validate()
        return r

    def to_dict(self) -> dict:
        return {"name": self.name, "phantom": self.phantom, "acquisition": self.acquisition,
                "forward": self.forward, "reconstruction": self.reconstruction,
                "fwi": self.fwi, "compare": self.compare}

    def validate(self) -> None:
        method = self.reconstruction["method"]
        if method not in METHODS:
            raise RecipeError(f"reconstruction.method must be one of {METHODS}")
        if self.reconstruction["cg_iters"] < 1:
            raise RecipeError("reconstruction.cg_iters must be >= 1")
        if self.forward["rotate"] not in ("medium", "acquisition"):
            raise RecipeError("forward.rotate must be 'medium' or 'acquisition'")
        for m in self.compare["models"]:
            if m not in COMPARE_MODELS:
                raise RecipeError(f"unknown forward model {m!r}; expected {COMPARE_MODELS}")
        self.acquisition_config()
        self.scene()
        if method == "fwi":
            ks = self.fwi_wavenumbers()
            have = self.acquisition_config().wavenumbers
            if any(not np.any(np.isclose(k, have, rtol=1e-12)) for k in ks):
                raise RecipeError("fwi.frequencies must be a subset of acquisition.frequencies")

    # -- builders ----------------------------------------------------------

    def acquisition_config(self) -> AcquisitionConfig:
        a = dict(self.acquisition)
        c0 = float(a.pop("c0"))
        freqs = a.pop("frequencies")
        src = a.pop("source") or {}
        try:
            return AcquisitionConfig(
                wavenumbers=tuple(2 * np.pi * float(f) / c0 for f in freqs),
                c0=c0, source=SourceConfig(**src), **a)
        except TypeError as exc:
            raise RecipeError(f"acquisition: {exc}") from None

    def fwi_wavenumbers(self) -> tuple:
        freqs = self.fwi["frequencies"] or self.acquisition["frequencies"]
        c0 = float(self.acquisition["c0"])
        return tuple(sorted(2 * np.pi * float(f) / c0 for f in freqs))

    def scene(self) -> SceneSpec | None:
        p = dict(self.phantom)
        kind = p.pop("kind", None)
        try:
            if kind == "disk":
                return None
            if kind == "none":
                return SceneSpec(())
            if kind == "phantom1":
                return phantom1(**p)
            if kind == "phantom2":
                return phantom2(**p)
            if kind == "scene":
                return SceneSpec.from_dict(p)
        except TypeError as exc:
            raise RecipeError(f"phantom: {exc}") from None
        if kind is None:
            raise RecipeError("phantom.kind is required")
        raise RecipeError(f"unknown phantom kind {kind!r}")

    def potential(self, grid: Grid) -> RealField:
        """Reference-frequency potential on ``grid``."""
        if self.phantom.get("kind") == "disk":
            return disk_potential(float(self.phantom["radius"]),
                                  float(self.phantom["amplitude"]), grid)
        return render_scene(self.scene(), grid)

    def max_potential(self) -> float:
        if self.phantom.get("kind") == "disk":
            return float(self.phantom["amplitude"])
        prims = self.scene().primitives
        return max([0.0] + [p.amplitude for p in prims]) if prims else 0.0

    def speed_min(self) -> float:
        """Smallest wave speed in the medium (drives the grid spacing)."""
        c0 = float(self.acquisition["c0"])
        fmax = self.max_potential()
        probe = RealField(Grid(1.0, 2), np.full((2, 2), max(fmax, 0.0)))
        return float(potential_to_speed(probe, REFERENCE_OMEGA, c0).values[0, 0])

    def speed(self, grid: Grid) -> RealField:
        return potential_to_speed(self.potential(grid), REFERENCE_OMEGA,
                                  float(self.acquisition["c0"]))


def load_recipe(source) -> Recipe:
    """Load a recipe from a JSON file path or a built-in recipe name."""
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        text = path.read_text()
    else:
        try:
            text = resources.files("difftomo.recipe_files").joinpath(f"{source}.json").read_text()
        except FileNotFoundError:
            raise RecipeError(f"no recipe file or built-in recipe named {source!r}") from None
    try:
        return Recipe.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise RecipeError(f"recipe is not valid JSON: {exc}") from None


def builtin_recipes() -> list:
    files = resources.files("difftomo.recipe_files").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".json"))
