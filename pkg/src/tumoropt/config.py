"""Flat key-value experiment configuration.

One ``key = value`` pair per line, ``#`` starts a comment, keys are
dot-namespaced and validated against the known set (a typo is an error, not
a silently ignored default).  The full key list with defaults is in the
README; defaults reproduce the reference computational setup (unit square,
dt = 0.008, 250 steps, the standard parameter tables).
"""
from __future__ import annotations

import shlex
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

from .control import AdmissibleSet
from .cost import CostWeights
from .errors import ConfigError
from .mesh import Mesh, generate_unit_square, load_mesh
from .model import ModelParams
from .optimize import AdamConfig
from .state import TimeGrid

# perturbation grids of the local-minimum probe; overridable per config/CLI
DEFAULT_PERTS_C = (-0.0005, -0.0004, -0.0003, -0.0002, -0.0001, 0.0,
                   0.005, 0.01, 0.015, 0.02, 0.025, 0.03)
DEFAULT_PERTS_S = (-0.04, -0.035, -0.03, -0.025, -0.02, -0.015, -0.01,
                   -0.005, 0.0, 0.001, 0.002, 0.003, 0.004, 0.005, 0.006)


@dataclass
class ExperimentConfig:
    mesh_kind: str = "unit_square"
    mesh_nx: int = 32
    mesh_ny: int = 32
    mesh_path: str = ""
    mesh_format: str = "node-ele"
    dt: float = 0.008
    n_steps: int = 250
    params: ModelParams = field(default_factory=ModelParams)
    weights: CostWeights = field(default_factory=CostWeights)
    c_max: float = 0.25
    adam: AdamConfig = field(default_factory=AdamConfig)
    c0: float = 0.5
    s0: float = 0.5
    ic_project: bool = True
    satellite1: tuple | None = None
    satellite2: tuple | None = None
    perts_c: tuple = DEFAULT_PERTS_C
    perts_s: tuple = DEFAULT_PERTS_S
    out_dir: str = "out"
    stride: int = 25

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(dt=self.dt, n_steps=self.n_steps)

    @property
    def satellites(self):
        if self.satellite1 is None and self.satellite2 is None:
            return None
        if self.satellite1 is None or self.satellite2 is None:
            raise ConfigError(
                "ic.satellite1 and ic.satellite2 must be given together"
            )
        return (self.satellite1, self.satellite2)

    def build_mesh(self) -> Mesh:
        if self.mesh_kind == "unit_square":
            return generate_unit_square(self.mesh_nx, self.mesh_ny)
        if self.mesh_kind == "file":
            if not self.mesh_path:
                raise ConfigError("mesh.kind = file requires mesh.path")
            if not Path(self.mesh_path).exists() \
                    and not Path(self.mesh_path + ".node").exists():
                raise ConfigError(f"mesh file not found: {self.mesh_path}")
            return load_mesh(self.mesh_path, self.mesh_format)
        raise ConfigError(f"unknown mesh.kind {self.mesh_kind!r}")

    def admissible(self, mesh: Mesh) -> AdmissibleSet:
        return AdmissibleSet(c_max=self.c_max, omega_area=mesh.area)


_SCALAR_KEYS = {
    "mesh.kind": ("mesh_kind", str),
    "mesh.nx": ("mesh_nx", int),
    "mesh.ny": ("mesh_ny", int),
    "mesh.path": ("mesh_path", str),
    "mesh.format": ("mesh_format", str),
    "time.dt": ("dt", float),
    "time.steps": ("n_steps", int),
    "budget.c_max": ("c_max", float),
    "controls.c0": ("c0", float),
    "controls.s0": ("s0", float),
    "ic.project": ("ic_project", bool),
    "output.dir": ("out_dir", str),
    "output.stride": ("stride", int),
}
_PARAM_KEYS = {f"params.{f.name}": f.name for f in dc_fields(ModelParams)}
_WEIGHT_KEYS = {f"weights.{f.name}": f.name for f in dc_fields(CostWeights)}
_ADAM_KEYS = {f"adam.{f.name}": f.name for f in dc_fields(AdamConfig)}
_PAIR_KEYS = {"ic.satellite1": "satellite1", "ic.satellite2": "satellite2"}
_LIST_KEYS = {"probe.perts_c": "perts_c", "probe.perts_s": "perts_s"}


def _parse_bool(text, key, lineno, path):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{path}:{lineno}: {key} expects a boolean, got {text!r}")


def parse_config(path) -> ExperimentConfig:
    """Parse a config file; unknown keys and malformed values raise
    ConfigError with the file location."""
    path = str(path)
    try:
        with open(path) as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    cfg = ExperimentConfig()
    params, weights, adam = {}, {}, {}
    for lineno, line in enumerate(raw, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in text.split("=", 1))
        try:
            if key in _SCALAR_KEYS:
                attr, typ = _SCALAR_KEYS[key]
                parsed = _parse_bool(value, key, lineno, path) if typ is bool \
                    else typ(value)
                setattr(cfg, attr, parsed)
            elif key in _PARAM_KEYS:
                params[_PARAM_KEYS[key]] = float(value)
            elif key in _WEIGHT_KEYS:
                weights[_WEIGHT_KEYS[key]] = float(value)
            elif key in _ADAM_KEYS:
                name = _ADAM_KEYS[key]
                adam[name] = int(value) if name in ("n_stable", "max_iter") \
                    else float(value)
            elif key in _PAIR_KEYS:
                parts = [float(p) for p in shlex.split(value)]
                if len(parts) != 2:
                    raise ValueError("expected two coordinates")
                setattr(cfg, _PAIR_KEYS[key], tuple(parts))
            elif key in _LIST_KEYS:
                parts = value.replace(",", " ").split()
                setattr(cfg, _LIST_KEYS[key], tuple(float(p) for p in parts))
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") \
                from exc
    try:
        cfg.params = ModelParams(**params)
        cfg.weights = CostWeights(**weights)
        cfg.adam = AdamConfig(**adam)
        cfg.grid  # validates dt / steps
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg
