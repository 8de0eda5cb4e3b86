"""Run configuration: JSON document plus ``key=value`` overrides."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import PeriodicGrid
from .model import (LagrangianModel, TabulatedPotential, cosine_potential,
                    zero_potential)
from .semigroup import ActionKernel, build_kernel


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "model": {"kind": "mechanical", "potential": "cosine", "amplitude": 1.0,
              "axes": [0], "kinetic": None, "shift": None},
    "grid": {"dims": [256], "lengths": None},
    "dt": 0.05,
    "vmax": 4.0,
    "rule": "endpoint",
    "tol": 1e-10,
    "max_iter": 100000,
    "damping": 1.0,
    "direction": "backward",
    "init": "zero",
    "seed": 0,
    "symmetry": [],
    "harness_seeds": 4,
    "mather_tol": 1e-6,
    "orbit_start": None,
    "orbit_steps": 200,
    "output_dir": "weakkam-out",
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def parse_override(item: str):
    """``a.b=value``; the value is read as JSON when possible, else as text."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key.strip().split("."), val


@dataclass
class RunConfig:
    data: dict
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path=None, overrides=()):
        data = {}
        base = Path(".")
        if path is not None:
            path = Path(path)
            try:
                data = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config must be a JSON object")
            base = path.parent
        data = _merge(DEFAULTS, data)
        for item in overrides:
            keys, val = parse_override(item)
            node = data
            for k in keys[:-1]:
                node = node.setdefault(k, {})
                if not isinstance(node, dict):
                    raise ConfigError(f"override {item!r} descends into a non-object")
            node[keys[-1]] = val
        cfg = cls(data, base)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.data[key]

    # -- validation -----------------------------------------------------------

    def validate(self):
        d = self.data
        for name in ("dt", "tol"):
            _positive(d, name)
        if d["vmax"] is not None:
            _positive(d, "vmax")
        if not _is_pos(d["damping"]) or d["damping"] > 1:
            raise ConfigError(f"damping must lie in (0, 1], got {d['damping']!r}")
        if not isinstance(d["max_iter"], int) or d["max_iter"] <= 0:
            raise ConfigError(f"max_iter must be a positive integer, got {d['max_iter']!r}")
        if not isinstance(d["seed"], int):
            raise ConfigError(f"seed must be an integer, got {d['seed']!r}")
        if d["direction"] not in ("backward", "forward"):
            raise ConfigError(f"direction must be backward or forward, got {d['direction']!r}")
        if d["init"] not in ("zero", "random"):
            raise ConfigError(f"init must be zero or random, got {d['init']!r}")
        if d["rule"] not in ("endpoint", "midpoint"):
            raise ConfigError(f"rule must be endpoint or midpoint, got {d['rule']!r}")
        if not isinstance(d["harness_seeds"], int) or d["harness_seeds"] <= 0:
            raise ConfigError("harness_seeds must be a positive integer")
        _positive(d, "mather_tol")
        dims = d["grid"].get("dims")
        if not isinstance(dims, list) or not dims or any(not isinstance(n, int) or n < 3 for n in dims):
            raise ConfigError(f"grid.dims must be a list of integers >= 3, got {dims!r}")
        lengths = d["grid"].get("lengths")
        if lengths is not None:
            if not isinstance(lengths, list) or len(lengths) != len(dims):
                raise ConfigError("grid.lengths must match grid.dims")
            for a in lengths:
                if not _is_pos(a):
                    raise ConfigError(f"grid.lengths entries must be positive, got {a!r}")
        if not isinstance(d["symmetry"], list):
            raise ConfigError("symmetry must be a list of descriptors")
        for s in d["symmetry"]:
            if not isinstance(s, dict) or s.get("type") not in ("shift", "reflection"):
                raise ConfigError(f"bad symmetry descriptor {s!r}")
            if not isinstance(s.get("axis", 0), int) or not 0 <= s.get("axis", 0) < len(dims):
                raise ConfigError(f"symmetry axis out of range in {s!r}")
        m = d["model"]
        if m.get("kind") not in ("mechanical", "tabulated"):
            raise ConfigError(f"model.kind must be mechanical or tabulated, got {m.get('kind')!r}")
        pot = m.get("potential")
        if m["kind"] == "mechanical" and pot not in ("cosine", "zero"):
            raise ConfigError(f"model.potential must be cosine or zero, got {pot!r}")
        if m["kind"] == "tabulated" and not isinstance(pot, str):
            raise ConfigError("tabulated model.potential must be a CSV path")
        for key in ("kinetic", "shift"):
            val = m.get(key)
            if val is not None:
                arr = np.asarray(val, dtype=float)
                if not np.all(np.isfinite(arr)):
                    raise ConfigError(f"model.{key} must be finite")

    # -- builders -------------------------------------------------------------

    def grid(self) -> PeriodicGrid:
        dims = self.data["grid"]["dims"]
        lengths = self.data["grid"]["lengths"] or [2 * math.pi] * len(dims)
        return PeriodicGrid(tuple(dims), tuple(lengths))

    def model(self) -> LagrangianModel:
        m = self.data["model"]
        grid = self.grid()
        d = grid.ndim
        kin = m.get("kinetic")
        if kin is None:
            A = np.eye(d)
        else:
            A = np.asarray(kin, dtype=float)
            if A.ndim == 1:
                A = np.diag(A) if A.size == d else None
            if A is None or A.shape != (d, d):
                raise ConfigError(f"model.kinetic must give {d} coefficients or a {d}x{d} matrix")
        shift = m.get("shift")
        if shift is not None and len(np.atleast_1d(shift)) != d:
            raise ConfigError(f"model.shift must have {d} components")
        if m["kind"] == "tabulated":
            path = Path(m["potential"])
            if not path.is_absolute():
                path = self.base_dir / path
            U = TabulatedPotential(grid, _read_table(path, grid))
        elif m["potential"] == "zero":
            U = zero_potential
        else:
            axes = m.get("axes", [0])
            if any(not 0 <= a < d for a in axes):
                raise ConfigError("model.axes out of range")
            U = cosine_potential(float(m.get("amplitude", 1.0)), axes)
        try:
            return LagrangianModel(U, A, shift, m["kind"])
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from exc

    def kernel(self) -> ActionKernel:
        return build_kernel(self.model(), self.grid(), float(self.data["dt"]),
                            self.data["vmax"], self.data["rule"])


def _read_table(path: Path, grid: PeriodicGrid):
    import csv

    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read potential table {path}: {exc}") from exc
    try:
        vals = [float(r[-1]) for r in rows[1:]]
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed potential table") from exc
    if len(vals) != grid.size:
        raise ConfigError(f"{path}: expected {grid.size} rows, found {len(vals)}")
    return vals


def _is_pos(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) and x > 0


def _positive(d, name):
    if not _is_pos(d.get(name)):
        raise ConfigError(f"{name} must be a positive number, got {d.get(name)!r}")
