"""Named problem, noise and delay presets."""
from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from .errors import ValidationError
from .kernels import NormWindow
from .noise import ConfusionMatrix
from .pde import BURGERS, HEAT, Grid1D, Problem, auto_dt
from .runtime import DelayModel, affine_from_anchors

# dt_safety scales the largest CFL-stable step (see auto_dt)
PROBLEM_PRESETS: dict[str, dict] = {
    "heat-default": {
        "pde": HEAT, "N": 64, "x_lo": 0.0, "x_hi": 1.0, "nu": 1.0,
        "window": [0.0, 1.0], "initial": "sin", "dt_safety": 0.8,
    },
    "burgers-paper-pde": {
        "pde": BURGERS, "N": 64, "x_lo": -1.0, "x_hi": 1.0, "nu": 0.01 / math.pi,
        "window": [-1.0, 1.0], "initial": "-sin", "dt_safety": 0.8,
    },
    "burgers-paper-setup": {
        "pde": BURGERS, "N": 64, "x_lo": -1.0, "x_hi": 1.0, "nu": 0.001,
        "window": [-1.0, 1.0], "initial": "-sin", "dt_safety": 0.8,
    },
}

# row-major [m00, m01, m10, m11], entry (i, j) = Pr(measure i | prepared j)
NOISE_PRESETS: dict[str, list[float] | None] = {
    "none": None,
    "brisbane-snapshot": [0.9040, 0.0112, 0.0960, 0.9888],
}

_EXEC_A, _EXEC_B = affine_from_anchors(4000, 3.501, 30000, 11.421)

DELAY_PRESETS: dict[str, dict] = {
    "zero": {},
    "brisbane-table4": {
        "queue_mean": 0.466, "queue_sigma": 0.28,
        "exec_intercept": _EXEC_A, "exec_per_shot": _EXEC_B, "exec_sigma": 0.10,
        # wall minus (transpile + queue + execution), averaged over both rows
        "residual": 0.5 * ((4.765 - 0.022 - 0.466 - 3.501) + (12.812 - 0.029 - 0.497 - 11.421)),
    },
}

_INITIAL = {
    "sin": lambda x: np.sin(np.pi * x),
    "-sin": lambda x: -np.sin(np.pi * x),
}


def preset_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _lookup(table: dict, name: str, what: str):
    if name not in table:
        raise ValidationError(f"unknown {what} preset {name!r}; choose from {sorted(table)}")
    return table[name]


def preset_settings(name: str, N: int | None = None, dt_safety: float | None = None) -> dict:
    settings = dict(_lookup(PROBLEM_PRESETS, name, "problem"))
    if N is not None:
        settings["N"] = int(N)
    if dt_safety is not None:
        settings["dt_safety"] = float(dt_safety)
    return settings


def build_problem(name: str, N: int | None = None, dt_safety: float | None = None) -> Problem:
    settings = preset_settings(name, N, dt_safety)
    grid = Grid1D(settings["N"], settings["x_lo"], settings["x_hi"])
    initial = _INITIAL[settings["initial"]]
    # bound |u| by the window so every in-window field satisfies the CFL
    u_max = float(max(abs(w) for w in settings["window"]))
    dt = auto_dt(grid.dx, settings["nu"], u_max, settings["dt_safety"], kind=settings["pde"])
    return Problem(settings["pde"], grid, settings["nu"], dt, NormWindow(*settings["window"]),
                   initial, name=name, meta=settings)


def noise_model(name: str) -> ConfusionMatrix | None:
    rec = _lookup(NOISE_PRESETS, name, "noise")
    return None if rec is None else ConfusionMatrix.from_record(rec)


def delay_model(name: str) -> DelayModel:
    return DelayModel(**_lookup(DELAY_PRESETS, name, "delay"))
