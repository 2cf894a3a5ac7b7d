"""
1D Heat and viscous Burgers problems on explicit three-point stencils.

Both updates are convex averages u_i^{n+1} = sum_b w_b u_b^n (+ dt*s for
Heat), which is what lets a micro-kernel sample them. `classical_step` is the
deterministic update and doubles as the expectation oracle for
`quantum_step`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import StabilityError, ValidationError
from .kernels import (
    EXACT, KERNELS, KernelResult, NormWindow, build_branching_circuit, denormalize,
    fuse, fused_estimates, normalize,
)
from .noise import ReadoutModel
from .statevector import ShotSampler

HEAT, BURGERS = "heat", "burgers"

Source = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class Grid1D:
    N: int
    x_lo: float = 0.0
    x_hi: float = 1.0

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError("grid needs N >= 1 interior nodes")
        if not self.x_hi > self.x_lo:
            raise ValidationError("grid needs x_hi > x_lo")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / (self.N + 1)

    @property
    def x(self) -> np.ndarray:
        """Interior node positions x_1 .. x_N."""
        return self.x_lo + self.dx * np.arange(1, self.N + 1)


@dataclass(frozen=True)
class Field:
    values: np.ndarray
    ghost_lo: float = 0.0
    ghost_hi: float = 0.0
    time: float = 0.0
    window: NormWindow | None = None

    def padded(self) -> np.ndarray:
        return np.concatenate(([self.ghost_lo], self.values, [self.ghost_hi]))


@dataclass(frozen=True)
class HeatParams:
    nu: float
    dt: float
    dx: float

    @property
    def lam(self) -> float:
        return self.nu * self.dt / self.dx ** 2


@dataclass(frozen=True)
class BurgersParams:
    nu: float
    dt: float
    dx: float

    @property
    def lam(self) -> float:
        return self.nu * self.dt / self.dx ** 2


def heat_weights(lam: float) -> np.ndarray:
    if not 0.0 <= lam <= 0.5:
        raise StabilityError(f"lambda = nu*dt/dx^2 = {lam:.6g} violates 0 <= lambda <= 1/2")
    return np.array([lam, 1.0 - 2.0 * lam, lam])


def burgers_weights(u_i: float, params: BurgersParams, node: int | None = None) -> np.ndarray:
    """Upwind (Courant-split) advection plus centred diffusion weights."""
    return _burgers_weight_rows(np.array([u_i], dtype=float), params,
                                None if node is None else [node])[0]


def _burgers_weight_rows(u: np.ndarray, params: BurgersParams, labels=None) -> np.ndarray:
    lam = params.lam
    c = u * params.dt / params.dx
    cfl = np.abs(c) + 2.0 * lam
    bad = np.flatnonzero(cfl > 1.0 + 1e-12)
    if bad.size:
        k = int(bad[0])
        node = labels[k] if labels is not None else k + 1
        raise StabilityError(
            f"CFL violated at node {node}: |u|dt/dx + 2 nu dt/dx^2 = {cfl[k]:.6g} > 1"
        )
    wl = lam + np.maximum(c, 0.0)
    wr = lam + np.maximum(-c, 0.0)
    wc = 1.0 - (wl + wr)
    # wc may dip below zero by roundoff on the CFL boundary
    wc = np.where((wc < 0) & (wc > -1e-12), 0.0, wc)
    return np.stack([wl, wc, wr], axis=1)


@dataclass(frozen=True)
class Problem:
    """A PDE instance: grid, coefficients, time step, window and data."""
    kind: str
    grid: Grid1D
    nu: float
    dt: float
    window: NormWindow
    initial: Callable[[np.ndarray], np.ndarray]
    source: Source | None = None
    bc_lo: float = 0.0
    bc_hi: float = 0.0
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (HEAT, BURGERS):
            raise ValidationError(f"unknown PDE kind {self.kind!r}")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.kind == HEAT:
            heat_weights(self.lam)

    @property
    def lam(self) -> float:
        return self.nu * self.dt / self.grid.dx ** 2

    def initial_field(self) -> Field:
        u0 = np.asarray(self.initial(self.grid.x), dtype=float)
        return Field(u0, self.bc_lo, self.bc_hi, 0.0, self.window)

    def weights(self, values: np.ndarray) -> np.ndarray:
        """(N, 3) stencil weights for every interior node."""
        if self.kind == HEAT:
            return np.tile(heat_weights(self.lam), (len(values), 1))
        return _burgers_weight_rows(np.asarray(values, dtype=float),
                                    BurgersParams(self.nu, self.dt, self.grid.dx))

    def source_term(self, t: float) -> np.ndarray | None:
        if self.source is None:
            return None
        return np.asarray(self.source(self.grid.x, t), dtype=float)

    def with_dt(self, dt: float) -> "Problem":
        return replace(self, dt=dt)


def auto_dt(dx: float, nu: float, u_max_abs: float = 0.0, safety: float = 1.0,
            kind: str = BURGERS) -> float:
    """Largest stable time step scaled by `safety`.

    Heat: nu*dt/dx^2 <= safety/2. Burgers: u_max_abs*dt/dx + 2*nu*dt/dx^2 <= safety.
    """
    if not 0 < safety <= 1:
        raise ValidationError("safety must lie in (0, 1]")
    if nu < 0 or u_max_abs < 0:
        raise ValidationError("nu and u_max_abs must be nonnegative")
    if kind == HEAT:
        if nu == 0:
            raise ValidationError("heat time step undefined for nu = 0")
        return safety * 0.5 * dx * dx / nu
    rate = u_max_abs / dx + 2.0 * nu / dx ** 2
    if rate == 0:
        raise ValidationError("time step undefined for nu = 0 and u_max_abs = 0")
    return safety / rate


def _stencil_rows(padded: np.ndarray) -> np.ndarray:
    return np.stack([padded[:-2], padded[1:-1], padded[2:]], axis=1)


def classical_step(field: Field, problem: Problem) -> Field:
    """Deterministic convex update with boundaries re-imposed."""
    w = problem.weights(field.values)
    new = np.sum(w * _stencil_rows(field.padded()), axis=1)
    s = problem.source_term(field.time)
    if s is not None:
        new = new + problem.dt * s
    return Field(new, problem.bc_lo, problem.bc_hi, field.time + problem.dt, field.window)


@dataclass
class StepReport:
    results: list[KernelResult]
    clipped: int = 0


def quantum_step(field: Field, problem: Problem, kernel: str, M: int,
                 sampler: ShotSampler, readout: ReadoutModel | None = None,
                 exact: bool = False, fuse_k: int = 1) -> tuple[Field, StepReport]:
    """One time step with every node update estimated by a micro-kernel.

    Node i draws from ``sampler.child(i)``. With ``exact=True`` sampling is
    replaced by the circuits' exact readout probabilities (infinite-shot
    limit). ``fuse_k > 1`` runs groups of k branching kernels as one fused
    circuit; group g draws from ``sampler.child(g)``.
    """
    if kernel not in KERNELS:
        raise ValidationError(f"unknown kernel {kernel!r}")
    window = problem.window
    # padded index == node index, so range errors name grid nodes (0 = ghost)
    v = _stencil_rows(normalize(field.padded(), window))
    w = problem.weights(field.values)
    N = problem.grid.N
    if exact:
        results = [KernelResult(EXACT[kernel](v[i], w[i]), 0.0, 0) for i in range(N)]
    elif fuse_k > 1:
        if kernel != "branching":
            raise ValidationError("in-circuit fusion is implemented for the branching kernel")
        results = _fused_results(v, w, M, sampler, readout, fuse_k)
    else:
        results = [KERNELS[kernel](v[i], w[i], M, sampler.child(i), readout) for i in range(N)]
    est = np.array([r.estimate for r in results])
    new = denormalize(est, window)
    s = problem.source_term(field.time)
    if s is not None:
        new = new + problem.dt * s
    out = Field(new, problem.bc_lo, problem.bc_hi, field.time + problem.dt, field.window)
    return out, StepReport(results, sum(r.clipped for r in results))


def _fused_results(v, w, M, sampler, readout, k) -> list[KernelResult]:
    out = []
    for g, start in enumerate(range(0, len(v), k)):
        idx = range(start, min(start + k, len(v)))
        fused = fuse([build_branching_circuit(v[i], w[i]) for i in idx])
        s = sampler.child(g)
        block = fused_estimates(fused, M, s)
        if readout is not None:
            rng = s.child(1).generator()
            noisy = []
            for r in block:
                p, p_obs, scale, clipped = readout.apply(r.raw_counts[1], M, rng)
                se = scale * math.sqrt(p_obs * (1 - p_obs) / M)
                noisy.append(KernelResult(p, se, M, r.raw_counts, int(clipped)))
            block = noisy
        out.extend(block)
    return out


def heat_analytic(x, t: float, nu: float):
    """Exact solution for u0 = sin(pi x) on [0, 1], zero Dirichlet data."""
    return math.exp(-nu * math.pi ** 2 * t) * np.sin(np.pi * np.asarray(x, dtype=float))


def burgers_reference(problem: Problem, steps: int, field: Field | None = None) -> list[Field]:
    """Classical upwind+FTCS trajectory (fields at steps 0..steps)."""
    f = field if field is not None else problem.initial_field()
    out = [f]
    for n in range(steps):
        try:
            f = classical_step(f, problem)
        except StabilityError as e:
            raise StabilityError(f"step {n + 1}: {e}") from e
        out.append(f)
    return out


def shock_diagnostic(field: Field, grid: Grid1D) -> tuple[float, float]:
    """Location and strength of the steepest downward jump.

    Returns ``(x, steepness)``: the midpoint of the interface with the most
    negative du/dx, and -du/dx there.
    """
    slope = np.diff(field.padded()) / grid.dx
    k = int(np.argmin(slope))
    return grid.x_lo + (k + 0.5) * grid.dx, float(-slope[k])
