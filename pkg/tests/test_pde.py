from __future__ import annotations

import math

import numpy as np
import pytest

from qstencil.errors import RangeError, StabilityError, ValidationError
from qstencil.kernels import NormWindow
from qstencil.pde import (
    BURGERS, HEAT, BurgersParams, Field, Grid1D, Problem, auto_dt, burgers_reference,
    burgers_weights, classical_step, heat_analytic, heat_weights, quantum_step, shock_diagnostic,
)
from qstencil.presets import build_problem
from qstencil.statevector import ShotSampler


@pytest.mark.parametrize("lam, w", [
    (0.25, (0.25, 0.5, 0.25)), (0.0, (0, 1, 0)), (0.5, (0.5, 0, 0.5)),
])
def test_heat_weights(lam, w):
    assert heat_weights(lam) == pytest.approx(w)


@pytest.mark.parametrize("lam", [-0.01, 0.51])
def test_heat_weights_unstable(lam):
    with pytest.raises(StabilityError, match="1/2"):
        heat_weights(lam)


def _params(c, lam, dx=0.1):
    # choose nu, dt so that lam = nu dt/dx^2 and c = u dt/dx with u = c
    dt = dx
    return BurgersParams(nu=lam * dx * dx / dt, dt=dt, dx=dx)


@pytest.mark.parametrize("u, lam, w", [
    (0.0, 0.1, (0.1, 0.8, 0.1)),
    (0.2, 0.1, (0.3, 0.6, 0.1)),
    (-0.2, 0.1, (0.1, 0.6, 0.3)),
])
def test_burgers_weights(u, lam, w):
    assert burgers_weights(u, _params(u, lam)) == pytest.approx(w)


def test_burgers_cfl_names_node():
    with pytest.raises(StabilityError, match="node 7"):
        burgers_weights(0.95, _params(0.95, 0.1), node=7)


def _loop_burgers_step(u, nu, dt, dx):
    """Independent straightforward upwind + FTCS loop with zero ghosts."""
    n = len(u)
    p = [0.0] + list(u) + [0.0]
    out = np.empty(n)
    for i in range(1, n + 1):
        c = p[i] * dt / dx
        lam = nu * dt / dx ** 2
        adv = -c * (p[i] - p[i - 1]) if c > 0 else -c * (p[i + 1] - p[i])
        out[i - 1] = p[i] + adv + lam * (p[i + 1] - 2 * p[i] + p[i - 1])
    return out


def test_burgers_step_matches_loop():
    prob = build_problem("burgers-paper-pde")
    f1 = classical_step(prob.initial_field(), prob)
    ref = _loop_burgers_step(prob.initial_field().values, prob.nu, prob.dt, prob.grid.dx)
    assert np.max(np.abs(f1.values - ref)) <= 1e-14


def test_heat_step_matches_formula():
    prob = build_problem("heat-default")
    u = prob.initial_field().padded()
    lam = prob.lam
    expected = lam * u[:-2] + (1 - 2 * lam) * u[1:-1] + lam * u[2:]
    assert np.allclose(classical_step(prob.initial_field(), prob).values, expected, atol=1e-15)


@pytest.mark.parametrize("preset", ["heat-default", "burgers-paper-setup"])
def test_constant_field_unchanged(preset):
    prob = build_problem(preset)
    c = 0.3
    f = Field(np.full(prob.grid.N, c), c, c)
    assert np.allclose(classical_step(f, prob).values, c, atol=1e-15)


@pytest.mark.parametrize("preset", ["heat-default", "burgers-paper-setup"])
@pytest.mark.parametrize("kernel", ["bernoulli", "branching"])
def test_exact_quantum_step_matches_classical(preset, kernel):
    prob = build_problem(preset)
    f = prob.initial_field()
    for _ in range(3):
        q, _ = quantum_step(f, prob, kernel, 1, ShotSampler(0), exact=True)
        c = classical_step(f, prob)
        assert np.max(np.abs(q.values - c.values)) <= 1e-12
        f = c


@pytest.mark.parametrize("kernel", ["bernoulli", "branching"])
def test_sampled_heat_step_error_bound(kernel):
    prob = build_problem("heat-default")
    M = 4000
    q, rep = quantum_step(prob.initial_field(), prob, kernel, M, ShotSampler(7))
    c = classical_step(prob.initial_field(), prob)
    assert np.max(np.abs(q.values - c.values)) <= 5 / (2 * math.sqrt(M)) * prob.window.width
    assert len(rep.results) == prob.grid.N


@pytest.mark.parametrize("kernel", ["bernoulli", "branching"])
def test_zero_field_stays_zero(kernel):
    prob = build_problem("heat-default", N=8)
    f = Field(np.zeros(8))
    q, _ = quantum_step(f, prob, kernel, 37, ShotSampler(1))
    assert np.all(q.values == 0)


def test_window_violation_names_node():
    prob = build_problem("heat-default", N=5)
    f = Field(np.array([0.1, 0.2, 1.3, 0.2, 0.1]))
    with pytest.raises(RangeError) as exc:
        quantum_step(f, prob, "branching", 100, ShotSampler(0))
    assert 3 in tuple(exc.value.nodes)


def test_fused_step_uses_same_expectation():
    prob = build_problem("heat-default", N=8)
    f = prob.initial_field()
    a, _ = quantum_step(f, prob, "branching", 20000, ShotSampler(2), fuse_k=4)
    c = classical_step(f, prob)
    assert np.max(np.abs(a.values - c.values)) <= 5 * 0.5 / math.sqrt(20000)


def test_heat_analytic():
    x = np.array([0.0, 0.5, 1.0])
    assert heat_analytic(x, 0.0, 1.0) == pytest.approx(np.sin(np.pi * x), abs=1e-15)
    v = heat_analytic(x, 0.1, 1.0)
    assert v[0] == pytest.approx(0, abs=1e-15) and v[2] == pytest.approx(0, abs=1e-15)
    assert v[1] == pytest.approx(math.exp(-math.pi ** 2 * 0.1), abs=1e-15)
    assert v[1] == pytest.approx(0.3727, abs=1e-4)


def test_burgers_reference_antisymmetry():
    prob = build_problem("burgers-paper-setup")
    fields = burgers_reference(prob, 50)
    u = fields[-1].values
    assert np.max(np.abs(u + u[::-1])) <= 1e-12


def test_burgers_reference_cfl_reports_step():
    prob = Problem(BURGERS, Grid1D(8, -1, 1), 0.0, 0.2, NormWindow(-5, 5), lambda x: 4.0 * np.ones_like(x))
    with pytest.raises(StabilityError, match="step 1"):
        burgers_reference(prob, 3)


def test_auto_dt():
    dx = 1 / 65
    assert auto_dt(dx, 1.0, safety=1.0, kind=HEAT) == pytest.approx(dx * dx / 2)
    assert auto_dt(dx, 0.0, 1.0, safety=1.0) == pytest.approx(dx)
    assert auto_dt(dx, 0.0, 1.0, safety=0.5) == pytest.approx(dx / 2)
    assert auto_dt(dx, 1.0, safety=0.5, kind=HEAT) == pytest.approx(dx * dx / 4)
    with pytest.raises(ValidationError):
        auto_dt(dx, 0.0, 0.0)


def test_heat_problem_rejects_unstable_dt():
    with pytest.raises(StabilityError):
        Problem(HEAT, Grid1D(10), 1.0, 1.0, NormWindow(0, 1), np.sin)


def test_shock_diagnostic_locates_jump():
    g = Grid1D(9, -1, 1)
    u = np.where(g.x < 0, 1.0, -1.0)
    x, s = shock_diagnostic(Field(u, 1.0, -1.0), g)
    assert abs(x) < g.dx and s == pytest.approx(2 / g.dx)
