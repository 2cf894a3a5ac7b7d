from __future__ import annotations

import math

import numpy as np
import pytest

from qstencil.errors import ResourceError, ValidationError
from qstencil.kernels import bernoulli_circuit, build_branching_circuit
from qstencil.statevector import (
    Circuit, Gate, ShotSampler, apply, gate_depth, histogram_ones, marginal,
    readout_probability, sample, sample_bits,
)


def dense_ry(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def dense_unitary(circuit: Circuit) -> np.ndarray:
    """Brute-force 2^n x 2^n matrix product; basis index bit q = qubit q."""
    n = circuit.width
    dim = 2 ** n
    U = np.eye(dim)
    for g in circuit.gates:
        G = np.zeros((dim, dim))
        single = dense_ry(g.angle) if g.kind != "X" else np.array([[0, 1], [1, 0]])
        for col in range(dim):
            fire = all(((col >> q) & 1) == v for q, v in g.controls)
            if not fire:
                G[col, col] = 1.0
                continue
            b = (col >> g.target) & 1
            for nb in (0, 1):
                row = (col & ~(1 << g.target)) | (nb << g.target)
                G[row, col] += single[nb, b]
        U = G @ U
    return U


def test_full_flip():
    psi = apply(Circuit(1, (Gate.ry(0, math.pi),), (0,))).amplitudes
    assert np.allclose(psi, [0, 1], atol=1e-12)


def test_half_rotation():
    st = apply(Circuit(1, (Gate.ry(0, 2 * math.asin(math.sqrt(0.5))),), (0,)))
    assert readout_probability(st, 0) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("weights, values, expected", [
    ((0.25, 0.5, 0.25), (0.2, 0.4, 0.6), 0.4),
    ((0.3, 0.5, 0.2), (1.0, 0.0, 1.0), 0.5),
])
def test_branching_readout(weights, values, expected):
    st = apply(build_branching_circuit(values, weights))
    assert readout_probability(st, 2) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("explicit_x", [False, True])
def test_statevector_matches_dense_product(explicit_x):
    c = build_branching_circuit((0.2, 0.4, 0.6), (0.25, 0.5, 0.25), explicit_x=explicit_x)
    e0 = np.zeros(8)
    e0[0] = 1
    dense = dense_unitary(c) @ e0
    ours = apply(c).amplitudes.reshape(-1)
    # our flat index is MSB = highest qubit, same convention as the dense builder
    assert np.allclose(ours, dense, atol=1e-12)


def test_readout_of_basis_state():
    st = apply(Circuit(1, (), (0,)))
    assert readout_probability(st, 0) == 0.0
    st = apply(Circuit(1, (Gate.ry(0, math.pi / 2),), (0,)))
    assert readout_probability(st, 0) == pytest.approx(0.5, abs=1e-12)


def test_qubit_zero_is_least_significant_in_bitstrings():
    c = Circuit(2, (Gate.x(0),), (0, 1))
    hist = sample(c, 10, ShotSampler(0))
    # MSB-first printing: qubit 1 then qubit 0
    assert hist == {"01": 10}


def test_negative_control_fires_on_zero():
    c = Circuit(2, (Gate.cry(1, math.pi, [(0, 0)]),), (1,))
    assert readout_probability(apply(c), 1) == pytest.approx(1.0, abs=1e-12)
    c = Circuit(2, (Gate.x(0), Gate.cry(1, math.pi, [(0, 0)])), (1,))
    assert readout_probability(apply(c), 1) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("angle, key", [(0.0, "0"), (math.pi, "1")])
def test_deterministic_histograms(angle, key):
    hist = sample(Circuit(1, (Gate.ry(0, angle),), (0,)), 100, ShotSampler(3))
    assert hist == {key: 100}


def test_sampled_fraction_within_binomial_bound():
    u, shots = 0.3, 10**6
    hist = sample(bernoulli_circuit(u), shots, ShotSampler(11))
    frac = hist.get("1", 0) / shots
    assert abs(frac - u) <= 5 * math.sqrt(u * (1 - u) / shots)


def test_zero_shots_rejected():
    with pytest.raises(ValidationError):
        sample(bernoulli_circuit(0.5), 0, ShotSampler(0))


def test_same_stream_same_bits():
    c = build_branching_circuit((0.1, 0.5, 0.9), (0.2, 0.5, 0.3))
    a = sample_bits(c, 500, ShotSampler(5, (1, 2)))
    b = sample_bits(c, 500, ShotSampler(5).child(1, 2))
    assert np.array_equal(a, b)
    other = sample_bits(c, 500, ShotSampler(5).child(1, 3))
    assert not np.array_equal(a, other)


def test_width_cap():
    c = Circuit(5, (), (0,))
    with pytest.raises(ResourceError, match="4"):
        apply(c, max_width=4)


@pytest.mark.parametrize("build", [
    lambda: Gate.cry(0, 1.0, [(0, 1)]),
    lambda: Gate.cry(1, 1.0, [(0, 2)]),
    lambda: Gate.ry(0, float("nan")),
    lambda: Circuit(0, (), ()),
    lambda: Circuit(2, (Gate.ry(2, 0.1),), (0,)),
    lambda: Circuit(2, (), (0, 0)),
    lambda: Circuit(2, (), (3,)),
])
def test_invalid_construction(build):
    with pytest.raises(ValidationError):
        build()


def test_marginal_ordering():
    c = Circuit(3, (Gate.x(2),), (0, 2))
    m = marginal(apply(c), [0, 2])
    # entry k has bit j equal to the value of qubits[j]: qubit 2 set -> k = 0b10
    assert m[2] == pytest.approx(1.0)


def test_histogram_ones():
    assert histogram_ones({"10": 3, "01": 4, "11": 2}, position=0) == 6
    assert histogram_ones({"10": 3, "01": 4, "11": 2}, position=1) == 5


def test_depths():
    assert gate_depth(bernoulli_circuit(0.3)) == 1
    assert gate_depth(build_branching_circuit((0.2, 0.4, 0.6), (0.25, 0.5, 0.25))) == 5
    # layering of the assembled circuit with explicit X sandwiches; one less
    # than the published untranspiled depth, which also counts the measurement
    assert gate_depth(build_branching_circuit((0.2, 0.4, 0.6), (0.25, 0.5, 0.25), explicit_x=True)) == 11


def test_json_round_trip_fields():
    import json
    c = build_branching_circuit((0.2, 0.4, 0.6), (0.25, 0.5, 0.25))
    d = json.loads(c.to_json())
    assert d["width"] == 3 and d["measured"] == [2]
    assert len(d["gates"]) == 5
