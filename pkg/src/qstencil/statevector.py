"""
Exact statevector simulation for the shallow RY / X / controlled-RY circuits
used by the micro-kernels.

Conventions:
- qubit 0 is the least-significant bit of the basis-state index
- bitstrings are printed most-significant first, so for measured qubits
  ``[q0, q1]`` the key ``"10"`` means q1=1, q0=0
- a control ``(q, 1)`` fires on |1>, a control ``(q, 0)`` fires on |0>
  (negative control, equivalent to an X-control-X sandwich on q)
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ResourceError, ValidationError

DEFAULT_MAX_WIDTH = 24
NORM_TOL = 1e-12

RY, X, CRY = "RY", "X", "CRY"
_KINDS = (RY, X, CRY)


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    angle: float = 0.0
    controls: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        if self.kind != CRY and self.controls:
            raise ValidationError(f"{self.kind} gate takes no controls")
        if self.kind == CRY and not self.controls:
            raise ValidationError("CRY gate needs at least one control")
        ctrl = tuple((int(q), int(v)) for q, v in self.controls)
        object.__setattr__(self, "controls", ctrl)
        qubits = [q for q, _ in ctrl]
        if any(v not in (0, 1) for _, v in ctrl):
            raise ValidationError("control polarity must be 0 (negative) or 1 (positive)")
        if self.target in qubits:
            raise ValidationError(f"target {self.target} is also a control")
        if len(set(qubits)) != len(qubits):
            raise ValidationError("duplicate control qubit")
        if not math.isfinite(self.angle):
            raise ValidationError("gate angle must be finite")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,) + tuple(q for q, _ in self.controls)

    @classmethod
    def ry(cls, target: int, angle: float) -> "Gate":
        return cls(RY, target, float(angle))

    @classmethod
    def x(cls, target: int) -> "Gate":
        return cls(X, target)

    @classmethod
    def cry(cls, target: int, angle: float, controls) -> "Gate":
        return cls(CRY, target, float(angle), tuple(controls))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "target": self.target}
        if self.kind != X:
            d["angle"] = self.angle
        if self.controls:
            d["controls"] = [
                {"qubit": q, "polarity": "positive" if v else "negative"}
                for q, v in self.controls
            ]
        return d


@dataclass(frozen=True)
class Circuit:
    width: int
    gates: tuple[Gate, ...] = ()
    measured: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "measured", tuple(int(q) for q in self.measured))
        if self.width < 1:
            raise ValidationError("circuit width must be >= 1")
        for g in self.gates:
            bad = [q for q in g.qubits if not 0 <= q < self.width]
            if bad:
                raise ValidationError(f"gate {g.kind} uses qubit(s) {bad} outside width {self.width}")
        if any(not 0 <= q < self.width for q in self.measured):
            raise ValidationError("measured qubit outside circuit width")
        if len(set(self.measured)) != len(self.measured):
            raise ValidationError("measured qubits must be distinct")

    def to_json(self) -> str:
        """Debug dump of the gate list."""
        return json.dumps({
            "width": self.width,
            "gates": [g.to_dict() for g in self.gates],
            "measured": list(self.measured),
        }, indent=2)


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    width: int

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_sq(self) -> float:
        return float(np.sum(self.probabilities))


@dataclass(frozen=True)
class ShotSampler:
    """Seeded, splittable random stream.

    Streams are keyed by ``(seed, stream)``; ``child`` extends the key so
    each node/branch/step can own an independent, reproducible stream
    regardless of evaluation order.
    """
    seed: int
    stream: tuple[int, ...] = field(default=())

    def __post_init__(self):
        s = self.stream
        if isinstance(s, (int, np.integer)):
            s = (int(s),)
        object.__setattr__(self, "stream", tuple(int(k) for k in s))

    def child(self, *keys: int) -> "ShotSampler":
        return ShotSampler(self.seed, self.stream + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=self.stream)
        return np.random.default_rng(ss)


def _check_width(circuit: Circuit, max_width: int):
    if circuit.width > max_width:
        raise ResourceError(
            f"circuit width {circuit.width} exceeds the qubit cap of {max_width}"
        )


def _axis(width: int, qubit: int) -> int:
    # C-order reshape puts the most significant bit on axis 0
    return width - 1 - qubit


def _apply_gate(psi: np.ndarray, gate: Gate, width: int):
    """In-place gate application on a (2,)*width tensor."""
    idx0 = [slice(None)] * width
    for q, v in gate.controls:
        idx0[_axis(width, q)] = v
    idx1 = list(idx0)
    t = _axis(width, gate.target)
    idx0[t], idx1[t] = 0, 1
    idx0, idx1 = tuple(idx0), tuple(idx1)
    a0 = psi[idx0].copy()
    a1 = psi[idx1]
    if gate.kind == X:
        psi[idx0] = a1
        psi[idx1] = a0
        return
    c, s = math.cos(gate.angle / 2), math.sin(gate.angle / 2)
    psi[idx0] = c * a0 - s * a1
    psi[idx1] = s * a0 + c * a1


def apply(circuit: Circuit, max_width: int = DEFAULT_MAX_WIDTH) -> StateVector:
    """Return U|0...0> for the circuit."""
    _check_width(circuit, max_width)
    n = circuit.width
    # RY, X and controlled RY are real matrices, so real amplitudes suffice
    psi = np.zeros((2,) * n, dtype=np.float64)
    psi[(0,) * n] = 1.0
    for g in circuit.gates:
        _apply_gate(psi, g, n)
    amps = psi.reshape(-1)
    drift = abs(float(np.vdot(amps, amps).real) - 1.0)
    if drift > NORM_TOL:
        raise AssertionError(f"norm drift {drift:.3e} exceeds {NORM_TOL}")
    amps.flags.writeable = False
    return StateVector(amps, n)


def readout_probability(state: StateVector, qubit: int) -> float:
    """Probability that `qubit` is measured as 1."""
    if not 0 <= qubit < state.width:
        raise ValidationError(f"qubit {qubit} outside width {state.width}")
    p = state.probabilities.reshape((2,) * state.width)
    ax = _axis(state.width, qubit)
    return float(np.take(p, 1, axis=ax).sum())


def marginal(state: StateVector, qubits: Sequence[int]) -> np.ndarray:
    """Joint distribution over `qubits`.

    Entry k corresponds to the outcome whose bit j (LSB first) is the value
    of ``qubits[j]``.
    """
    qubits = list(qubits)
    if not qubits:
        return np.array([1.0])
    for q in qubits:
        if not 0 <= q < state.width:
            raise ValidationError(f"qubit {q} outside width {state.width}")
    n = state.width
    p = state.probabilities.reshape((2,) * n)
    keep = [_axis(n, q) for q in qubits]
    drop = tuple(a for a in range(n) if a not in keep)
    m = p.sum(axis=drop) if drop else p
    # remaining axes are in increasing axis order; reorder so that
    # qubits[-1] is the leading (most significant) axis
    remaining = sorted(keep)
    order = [remaining.index(_axis(n, q)) for q in reversed(qubits)]
    m = np.transpose(m, order)
    return m.reshape(-1)


def _bitstring(k: int, nbits: int) -> str:
    return format(k, f"0{nbits}b") if nbits else ""


def _measured_distribution(circuit: Circuit, max_width: int) -> np.ndarray:
    probs = marginal(apply(circuit, max_width), circuit.measured)
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample(circuit: Circuit, shots: int, sampler: ShotSampler,
           max_width: int = DEFAULT_MAX_WIDTH) -> dict[str, int]:
    """Histogram of measured bitstrings over `shots` i.i.d. shots."""
    if shots < 1:
        raise ValidationError("shots must be >= 1")
    probs = _measured_distribution(circuit, max_width)
    counts = sampler.generator().multinomial(int(shots), probs)
    nbits = len(circuit.measured)
    return {_bitstring(k, nbits): int(c) for k, c in enumerate(counts) if c}


def sample_bits(circuit: Circuit, shots: int, sampler: ShotSampler,
                max_width: int = DEFAULT_MAX_WIDTH) -> np.ndarray:
    """Per-shot outcomes as a (shots, len(measured)) 0/1 array.

    Column j holds the bit of ``circuit.measured[j]``.
    """
    if shots < 1:
        raise ValidationError("shots must be >= 1")
    probs = _measured_distribution(circuit, max_width)
    idx = sampler.generator().choice(len(probs), size=int(shots), p=probs)
    nbits = len(circuit.measured)
    return ((idx[:, None] >> np.arange(nbits)) & 1).astype(np.int8)


def histogram_ones(hist: dict[str, int], position: int = 0, nbits: int | None = None) -> int:
    """Number of shots where measured bit `position` (LSB-first) is 1."""
    total = 0
    for key, c in hist.items():
        n = nbits if nbits is not None else len(key)
        if key[n - 1 - position] == "1":
            total += c
    return total


def gate_depth(circuit: Circuit) -> int:
    """Greedy layer count; gates sharing any qubit cannot share a layer.

    Measurements are not counted and multi-controlled RY is one gate.
    """
    level = [0] * circuit.width
    depth = 0
    for g in circuit.gates:
        layer = max(level[q] for q in g.qubits) + 1
        for q in g.qubits:
            level[q] = layer
        depth = max(depth, layer)
    return depth
