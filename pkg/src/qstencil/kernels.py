"""
Micro-kernels: shallow circuits whose sampled readout estimates one stencil
node update.

Every kernel consumes normalized branch values in [0, 1] plus branch weights,
runs its circuit(s) for a shot budget and returns a `KernelResult`. Kernels
are pure given their `ShotSampler`; a kernel draws all of its randomness from
a single generator derived from that sampler, in a fixed order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateError, DomainError, RangeError, ResourceError, ValidationError
from .noise import ReadoutModel
from .statevector import (
    DEFAULT_MAX_WIDTH, Circuit, Gate, ShotSampler, StateVector, apply, marginal,
    readout_probability, sample_bits,
)

CLAMP_TOL = 1e-9
WEIGHT_TOL = 1e-12

# qubit layout of the three-branch kernel
S0, S1, RO = 0, 1, 2


# ---------------------------------------------------------------------------
# value handling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormWindow:
    u_min: float
    u_max: float

    def __post_init__(self):
        if not self.u_max > self.u_min:
            raise ValidationError(f"window needs u_max > u_min, got [{self.u_min}, {self.u_max}]")

    @property
    def width(self) -> float:
        return self.u_max - self.u_min


def normalize(u, window: NormWindow, slack: float = 0.0, return_clamped: bool = False):
    """Affine map of field values onto [0, 1].

    Values outside the window by at most `slack` are clamped; anything
    farther raises `RangeError` naming the offending node indices.
    """
    arr = np.asarray(u, dtype=float)
    v = (arr - window.u_min) / window.width
    lo = arr < window.u_min
    hi = arr > window.u_max
    far = (arr < window.u_min - slack) | (arr > window.u_max + slack)
    if np.any(far):
        nodes = np.flatnonzero(np.atleast_1d(far)).tolist()
        raise RangeError(
            f"values outside window [{window.u_min}, {window.u_max}] at node(s) {nodes}",
            nodes,
        )
    clamped = int(np.count_nonzero(lo | hi))
    if clamped:
        v = np.clip(v, 0.0, 1.0)
    v = v if v.ndim else float(v)
    return (v, clamped) if return_clamped else v


def denormalize(v, window: NormWindow):
    out = window.u_min + window.width * np.asarray(v, dtype=float)
    return out if out.ndim else float(out)


def bernoulli_angle(u: float) -> float:
    """RY angle whose |1> probability on |0> equals u."""
    if u < -CLAMP_TOL or u > 1 + CLAMP_TOL:
        raise DomainError(f"value {u} outside [0, 1]")
    u = min(max(float(u), 0.0), 1.0)
    return 2.0 * math.asin(math.sqrt(u))


def check_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValidationError("weights must be a non-empty 1-D sequence")
    if np.any(w < 0):
        raise ValidationError(f"weights must be nonnegative, got {w.tolist()}")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise ValidationError(f"weights must sum to 1, got {w.sum()!r}")
    return w


def check_values(values, n: int | None = None) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if n is not None and v.shape != (n,):
        raise ValidationError(f"expected {n} branch values, got shape {v.shape}")
    if np.any(v < -CLAMP_TOL) or np.any(v > 1 + CLAMP_TOL):
        raise DomainError(f"branch values must lie in [0, 1], got {v.tolist()}")
    return np.clip(v, 0.0, 1.0)


# ---------------------------------------------------------------------------
# results and shot plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShotPlan:
    counts: tuple[int, ...]
    total: int

    def fractions(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.total


@dataclass
class KernelResult:
    estimate: float
    std_error: float
    shots_used: int
    raw_counts: tuple = ()
    clipped: int = 0
    extra: dict = field(default_factory=dict)


def allocate_shots(weights, M: int) -> ShotPlan:
    """Split M shots across branches proportionally to the weights.

    All but the last branch get round-half-even(w_b * M); the last branch
    takes the remainder. A negative remainder is repaired by decrementing the
    largest rounded branch.
    """
    if M < 1:
        raise ValidationError("M must be >= 1")
    w = check_weights(weights)
    head = [int(round(x * M)) for x in w[:-1]]
    rest = M - sum(head)
    while rest < 0:
        j = int(np.argmax(head))
        head[j] -= 1
        rest += 1
    return ShotPlan(tuple(head) + (rest,), int(M))


# ---------------------------------------------------------------------------
# Bernoulli micro-kernel
# ---------------------------------------------------------------------------

def bernoulli_circuit(u: float) -> Circuit:
    """One-qubit encoder measured with Pr(1) = u."""
    return Circuit(1, (Gate.ry(0, bernoulli_angle(u)),), (0,))


def bernoulli_kernel(values, weights, M: int, sampler: ShotSampler,
                     readout: ReadoutModel | None = None) -> KernelResult:
    """Shot-weighted mixture of independent one-qubit encoders."""
    w = check_weights(weights)
    v = check_values(values, len(w))
    if M < len(w):
        raise ValidationError(f"M={M} smaller than the number of branches {len(w)}")
    plan = allocate_shots(w, M)
    rng = sampler.generator()
    estimate = 0.0
    var = 0.0
    raw = []
    clipped = 0
    for u_b, m_b in zip(v, plan.counts):
        if m_b == 0:
            raw.append(0)
            continue
        p1 = readout_probability(apply(bernoulli_circuit(u_b)), 0)
        ones = int(rng.binomial(m_b, p1))
        raw.append(ones)
        if readout is None:
            u_hat, p_obs, scale = ones / m_b, ones / m_b, 1.0
        else:
            u_hat, p_obs, scale, c = readout.apply(ones, m_b, rng)
            clipped += c
        frac = m_b / M
        estimate += frac * u_hat
        var += frac * frac * scale * scale * p_obs * (1.0 - p_obs) / max(m_b, 1)
    return KernelResult(estimate, math.sqrt(var), M, tuple(raw), clipped,
                        {"plan": plan.counts})


def bernoulli_exact(values, weights) -> float:
    """Infinite-shot limit of the Bernoulli kernel, read off the circuits."""
    w = check_weights(weights)
    v = check_values(values, len(w))
    return float(sum(wb * readout_probability(apply(bernoulli_circuit(ub)), 0)
                     for wb, ub in zip(w, v)))


# ---------------------------------------------------------------------------
# branching micro-kernel
# ---------------------------------------------------------------------------

def selector_angles(weights) -> tuple[float, float]:
    """Rotation-tree angles for three leaves.

    Leaf map: s0=1 -> right, (s0, s1)=(0, 0) -> left, (0, 1) -> centre.
    """
    w = check_weights(weights)
    if w.size != 3:
        raise ValidationError("selector_angles supports exactly three branches")
    wl, wc, wr = w
    theta0 = bernoulli_angle(wr)
    left = wl + wc
    # s0=0 has zero amplitude when left == 0, so theta_L is unobservable
    theta_l = bernoulli_angle(wc / left) if left > 0 else 0.0
    return theta0, theta_l


def build_branching_circuit(values, weights, explicit_x: bool = False) -> Circuit:
    """Three-branch selector + leaf-addressed loading onto one readout qubit.

    Qubits: s0=0, s1=1, ro=2; only ro is measured. With ``explicit_x`` the
    negative controls are emitted as X-control-X sandwiches, the form a
    device without negative controls would run.
    """
    w = check_weights(weights)
    if w.size != 3:
        raise ValidationError(f"branching kernel supports 3 branches, got {w.size}")
    v = check_values(values, 3)
    theta0, theta_l = selector_angles(w)
    phi_l, phi_c, phi_r = (bernoulli_angle(x) for x in v)
    if not explicit_x:
        gates = (
            Gate.ry(S0, theta0),
            Gate.cry(S1, theta_l, [(S0, 0)]),
            Gate.cry(RO, phi_l, [(S0, 0), (S1, 0)]),
            Gate.cry(RO, phi_c, [(S0, 0), (S1, 1)]),
            Gate.cry(RO, phi_r, [(S0, 1)]),
        )
    else:
        gates = (
            Gate.ry(S0, theta0),
            Gate.x(S0), Gate.cry(S1, theta_l, [(S0, 1)]), Gate.x(S0),
            Gate.x(S0), Gate.x(S1), Gate.cry(RO, phi_l, [(S0, 1), (S1, 1)]), Gate.x(S0), Gate.x(S1),
            Gate.x(S0), Gate.cry(RO, phi_c, [(S0, 1), (S1, 1)]), Gate.x(S0),
            Gate.cry(RO, phi_r, [(S0, 1)]),
        )
    return Circuit(3, gates, (RO,))


def conditional_injector(p_parent: float, p1: float, p0: float) -> Circuit:
    """Parent P (qubit 0) with Pr(P=1)=p_parent; readout A (qubit 1) gets
    Pr(A=1) = p_parent*p1 + (1-p_parent)*p0."""
    return Circuit(2, (
        Gate.ry(0, bernoulli_angle(p_parent)),
        Gate.cry(1, bernoulli_angle(p1), [(0, 1)]),
        Gate.cry(1, bernoulli_angle(p0), [(0, 0)]),
    ), (1,))


def branching_exact(values, weights) -> float:
    """Exact Pr(ro=1) of the branching circuit."""
    return readout_probability(apply(build_branching_circuit(values, weights)), RO)


def branching_kernel(values, weights, M: int, sampler: ShotSampler,
                     readout: ReadoutModel | None = None) -> KernelResult:
    """Fraction of ro=1 outcomes over M shots of the branching circuit."""
    if M < 1:
        raise ValidationError("M must be >= 1")
    p1 = branching_exact(values, weights)
    rng = sampler.generator()
    ones = int(rng.binomial(M, min(max(p1, 0.0), 1.0)))
    clipped = 0
    if readout is None:
        p_hat, p_obs, scale = ones / M, ones / M, 1.0
    else:
        p_hat, p_obs, scale, clipped = readout.apply(ones, M, rng)
        clipped = int(clipped)
    se = scale * math.sqrt(p_obs * (1.0 - p_obs) / M)
    return KernelResult(p_hat, se, M, (M - ones, ones), clipped)


KERNELS = {"bernoulli": bernoulli_kernel, "branching": branching_kernel}
EXACT = {"bernoulli": bernoulli_exact, "branching": branching_exact}


# ---------------------------------------------------------------------------
# signed-mixture and row kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignedTerm:
    coefficient: float
    value: float

    def __post_init__(self):
        if not math.isfinite(self.coefficient):
            raise ValidationError("coefficient must be finite")
        if self.value < -CLAMP_TOL or self.value > 1 + CLAMP_TOL:
            raise DomainError(f"term value {self.value} outside [0, 1]")


def _as_terms(terms) -> list[SignedTerm]:
    return [t if isinstance(t, SignedTerm) else SignedTerm(*t) for t in terms]


def signed_mixture_kernel(terms, M: int, sampler: ShotSampler,
                          mode: str = "branch_signed") -> KernelResult:
    """Estimate sum_j c_j u_j for signed coefficients.

    ``bernoulli_split``: positive and negative terms form two convex sums,
    each estimated by the Bernoulli kernel on shots split by mass, then
    subtracted. ``branch_signed``: each shot draws j with probability
    |c_j| / sum|c|, reads a Bernoulli(u_j) bit and applies sign(c_j) in
    software.
    """
    terms = _as_terms(terms)
    coef = np.array([t.coefficient for t in terms], dtype=float)
    vals = np.clip([t.value for t in terms], 0.0, 1.0)
    mass = float(np.abs(coef).sum())
    if not terms or mass == 0.0:
        raise DegenerateError("all coefficients are zero")
    if mode == "bernoulli_split":
        return _split_kernel(coef, vals, M, sampler)
    if mode != "branch_signed":
        raise ValidationError(f"unknown signed-mixture mode {mode!r}")
    if M < 1:
        raise ValidationError("M must be >= 1")
    rng = sampler.generator()
    picks = rng.multinomial(M, np.abs(coef) / mass)
    signed_sum = 0.0
    ones_total = 0
    raw = []
    for j, m_j in enumerate(picks):
        if m_j == 0:
            raw.append(0)
            continue
        p1 = readout_probability(apply(bernoulli_circuit(vals[j])), 0)
        ones = int(rng.binomial(m_j, p1))
        raw.append(ones)
        signed_sum += math.copysign(ones, coef[j])
        ones_total += ones
    mean = signed_sum / M
    # per-shot readouts are in {-1, 0, 1}, so E[r^2] = fraction of 1-bits
    var = max(ones_total / M - mean * mean, 0.0)
    return KernelResult(mass * mean, mass * math.sqrt(var / M), M, tuple(raw),
                        extra={"picks": tuple(int(p) for p in picks)})


def _split_kernel(coef, vals, M, sampler) -> KernelResult:
    if M < 2:
        raise ValidationError("bernoulli_split needs M >= 2")
    pos, neg = coef > 0, coef < 0
    p_plus, p_minus = float(coef[pos].sum()), float(-coef[neg].sum())
    groups = [(g, mass) for g, mass in ((pos, p_plus), (neg, p_minus)) if mass > 0]
    if len(groups) == 1:
        shots = [M]
    else:
        m_plus = min(max(int(round(M * p_plus / (p_plus + p_minus))), 1), M - 1)
        shots = [m_plus, M - m_plus]
    estimate, var, raw = 0.0, 0.0, []
    for k, ((g, group_mass), m_g) in enumerate(zip(groups, shots)):
        sign = 1.0 if coef[g][0] > 0 else -1.0
        w = np.abs(coef[g]) / group_mass
        w = w / w.sum()
        n_br = int(np.count_nonzero(g))
        if m_g < n_br:
            raise ValidationError(f"too few shots ({m_g}) for {n_br} terms of one sign")
        res = bernoulli_kernel(vals[g], w, m_g, sampler.child(k))
        estimate += sign * group_mass * res.estimate
        var += (group_mass * res.std_error) ** 2
        raw.append(res.raw_counts)
    return KernelResult(estimate, math.sqrt(var), M, tuple(raw),
                        extra={"P+": p_plus, "P-": p_minus})


def row_kernel(row, M: int, sampler: ShotSampler) -> KernelResult:
    """Off-diagonal row product sum_{j != i} a_ij u_j for Jacobi-type sweeps."""
    return signed_mixture_kernel(row, M, sampler, mode="branch_signed")


# ---------------------------------------------------------------------------
# noise micro-kernel
# ---------------------------------------------------------------------------

def coin_circuit(k_coin: int) -> Circuit:
    return Circuit(k_coin, tuple(Gate.ry(q, math.pi / 2) for q in range(k_coin)),
                   tuple(range(k_coin)))


def coin_sum_noise(k_coin: int, sigma: float, draws: int, sampler: ShotSampler) -> np.ndarray:
    """Zero-mean increments with variance sigma**2 from sums of fair coins."""
    if k_coin < 1:
        raise ValidationError("k_coin must be >= 1")
    if sigma < 0:
        raise ValidationError("sigma must be >= 0")
    bits = sample_bits(coin_circuit(k_coin), draws, sampler)
    spins = 2 * bits.astype(float) - 1.0
    return sigma / math.sqrt(k_coin) * spins.sum(axis=1)


# ---------------------------------------------------------------------------
# in-circuit fusion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FusedCircuit:
    circuit: Circuit
    offsets: tuple[int, ...]
    readouts: tuple[tuple[int, ...], ...]

    @property
    def k_fused(self) -> int:
        return len(self.offsets)


def fuse(circuits: Sequence[Circuit], max_width: int = DEFAULT_MAX_WIDTH) -> FusedCircuit:
    """Place circuits side by side on disjoint qubit blocks.

    Block b occupies qubits ``offsets[b] .. offsets[b] + width_b - 1``; its
    measured qubits (relabelled) are ``readouts[b]``.
    """
    circuits = list(circuits)
    if not circuits:
        raise ValidationError("nothing to fuse")
    total = sum(c.width for c in circuits)
    if total > max_width:
        raise ResourceError(f"fused width {total} exceeds the qubit cap of {max_width}")
    gates, measured, offsets, readouts = [], [], [], []
    off = 0
    for c in circuits:
        for g in c.gates:
            gates.append(Gate(g.kind, g.target + off, g.angle,
                              tuple((q + off, v) for q, v in g.controls)))
        ro = tuple(q + off for q in c.measured)
        measured.extend(ro)
        readouts.append(ro)
        offsets.append(off)
        off += c.width
    return FusedCircuit(Circuit(total, tuple(gates), tuple(measured)),
                        tuple(offsets), tuple(readouts))


def fused_marginals(state: StateVector, fused: FusedCircuit) -> list[float]:
    """Pr(readout=1) of each block's first measured qubit."""
    return [readout_probability(state, ro[0]) for ro in fused.readouts]


def fused_estimates(fused: FusedCircuit, M: int, sampler: ShotSampler,
                    max_width: int = DEFAULT_MAX_WIDTH) -> list[KernelResult]:
    """One M-shot run of a fused circuit, split into per-block estimates.

    Every shot yields one outcome per block, so each block gets M samples.
    """
    if M < 1:
        raise ValidationError("M must be >= 1")
    state = apply(fused.circuit, max_width)
    first = [ro[0] for ro in fused.readouts]
    probs = marginal(state, first)
    probs = np.clip(probs, 0.0, None)
    counts = sampler.generator().multinomial(M, probs / probs.sum())
    outcome = np.arange(len(probs))
    out = []
    for b in range(len(first)):
        ones = int(counts[(outcome >> b) & 1 == 1].sum())
        p = ones / M
        out.append(KernelResult(p, math.sqrt(p * (1 - p) / M), M, (M - ones, ones)))
    return out
