"""Synthetic readout-assignment noise and confusion-matrix mitigation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MitigationError, ValidationError
from .statevector import Circuit, Gate, ShotSampler, sample_bits

_COL_TOL = 1e-12


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 column-stochastic matrix, entry (i, j) = Pr(measure i | prepared j)."""
    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float).reshape(2, 2)
        if np.any(m < 0) or np.any(m > 1):
            raise ValidationError("confusion-matrix entries must lie in [0, 1]")
        if np.any(np.abs(m.sum(axis=0) - 1.0) > _COL_TOL):
            raise ValidationError("confusion-matrix columns must sum to 1")
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    @classmethod
    def from_record(cls, rec: Sequence[float]) -> "ConfusionMatrix":
        """Build from the row-major 4-number record ``[m00, m01, m10, m11]``."""
        if len(rec) != 4:
            raise ValidationError("confusion-matrix record needs 4 numbers")
        return cls(np.asarray(rec, dtype=float).reshape(2, 2))

    def to_record(self) -> list[float]:
        return [float(v) for v in self.m.reshape(-1)]

    @classmethod
    def identity(cls) -> "ConfusionMatrix":
        return cls(np.eye(2))

    @property
    def flip0(self) -> float:
        """Pr(read 1 | prepared 0)."""
        return float(self.m[1, 0])

    @property
    def keep1(self) -> float:
        """Pr(read 1 | prepared 1)."""
        return float(self.m[1, 1])

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.m))

    def observed(self, p1: float) -> float:
        """Expected Pr(read 1) when the ideal Pr(1) is p1."""
        return self.flip0 * (1.0 - p1) + self.keep1 * p1


def corrupt_ones(ones: int, shots: int, cm: ConfusionMatrix, rng: np.random.Generator) -> int:
    """Single-qubit fast path: corrupt a count of ideal 1-outcomes."""
    kept = rng.binomial(ones, cm.keep1) if ones else 0
    flipped = rng.binomial(shots - ones, cm.flip0) if shots - ones else 0
    return int(kept + flipped)


def corrupt_bits(bits: np.ndarray, cms, rng: np.random.Generator) -> np.ndarray:
    """Flip each bit independently through its column's confusion matrix.

    `cms` is one ConfusionMatrix shared by all columns or a list with one per
    column.
    """
    bits = np.asarray(bits, dtype=np.int8)
    if bits.ndim == 1:
        bits = bits[:, None]
    ncol = bits.shape[1]
    if isinstance(cms, ConfusionMatrix):
        cms = [cms] * ncol
    if len(cms) != ncol:
        raise ValidationError("need one confusion matrix per measured qubit")
    out = bits.copy()
    u = rng.random(bits.shape)
    for j, cm in enumerate(cms):
        p_one = np.where(bits[:, j] == 1, cm.keep1, cm.flip0)
        out[:, j] = (u[:, j] < p_one).astype(np.int8)
    return out


def corrupt(hist: dict[str, int], cms, sampler: ShotSampler) -> dict[str, int]:
    """Apply readout assignment noise to a bitstring histogram."""
    if not hist:
        return {}
    nbits = len(next(iter(hist)))
    keys = sorted(hist)
    rows = []
    for key in keys:
        row = [int(key[nbits - 1 - j]) for j in range(nbits)]
        rows.append(np.tile(row, (hist[key], 1)))
    bits = np.concatenate(rows).astype(np.int8) if nbits else np.zeros((sum(hist.values()), 0), np.int8)
    noisy = corrupt_bits(bits, cms, sampler.generator())
    out: dict[str, int] = {}
    for r in noisy:
        key = "".join(str(int(b)) for b in r[::-1])
        out[key] = out.get(key, 0) + 1
    return out


def calibrate(sampler: ShotSampler, shots_per_state: int, cm_true: ConfusionMatrix) -> ConfusionMatrix:
    """Estimate a confusion matrix by preparing |0> and |1> and reading them out.

    A few thousand shots per state is typical. Fewer than ~1000 still
    returns a valid but noisy matrix, and a single shot gives degenerate 0/1
    columns.
    """
    if shots_per_state < 1:
        raise ValidationError("shots_per_state must be >= 1")
    est = np.zeros((2, 2))
    for prepared in (0, 1):
        gates = (Gate.x(0),) if prepared else ()
        c = Circuit(1, gates, (0,))
        s = sampler.child(prepared)
        ideal = sample_bits(c, shots_per_state, s)
        noisy = corrupt_bits(ideal, cm_true, s.child(1).generator())
        frac1 = float(noisy[:, 0].mean())
        est[:, prepared] = (1.0 - frac1, frac1)
    return ConfusionMatrix(est)


def mitigate(p_obs: float, cm: ConfusionMatrix, return_clipped: bool = False):
    """Debias an observed Pr(read 1) with the inverse confusion matrix.

    Solves ``cm @ p = (1 - p_obs, p_obs)``, clips to [0, 1], renormalizes and
    returns the 1-component.
    """
    if abs(cm.det) < 1e-12:
        raise MitigationError("confusion matrix is singular; cannot mitigate")
    raw = np.linalg.solve(cm.m, np.array([1.0 - p_obs, p_obs]))
    clipped = bool(np.any(raw < 0.0) or np.any(raw > 1.0))
    p = np.clip(raw, 0.0, 1.0)
    s = p.sum()
    p1 = float(p[1] / s) if s > 0 else float(p_obs)
    if return_clipped:
        return p1, clipped
    return p1


@dataclass(frozen=True)
class ReadoutModel:
    """Readout channel attached to a kernel run: noise and optional mitigation.

    `cm` is the injected channel; `mitigation_cm` is the matrix used for
    debiasing (defaults to `cm`, i.e. a perfectly calibrated device).
    """
    cm: ConfusionMatrix
    mitigate: bool = False
    mitigation_cm: ConfusionMatrix | None = None

    @property
    def correction(self) -> ConfusionMatrix:
        return self.mitigation_cm if self.mitigation_cm is not None else self.cm

    def apply(self, ones: int, shots: int, rng: np.random.Generator):
        """Corrupt an ideal count.

        Returns ``(p_hat, p_obs, se_scale, clipped)``: the (possibly
        mitigated) estimate, the raw observed frequency, the factor that maps
        the binomial SE of p_obs onto p_hat, and whether clipping fired.
        """
        noisy = corrupt_ones(ones, shots, self.cm, rng)
        p_obs = noisy / shots
        if not self.mitigate:
            return p_obs, p_obs, 1.0, False
        cm = self.correction
        p, clipped = mitigate(p_obs, cm, return_clipped=True)
        # inverse map is affine with slope 1/(keep1 - flip0)
        return p, p_obs, 1.0 / abs(cm.keep1 - cm.flip0), clipped
