"""
Job orchestration model: batching vs in-circuit fusion, a per-node cost
model, simulated job execution with injectable clocks, and telemetry.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ResourceError, ValidationError
from .statevector import DEFAULT_MAX_WIDTH, Circuit, ShotSampler, sample

TELEMETRY_COLUMNS = ["job_id", "kernel_kind", "Transpile [s]", "Queue [s]",
                     "Execution [s]", "Wall [s]"]

_DELAY_STREAM = 2**32 - 1


@dataclass(frozen=True)
class CostParams:
    T_launch: float
    T_node: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.T_launch < 0 or self.T_node < 0:
            raise ValidationError("T_launch and T_node must be >= 0")
        if self.gamma < 1:
            raise ValidationError("gamma must be >= 1")


def per_node_time_icf(p: CostParams, k_fused: int) -> float:
    if k_fused < 1:
        raise ValidationError("k_fused must be >= 1")
    return p.T_launch / k_fused + p.gamma * p.T_node


def per_node_time_batch(p: CostParams, batch: int) -> float:
    if batch < 1:
        raise ValidationError("batch size must be >= 1")
    return p.T_launch / batch + p.T_node


@dataclass(frozen=True)
class Strategy:
    kind: str            # "batch" | "icf" | "hybrid"
    k_fused: int
    batch: int
    per_node_s: float


def choose_strategy(p: CostParams, width_cap: int, kernel_width: int,
                    max_batch: int = 64) -> Strategy:
    """Pick the execution layout with the lowest modelled per-node time.

    ICF is limited to ``width_cap // kernel_width`` blocks. Ties go to the
    shallower layout (batch, then icf, then hybrid) and then to the smaller k.
    """
    if kernel_width < 1 or width_cap < 1 or max_batch < 1:
        raise ValidationError("widths and max_batch must be >= 1")
    k_max = width_cap // kernel_width
    cands = []
    for b in range(1, max_batch + 1):
        cands.append((per_node_time_batch(p, b), 0, b, Strategy("batch", 1, b, per_node_time_batch(p, b))))
    for k in range(2, k_max + 1):
        t = per_node_time_icf(p, k)
        cands.append((t, 1, k, Strategy("icf", k, 1, t)))
        for b in range(2, max_batch + 1):
            t = p.T_launch / (k * b) + p.gamma * p.T_node
            cands.append((t, 2, k * b, Strategy("hybrid", k, b, t)))
    best = min(cands, key=lambda c: (round(c[0], 15), c[1], c[2]))
    return best[3]


# ---------------------------------------------------------------------------
# clocks and delay models
# ---------------------------------------------------------------------------

class SimulatedClock:
    """Virtual time that only moves when advanced."""

    def __init__(self, start: float = 0.0):
        self._t = float(start)

    def now(self) -> float:
        return self._t

    def advance(self, seconds: float):
        self._t += seconds


class WallClock:
    """Real elapsed time plus injected synthetic delays (no sleeping)."""

    def __init__(self):
        self._offset = 0.0

    def now(self) -> float:
        return time.perf_counter() + self._offset

    def advance(self, seconds: float):
        self._offset += seconds


@dataclass(frozen=True)
class DelayModel:
    """Synthetic per-job delays.

    Queue and execution draws are lognormal around their means with shape
    `*_sigma` (0 disables jitter). Execution per circuit is affine in shots.
    """
    queue_mean: float = 0.0
    queue_sigma: float = 0.0
    exec_intercept: float = 0.0
    exec_per_shot: float = 0.0
    exec_sigma: float = 0.0
    residual: float = 0.0

    def execution_mean(self, shots: int) -> float:
        return self.exec_intercept + self.exec_per_shot * shots

    def without_jitter(self) -> "DelayModel":
        return replace(self, queue_sigma=0.0, exec_sigma=0.0)

    @staticmethod
    def _draw(mean: float, sigma: float, rng: np.random.Generator) -> float:
        if mean == 0 or sigma == 0:
            return mean
        return float(mean * math.exp(sigma * rng.standard_normal() - 0.5 * sigma * sigma))

    def queue(self, rng) -> float:
        return self._draw(self.queue_mean, self.queue_sigma, rng)

    def execution(self, shots: int, rng) -> float:
        return self._draw(self.execution_mean(shots), self.exec_sigma, rng)


def affine_from_anchors(shots_a: int, t_a: float, shots_b: int, t_b: float) -> tuple[float, float]:
    """(intercept, slope) of the line through two (shots, seconds) points."""
    slope = (t_b - t_a) / (shots_b - shots_a)
    return t_a - slope * shots_a, slope


@dataclass(frozen=True)
class JobTelemetry:
    job_id: int
    kernel_kind: str
    transpile_s: float
    queue_s: float
    execution_s: float
    wall_s: float
    shots: int
    nodes_covered: int

    def row(self) -> dict:
        return {
            "job_id": self.job_id,
            "kernel_kind": self.kernel_kind,
            "Transpile [s]": self.transpile_s,
            "Queue [s]": self.queue_s,
            "Execution [s]": self.execution_s,
            "Wall [s]": self.wall_s,
        }


def run_job(circuits: Sequence[Circuit], shots: int, sampler: ShotSampler,
            clock=None, delays: DelayModel | None = None, kernel_kind: str = "",
            job_id: int = 0, nodes_per_circuit: int = 1, gamma: float = 1.0,
            max_width: int = DEFAULT_MAX_WIDTH):
    """Execute circuits as one job and time its phases.

    Phases: transpile (measured circuit validation), queue (synthetic),
    execution (simulation plus synthetic device time), residual (synthetic).
    Circuit c samples from ``sampler.child(c)``. Returns
    ``(histograms, JobTelemetry)``.
    """
    clock = clock if clock is not None else SimulatedClock()
    delays = delays if delays is not None else DelayModel()
    rng = sampler.child(_DELAY_STREAM).generator()
    circuits = list(circuits)

    t0 = clock.now()
    for c in circuits:
        if c.width > max_width:
            raise ResourceError(f"circuit width {c.width} exceeds the qubit cap of {max_width}")
    t1 = clock.now()
    clock.advance(delays.queue(rng))
    t2 = clock.now()
    hists = [sample(c, shots, sampler.child(k), max_width) for k, c in enumerate(circuits)]
    device = sum(delays.execution(shots, rng) for _ in circuits)
    clock.advance(device * nodes_per_circuit * gamma)
    t3 = clock.now()
    clock.advance(delays.residual)
    t4 = clock.now()
    tel = JobTelemetry(job_id, kernel_kind, t1 - t0, t2 - t1, t3 - t2, t4 - t0,
                       int(shots), len(circuits) * nodes_per_circuit)
    return hists, tel


def fit_cost_model(records: Sequence[JobTelemetry]) -> CostParams:
    """Least-squares fit of wall/nodes = T_launch/nodes + T_node."""
    if len(records) < 2:
        raise ValidationError("need at least two telemetry records")
    k = np.array([r.nodes_covered for r in records], dtype=float)
    y = np.array([r.wall_s for r in records]) / k
    A = np.column_stack([1.0 / k, np.ones_like(k)])
    (t_launch, t_node), *_ = np.linalg.lstsq(A, y, rcond=None)
    return CostParams(max(float(t_launch), 0.0), max(float(t_node), 0.0))


def summarize(records: Sequence[JobTelemetry]) -> dict:
    """Mean and sample std of each phase, as in a per-config timing table."""
    out = {"jobs": len(records)}
    for name in ("transpile_s", "queue_s", "execution_s", "wall_s"):
        v = np.array([getattr(r, name) for r in records])
        out[name] = (float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0)
    return out


def write_telemetry(records: Sequence[JobTelemetry], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TELEMETRY_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow(r.row())
    return path

