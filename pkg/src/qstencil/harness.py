"""
Experiment drivers: convergence sweeps, error propagation over time,
single-step noisy runs, the cost-model demo and the Jacobi demo, plus
deterministic CSV/JSON emission.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ValidationError
from .jacobi import jacobi_sweep, poisson_matrix, quantum_jacobi_sweep
from .kernels import bernoulli_circuit, build_branching_circuit
from .noise import ReadoutModel
from .pde import HEAT, Problem, classical_step, heat_analytic, quantum_step
from .presets import (
    DELAY_PRESETS, NOISE_PRESETS, PROBLEM_PRESETS, build_problem, delay_model, noise_model,
    preset_hash, preset_settings,
)
from .runtime import CostParams, JobTelemetry, SimulatedClock, fit_cost_model, run_job, summarize
from .statevector import ShotSampler

log = logging.getLogger(__name__)

MODES = ("sampled", "exact", "classical", "variance-probe")
STEP_COLUMNS = ["preset", "kernel", "M", "repetition", "step", "time",
                "l2", "linf", "rel_l2", "rel_linf", "clipped"]
METRICS = ("l2", "linf", "rel_l2", "rel_linf")
SUMMARY_COLUMNS = ["preset", "kernel", "M", "step", "time", "n"] + [
    f"{m}_{s}" for m in METRICS for s in ("mean", "std", "sem")]


@dataclass
class RunConfig:
    preset: str = "heat-default"
    kernel: str = "branching"
    shots: int = 4000
    steps: int = 100
    repetitions: int = 5
    seed: int = 0
    mitigation: bool = False
    noise: str = "none"
    strategy: str = "batch"
    fuse_k: int = 2
    output_dir: str = "runs"
    m_sweep: tuple = (500, 1000, 2000, 4000, 8000)
    N: int | None = None
    dt_safety: float | None = None
    reference: str = "auto"
    mode: str = "sampled"

    def __post_init__(self):
        self.m_sweep = tuple(int(m) for m in self.m_sweep)
        self.validate()

    def validate(self):
        if self.repetitions < 1:
            raise ValidationError("repetitions must be >= 1")
        if self.shots < 1 or any(m < 1 for m in self.m_sweep):
            raise ValidationError("shot counts must be >= 1")
        if self.steps < 1:
            raise ValidationError("steps must be >= 1")
        if self.kernel not in ("bernoulli", "branching"):
            raise ValidationError(f"unknown kernel {self.kernel!r}")
        if self.strategy not in ("batch", "icf"):
            raise ValidationError(f"unknown strategy {self.strategy!r}")
        if self.reference not in ("auto", "analytic", "classical"):
            raise ValidationError(f"unknown reference {self.reference!r}")
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.preset not in PROBLEM_PRESETS:
            raise ValidationError(f"unknown problem preset {self.preset!r}")
        if self.noise not in NOISE_PRESETS:
            raise ValidationError(f"unknown noise preset {self.noise!r}")

    @classmethod
    def load(cls, path=None, **overrides) -> "RunConfig":
        """Read a flat key: value YAML file, then apply non-None overrides."""
        data = {}
        if path is not None:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
            if not isinstance(data, dict):
                raise ValidationError(f"{path}: config must be a flat mapping")
            known = {f.name for f in fields(cls)}
            unknown = sorted(set(data) - known)
            if unknown:
                raise ValidationError(f"{path}: unknown config keys {unknown}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def problem(self) -> Problem:
        return build_problem(self.preset, self.N, self.dt_safety)

    def readout(self) -> ReadoutModel | None:
        cm = noise_model(self.noise)
        return None if cm is None else ReadoutModel(cm, self.mitigation)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorNorms:
    l2: float
    linf: float
    rel_l2: float
    rel_linf: float

    @property
    def relative_defined(self) -> bool:
        return not (math.isnan(self.rel_l2) or math.isnan(self.rel_linf))


def error_norms(u, ref) -> ErrorNorms:
    """RMS and max-norm errors, absolute and relative to the reference norm.

    Relative values are NaN when the reference norm is zero.
    """
    u = np.asarray(getattr(u, "values", u), dtype=float)
    ref = np.asarray(getattr(ref, "values", ref), dtype=float)
    if u.shape != ref.shape:
        raise ValidationError(f"shape mismatch {u.shape} vs {ref.shape}")
    e = u - ref
    l2 = float(np.sqrt(np.mean(e * e)))
    linf = float(np.max(np.abs(e)))
    r2 = float(np.sqrt(np.mean(ref * ref)))
    rinf = float(np.max(np.abs(ref)))
    rel_l2 = l2 / r2 if r2 > 0 else float("nan")
    rel_linf = linf / rinf if rinf > 0 else float("nan")
    return ErrorNorms(l2, linf, rel_l2, rel_linf)


def _stats(x: np.ndarray) -> tuple[float, float, float]:
    n = len(x)
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1)) if n > 1 else 0.0
    return mean, std, std / math.sqrt(n)


@dataclass
class ErrorReport:
    rows: list[dict] = field(default_factory=list)

    def series(self, metric: str, M: int | None = None) -> np.ndarray:
        """(repetitions, steps+1) array of one metric."""
        rows = [r for r in self.rows if M is None or r["M"] == M]
        reps = sorted({r["repetition"] for r in rows})
        steps = sorted({r["step"] for r in rows})
        out = np.full((len(reps), len(steps)), np.nan)
        for r in rows:
            out[reps.index(r["repetition"]), steps.index(r["step"])] = r[metric]
        return out

    def aggregate(self) -> list[dict]:
        groups: dict[tuple, list[dict]] = {}
        for r in self.rows:
            groups.setdefault((r["preset"], r["kernel"], r["M"], r["step"]), []).append(r)
        out = []
        for (preset, kernel, M, step), rows in sorted(groups.items(), key=lambda kv: (kv[0][2], kv[0][3])):
            agg = {"preset": preset, "kernel": kernel, "M": M, "step": step,
                   "time": rows[0]["time"], "n": len(rows)}
            for m in METRICS:
                mean, std, sem = _stats(np.array([r[m] for r in rows]))
                agg.update({f"{m}_mean": mean, f"{m}_std": std, f"{m}_sem": sem})
            out.append(agg)
        return out

    def final(self, metric: str, M: int | None = None) -> np.ndarray:
        """Per-repetition values of `metric` at the last step."""
        return self.series(metric, M)[:, -1]


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

def reference_kind(problem: Problem, requested: str = "auto") -> str:
    if requested != "auto":
        return requested
    return "analytic" if problem.kind == HEAT and problem.meta.get("initial") == "sin" else "classical"


def reference_series(problem: Problem, steps: int, kind: str) -> list[np.ndarray]:
    if kind == "analytic":
        if problem.kind != HEAT:
            raise ValidationError("analytic reference only exists for the Heat preset")
        return [heat_analytic(problem.grid.x, n * problem.dt, problem.nu) for n in range(steps + 1)]
    f = problem.initial_field()
    out = [f.values]
    for _ in range(steps):
        f = classical_step(f, problem)
        out.append(f.values)
    return out


def run_trajectory(problem: Problem, kernel: str, M: int, steps: int, sampler: ShotSampler,
                   readout: ReadoutModel | None = None, mode: str = "sampled",
                   reference: list[np.ndarray] | None = None, fuse_k: int = 1):
    """Advance `steps` quantum steps, feeding each sampled field into the next.

    Returns ``(fields, per-step ErrorNorms, per-step clip counts)`` for steps
    0..steps. Step n draws from ``sampler.child(n)``. In ``variance-probe``
    mode every step restarts from the classical trajectory instead.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    if reference is None:
        reference = reference_series(problem, steps, reference_kind(problem))
    f = problem.initial_field()
    classical = f
    fields_, norms, clips = [f], [error_norms(f.values, reference[0])], [0]
    for n in range(1, steps + 1):
        s = sampler.child(n)
        if mode == "classical":
            f, clipped = classical_step(f, problem), 0
        elif mode == "variance-probe":
            f, rep = quantum_step(classical, problem, kernel, M, s, readout, fuse_k=fuse_k)
            classical = classical_step(classical, problem)
            clipped = rep.clipped
        else:
            f, rep = quantum_step(f, problem, kernel, M, s, readout,
                                  exact=(mode == "exact"), fuse_k=fuse_k)
            clipped = rep.clipped
        fields_.append(f)
        norms.append(error_norms(f.values, reference[n]))
        clips.append(clipped)
    return fields_, norms, clips


def _trajectory_rows(cfg: RunConfig, problem: Problem, M: int, steps: int,
                     reference: list[np.ndarray]) -> list[dict]:
    root = ShotSampler(cfg.seed)
    readout = cfg.readout()
    fuse_k = cfg.fuse_k if cfg.strategy == "icf" else 1
    rows = []
    for rep in range(cfg.repetitions):
        sampler = root.child(M, rep)
        _, norms, clips = run_trajectory(problem, cfg.kernel, M, steps, sampler, readout,
                                         cfg.mode, reference, fuse_k)
        for n, (e, c) in enumerate(zip(norms, clips)):
            rows.append({"preset": cfg.preset, "kernel": cfg.kernel, "M": M,
                         "repetition": rep, "step": n, "time": n * problem.dt,
                         "l2": e.l2, "linf": e.linf, "rel_l2": e.rel_l2,
                         "rel_linf": e.rel_linf, "clipped": c})
    return rows


def run_error_propagation(cfg: RunConfig, steps: int | None = None) -> ErrorReport:
    """Per-step errors over `steps` (default cfg.steps) at cfg.shots."""
    steps = cfg.steps if steps is None else steps
    problem = cfg.problem()
    ref = reference_series(problem, steps, reference_kind(problem, cfg.reference))
    log.info("propagation %s %s M=%d steps=%d dt=%.4g", cfg.preset, cfg.kernel, cfg.shots, steps, problem.dt)
    return ErrorReport(_trajectory_rows(cfg, problem, cfg.shots, steps, ref))


def run_convergence(cfg: RunConfig) -> ErrorReport:
    """Error after cfg.steps steps for every M in cfg.m_sweep."""
    problem = cfg.problem()
    ref = reference_series(problem, cfg.steps, reference_kind(problem, cfg.reference))
    rows = []
    for M in cfg.m_sweep:
        log.info("convergence %s %s M=%d", cfg.preset, cfg.kernel, M)
        rows.extend(_trajectory_rows(cfg, problem, M, cfg.steps, ref))
    return ErrorReport(rows)


def convergence_table(report: ErrorReport) -> list[dict]:
    """Final-step aggregates, one row per M."""
    agg = report.aggregate()
    last = max(r["step"] for r in agg)
    return [r for r in agg if r["step"] == last]


def convergence_slope(report: ErrorReport, metric: str = "l2") -> float:
    """Slope of log(mean final error) against log(M)."""
    table = convergence_table(report)
    M = np.array([r["M"] for r in table], dtype=float)
    e = np.array([r[f"{metric}_mean"] for r in table])
    return float(np.polyfit(np.log(M), np.log(e), 1)[0])


HARDWARE_COLUMNS = ["kernel", "M", "repetition", "variant", "l2", "linf", "clipped"]


def run_hardware_style(cfg: RunConfig, N: int = 15) -> list[dict]:
    """Single Heat step on a small grid under synthetic readout noise.

    Raw and (if cfg.mitigation) mitigated estimates share every random draw,
    so they differ only by the mitigation map. Errors are against the
    analytic solution at t = dt.
    """
    problem = build_problem(cfg.preset, N, cfg.dt_safety)
    if problem.kind != HEAT:
        raise ValidationError("hardware-style runs use a Heat preset")
    cm = noise_model(cfg.noise)
    variants = [("raw", None if cm is None else ReadoutModel(cm, False))]
    if cfg.mitigation:
        variants.append(("mitigated", None if cm is None else ReadoutModel(cm, True)))
    ref = heat_analytic(problem.grid.x, problem.dt, problem.nu)
    f0 = problem.initial_field()
    rows = []
    for rep in range(cfg.repetitions):
        sampler = ShotSampler(cfg.seed).child(cfg.shots, rep)
        for name, readout in variants:
            f1, report = quantum_step(f0, problem, cfg.kernel, cfg.shots, sampler, readout)
            e = error_norms(f1.values, ref)
            rows.append({"kernel": cfg.kernel, "M": cfg.shots, "repetition": rep,
                         "variant": name, "l2": e.l2, "linf": e.linf,
                         "clipped": report.clipped})
    return rows


# ---------------------------------------------------------------------------
# cost model and Jacobi demos
# ---------------------------------------------------------------------------

def _node_circuits(kernel: str, count: int, M: int):
    problem = build_problem("heat-default", max(count, 1))
    f = problem.initial_field()
    rows = np.stack([f.padded()[:-2], f.padded()[1:-1], f.padded()[2:]], axis=1)
    w = problem.weights(f.values)
    if kernel == "branching":
        return [build_branching_circuit(rows[i], w[i]) for i in range(count)]
    return [bernoulli_circuit(rows[i, 1]) for i in range(count)]


def synthetic_telemetry(delays, ks=(1, 2, 4, 8), shots: int = 4000, seed: int = 0,
                        kernel: str = "branching") -> list[JobTelemetry]:
    """One batched job per batch size k on a simulated clock."""
    out = []
    for j, k in enumerate(ks):
        _, tel = run_job(_node_circuits(kernel, k, shots), shots, ShotSampler(seed).child(j),
                         SimulatedClock(), delays, kernel, job_id=j)
        out.append(tel)
    return out


def table4_emulation(delays, seed: int = 0, nodes: int = 15) -> dict:
    """Per-node job telemetry for the three timing configurations."""
    configs = {"Branching 4k": ("branching", 4000, 1), "Branching 30k": ("branching", 30000, 1),
               "Bernoulli 4k": ("bernoulli", 4000, 3)}
    out = {}
    for c, (name, (kernel, shots, per_node)) in enumerate(configs.items()):
        circuits = _node_circuits(kernel, nodes, shots)
        recs = []
        for i in range(nodes * per_node):
            _, tel = run_job([circuits[i % nodes]], shots, ShotSampler(seed).child(c, i),
                             SimulatedClock(), delays, kernel, job_id=i)
            recs.append(tel)
        out[name] = recs
    return out


def run_cost_model(cfg: RunConfig, delay_preset: str = "brisbane-table4") -> dict:
    """Fit (T_launch, T_node) from zero-jitter telemetry and emulate timings."""
    delays = delay_model(delay_preset)
    clean = delays.without_jitter()
    recs = synthetic_telemetry(clean, shots=cfg.shots, seed=cfg.seed)
    fitted = fit_cost_model(recs)
    truth = CostParams(clean.queue_mean + clean.residual, clean.execution_mean(cfg.shots))
    emulated = table4_emulation(delays, cfg.seed)
    return {"generating": truth, "fitted": fitted, "fit_records": recs,
            "emulated": emulated,
            "summary": {k: summarize(v) for k, v in emulated.items()}}


def run_jacobi_demo(cfg: RunConfig, N: int = 8) -> list[dict]:
    """One exact and one sampled Jacobi sweep on tridiag(-1, 2, -1) u = 0."""
    A = poisson_matrix(N)
    b = np.zeros(N)
    u0 = np.random.default_rng(cfg.seed).random(N)
    exact = jacobi_sweep(A, b, u0)
    est, se = quantum_jacobi_sweep(A, b, u0, cfg.shots, ShotSampler(cfg.seed).child(1))
    return [{"node": i + 1, "u0": u0[i], "exact": exact[i], "sampled": est[i], "se": se[i],
             "z": (est[i] - exact[i]) / se[i] if se[i] > 0 else 0.0}
            for i in range(N)]


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def run_metadata(cfg: RunConfig, command: str, extra: dict | None = None) -> dict:
    problem = cfg.problem()
    meta = {
        "command": command,
        "version": __version__,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "repetition_streams": [[cfg.seed, r] for r in range(cfg.repetitions)],
        "problem": {"preset": cfg.preset, "settings": preset_settings(cfg.preset, cfg.N, cfg.dt_safety),
                    "dt": problem.dt, "dx": problem.grid.dx, "lambda": problem.lam,
                    "reference": reference_kind(problem, cfg.reference)},
        "preset_hashes": {
            "problem": preset_hash(PROBLEM_PRESETS[cfg.preset]),
            "noise": preset_hash(NOISE_PRESETS[cfg.noise]),
            "delays": {k: preset_hash(v) for k, v in DELAY_PRESETS.items()},
        },
    }
    if extra:
        meta.update(extra)
    return meta


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path, rows: list[dict], columns: list[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in columns})
    return path


def emit(out_dir, metadata: dict, tables: dict[str, tuple[list[dict], list[str]]]) -> list[Path]:
    """Write metadata.json plus one CSV per table; output dir created on demand."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        meta_path = out / "metadata.json"
        meta_path.write_text(json.dumps(metadata, indent=2, sort_keys=True, default=_json_default) + "\n")
        paths.append(meta_path)
        for name, (rows, cols) in tables.items():
            paths.append(write_csv(out / name, rows, cols))
    except OSError as e:
        raise OSError(f"cannot write outputs under {out}: {e}") from e
    return paths


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "__dataclass_fields__"):
        return asdict(o)
    return str(o)


def emit_error_report(report: ErrorReport, cfg: RunConfig, out_dir, command: str) -> list[Path]:
    return emit(out_dir, run_metadata(cfg, command), {
        "steps.csv": (report.rows, STEP_COLUMNS),
        "summary.csv": (report.aggregate(), SUMMARY_COLUMNS),
    })
