"""Sampling micro-kernels for explicit PDE stencils on a statevector simulator."""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    DegenerateError, DomainError, MicroKernelError, MitigationError, RangeError,
    ResourceError, StabilityError, ValidationError,
)
from .kernels import (
    NormWindow, bernoulli_kernel, branching_kernel, build_branching_circuit,
    normalize, denormalize, signed_mixture_kernel,
)
from .noise import ConfusionMatrix, ReadoutModel, calibrate, mitigate
from .pde import Field, Grid1D, Problem, classical_step, quantum_step
from .statevector import Circuit, Gate, ShotSampler, apply, sample

__all__ = [
    "__version__",
    "MicroKernelError", "ValidationError", "ResourceError", "DomainError", "RangeError",
    "StabilityError", "MitigationError", "DegenerateError",
    "NormWindow", "bernoulli_kernel", "branching_kernel", "build_branching_circuit",
    "normalize", "denormalize", "signed_mixture_kernel",
    "ConfusionMatrix", "ReadoutModel", "calibrate", "mitigate",
    "Field", "Grid1D", "Problem", "classical_step", "quantum_step",
    "Circuit", "Gate", "ShotSampler", "apply", "sample",
]
