from __future__ import annotations

import math

import numpy as np
import pytest

from qstencil.errors import MitigationError, ValidationError
from qstencil.kernels import bernoulli_circuit
from qstencil.noise import (
    ConfusionMatrix, ReadoutModel, calibrate, corrupt, corrupt_bits, corrupt_ones, mitigate,
)
from qstencil.statevector import ShotSampler, sample

from conftest import TABLE1

CM = ConfusionMatrix.from_record(TABLE1)


def test_record_round_trip():
    assert CM.to_record() == TABLE1
    assert CM.flip0 == 0.0960 and CM.keep1 == 0.9888


@pytest.mark.parametrize("rec", [[0.9, 0.1, 0.2, 0.9], [1.1, 0, -0.1, 1], [0.5, 0.5, 0.5]])
def test_invalid_matrices(rec):
    with pytest.raises(ValidationError):
        ConfusionMatrix.from_record(rec)


def test_identity_leaves_histogram():
    hist = sample(bernoulli_circuit(0.3), 1000, ShotSampler(1))
    assert corrupt(hist, ConfusionMatrix.identity(), ShotSampler(2)) == hist


def test_pure_zero_stream():
    shots = 10**5
    bits = np.zeros((shots, 1), dtype=np.int8)
    frac = corrupt_bits(bits, CM, np.random.default_rng(0)).mean()
    assert abs(frac - 0.0960) <= 5 * math.sqrt(0.096 * 0.904 / shots)


@pytest.mark.parametrize("u", [0.1, 0.5, 0.8])
def test_observed_mean_law_of_total_probability(u):
    shots = 10**5
    rng = np.random.default_rng(4)
    ones = int(rng.binomial(shots, u))
    frac = corrupt_ones(ones, shots, CM, rng) / shots
    expected = 0.0960 * (1 - u) + 0.9888 * u
    assert abs(frac - expected) <= 5 * math.sqrt(0.25 / shots) + 5 * math.sqrt(u * (1 - u) / shots)


def test_corrupt_histogram_shape_and_total():
    hist = sample(bernoulli_circuit(0.4), 5000, ShotSampler(3))
    noisy = corrupt(hist, CM, ShotSampler(4))
    assert sum(noisy.values()) == 5000 and set(noisy) <= {"0", "1"}


def test_calibrate_identity():
    shots = 4000
    est = calibrate(ShotSampler(5), shots, ConfusionMatrix.identity())
    assert np.allclose(est.m, np.eye(2), atol=5 * math.sqrt(0.25 / shots))


def test_calibrate_table1():
    shots = 4000
    est = calibrate(ShotSampler(6), shots, CM)
    se = np.sqrt(CM.m * (1 - CM.m) / shots)
    assert np.all(np.abs(est.m - CM.m) <= 5 * se + 1e-12)


def test_calibrate_single_shot_is_degenerate_but_valid():
    est = calibrate(ShotSampler(7), 1, CM)
    assert set(np.unique(est.m)) <= {0.0, 1.0}


def test_mitigate_identity():
    assert mitigate(0.37, ConfusionMatrix.identity()) == pytest.approx(0.37)


@pytest.mark.parametrize("u", np.linspace(0.0, 1.0, 11))
def test_mitigate_exact_round_trip(u):
    assert mitigate(CM.observed(u), CM) == pytest.approx(u, abs=1e-12)


def test_mitigate_clips_below_floor():
    p, clipped = mitigate(0.0, CM, return_clipped=True)
    raw = np.linalg.solve(CM.m, [1.0, 0.0])
    assert raw[1] < 0 and clipped and p == 0.0


def test_mitigate_singular():
    with pytest.raises(MitigationError):
        mitigate(0.5, ConfusionMatrix.from_record([0.5, 0.5, 0.5, 0.5]))


def test_identity_model_mitigation_matches_raw():
    model_raw = ReadoutModel(ConfusionMatrix.identity(), False)
    model_mit = ReadoutModel(ConfusionMatrix.identity(), True)
    a = model_raw.apply(1234, 4000, np.random.default_rng(1))
    b = model_mit.apply(1234, 4000, np.random.default_rng(1))
    assert a[0] == pytest.approx(b[0], abs=1e-15)


def test_mitigated_se_scale():
    _, _, scale, _ = ReadoutModel(CM, True).apply(2000, 4000, np.random.default_rng(0))
    assert scale == pytest.approx(1 / (0.9888 - 0.0960))
