import math

import numpy as np
import pytest

from egoexplore.noise import NoiseSpec, OdometryIntegrator, apply_pose_noise


def test_zero_noise_passthrough(rng):
    spec = NoiseSpec()
    assert spec.is_zero and spec.label() == "none"
    delta = np.array([0.4, 0.0, math.pi / 2])
    assert np.array_equal(apply_pose_noise(delta, spec, rng), delta)
    odo = OdometryIntegrator(spec, 0.05, rng)
    assert odo.motion(8, 0, 0) == (8, 0, 0) and odo.motion(0, 0, -1) == (0, 0, -1)


def test_pure_bias_is_deterministic(rng):
    spec = NoiseSpec(trans_mean_m=0.02)
    out = apply_pose_noise([0.4, 0.0, 0.0], spec, rng)
    np.testing.assert_allclose(out, [0.42, 0.02, 0.0])


def test_translation_moments():
    spec = NoiseSpec(trans_std_m=0.03)
    rng = np.random.default_rng(7)
    d = np.array([apply_pose_noise([0.0, 0.0, 0.0], spec, rng)[0] for _ in range(100_000)])
    assert abs(d.mean()) < 0.001
    assert abs(d.std() / 0.03 - 1) < 0.03


def test_negative_std_rejected():
    with pytest.raises(ValueError):
        NoiseSpec(trans_std_m=-0.01)


def test_label():
    assert NoiseSpec(0.02, 0.05).label() == "TN 2cm,5cm"
    assert NoiseSpec(rot_std_rad=math.radians(2)).label() == "ON 0deg,2deg"


def test_odometry_remainder_is_carried():
    # a constant 2 cm forward bias adds one whole cell every 2.5 steps on average
    odo = OdometryIntegrator(NoiseSpec(trans_mean_m=0.02), 0.05, np.random.default_rng(0))
    moves = [odo.motion(8, 0, 0) for _ in range(10)]
    fwd = sum(m[0] for m in moves)
    left = sum(m[1] for m in moves)
    assert fwd == 80 + 4 and left == 4
    assert np.all(np.abs(odo.residual) <= 0.025 + 1e-12)


def test_odometry_error_is_a_random_walk():
    # believed minus true forward position after n steps has variance ~ n sigma^2
    n, trials, sigma = 25, 1500, 0.05
    rng = np.random.default_rng(11)
    errs = []
    for _ in range(trials):
        odo = OdometryIntegrator(NoiseSpec(trans_std_m=sigma), 0.05, rng)
        total = sum(odo.motion(8, 0, 0)[0] for _ in range(n)) * 0.05 + odo.residual[0]
        errs.append(total - n * 0.4)
    var = np.var(errs)
    assert var == pytest.approx(n * sigma ** 2, rel=0.1)


def test_heading_noise_turns_when_large():
    odo = OdometryIntegrator(NoiseSpec(rot_mean_rad=math.pi / 2), 0.05, np.random.default_rng(0))
    assert odo.motion(0, 0, 0)[2] == 1
    assert abs(odo.heading_residual) < 1e-12
