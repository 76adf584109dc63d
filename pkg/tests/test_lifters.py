import numpy as np
import pytest

from occlubench.core import DepthError, PoseSequence2D, PoseSequence3D, project
from occlubench.lifters import LifterSpec, constant_pose_lifter, passthrough_lifter, run_baseline
from occlubench.metrics import mpjpe

from conftest import identity_camera


def test_passthrough_inverts_projection(rng):
    cam = identity_camera()
    gt = PoseSequence3D(rng.normal(0, 300, size=(8, 17, 3)) + [0, 0, 4000])
    seq = PoseSequence2D(project(gt.coords, cam, space="camera"))
    np.testing.assert_allclose(passthrough_lifter(seq, gt, cam).coords, gt.coords, atol=1e-9)


def test_passthrough_error_scales_with_depth():
    cam = identity_camera()
    gt = PoseSequence3D(np.tile([0.0, 0.0, 2000.0], (1, 17, 1)))
    seq = PoseSequence2D(project(gt.coords, cam, space="camera") + [3.0, 4.0])
    pred = passthrough_lifter(seq, gt, cam)
    assert mpjpe(pred, gt, exclude=()) == pytest.approx(5.0 * 2000 / 1000)


def test_passthrough_rejects_bad_depth():
    cam = identity_camera()
    gt = PoseSequence3D(np.zeros((1, 17, 3)))
    with pytest.raises(DepthError):
        passthrough_lifter(PoseSequence2D(np.zeros((1, 17, 2))), gt, cam)


def test_constant_pose(rng):
    gt = PoseSequence3D(rng.normal(size=(6, 17, 3)))
    pred = constant_pose_lifter(gt)
    assert np.allclose(pred.coords, gt.coords.mean(axis=0))


def test_run_baseline_dispatch(rng):
    gt = PoseSequence3D(rng.normal(size=(2, 17, 3)) + [0, 0, 3000])
    assert run_baseline("baseline:gt", None, gt, None) is gt
    with pytest.raises(ValueError):
        run_baseline("baseline:passthrough", None, gt, None)
    with pytest.raises(ValueError):
        run_baseline("baseline:oracle", None, gt, None)
    with pytest.raises(ValueError):
        LifterSpec("Passthrough")
