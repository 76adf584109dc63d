"""Reference "models" with analytically known behaviour.

They read ground-truth depth and exist to validate the harness end to end;
they are not pose estimators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from occlubench.core import CameraModel, DepthError, PoseSequence2D, PoseSequence3D

BASELINE_IDS = ("baseline:gt", "baseline:passthrough", "baseline:constpose")


@dataclass(frozen=True)
class LifterSpec:
    kind: str  # GtOracle | Passthrough | ConstantPose
    camera: CameraModel | None = None

    def __post_init__(self):
        if self.kind not in ("GtOracle", "Passthrough", "ConstantPose"):
            raise ValueError(f"unknown lifter kind {self.kind!r}")
        if self.kind == "Passthrough" and self.camera is None:
            raise ValueError("the passthrough lifter needs a camera")


def gt_oracle(gt3d: PoseSequence3D) -> PoseSequence3D:
    return gt3d


def passthrough_lifter(seq2d: PoseSequence2D, gt3d: PoseSequence3D, cam: CameraModel) -> PoseSequence3D:
    """Back-project each 2D keypoint at its ground-truth camera-space depth."""
    uv = seq2d.coords
    z = gt3d.coords[..., 2]
    if uv.shape[:2] != z.shape:
        raise ValueError(f"2D shape {uv.shape[:2]} does not match 3D shape {z.shape}")
    bad = ~(z > 0)
    if bad.any():
        f, j = np.argwhere(bad)[0]
        raise DepthError(int(f), int(j), float(z[f, j]))
    x = (uv[..., 0] - cam.cx) * z / cam.fx
    y = (uv[..., 1] - cam.cy) * z / cam.fy
    return gt3d.replace(coords=np.stack([x, y, z], axis=-1))


def constant_pose_lifter(gt3d: PoseSequence3D) -> PoseSequence3D:
    """Predict the temporal mean pose on every frame."""
    if gt3d.num_frames < 1:
        raise ValueError("need at least one frame")
    mean_pose = gt3d.coords.mean(axis=0)
    return gt3d.replace(coords=np.broadcast_to(mean_pose, gt3d.coords.shape))


def run_baseline(model_id: str, seq2d: PoseSequence2D | None, gt3d: PoseSequence3D, cam: CameraModel | None) -> PoseSequence3D:
    if model_id == "baseline:gt":
        return gt_oracle(gt3d)
    if model_id == "baseline:constpose":
        return constant_pose_lifter(gt3d)
    if model_id == "baseline:passthrough":
        if cam is None:
            raise ValueError("baseline:passthrough needs camera parameters in the ground-truth file")
        if seq2d is None:
            raise ValueError("baseline:passthrough needs 2D input")
        return passthrough_lifter(seq2d, gt3d, cam)
    raise ValueError(f"unknown baseline {model_id!r}; expected one of {BASELINE_IDS}")
