"""Pose sequences, occlusion tracks and the pinhole camera.

All containers are frozen: arrays are copied on construction and marked
read-only, so they can be shared between worker processes and threads.
Use :func:`dataclasses.replace` to derive modified copies.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from occlubench.skeleton import H36M17, SkeletonSchema, get_schema


class Visibility(IntEnum):
    Visible = 0
    SelfOccluded = 1
    ExternallyOccluded = 2


class DepthError(ValueError):
    """A point sits on or behind the camera plane."""

    def __init__(self, frame: int, joint: int, depth: float):
        super().__init__(f"non-positive depth {depth!r} at frame {frame}, joint {joint}")
        self.frame = frame
        self.joint = joint


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class OcclusionTrack:
    """Per-frame, per-joint visibility category (see :class:`Visibility`)."""

    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", _frozen(self.labels, dtype=np.int8))

    @classmethod
    def from_binary(cls, flags) -> "OcclusionTrack":
        """Binary occlusion flags; occluded entries are stored as externally occluded."""
        flags = np.asarray(flags)
        return cls(np.where(flags != 0, Visibility.ExternallyOccluded, Visibility.Visible))

    @property
    def occluded(self) -> np.ndarray:
        return self.labels != Visibility.Visible

    @property
    def shape(self) -> tuple[int, ...]:
        return self.labels.shape

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, OcclusionTrack):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)


def _resolve_joints(schema_tag: str, joints) -> tuple[str, ...]:
    if joints is None:
        return get_schema(schema_tag).joints
    return tuple(joints)


@dataclass(frozen=True, eq=False)
class _PoseSequence:
    coords: np.ndarray
    occlusion: OcclusionTrack | None = None
    confidence: np.ndarray | None = None
    schema: str = H36M17.tag
    joints: tuple[str, ...] | None = None
    # Joints with no source in the layout they were mapped from (all-NaN columns).
    missing: frozenset[str] = field(default_factory=frozenset)
    fps: float | None = None

    _dims = 0

    def __post_init__(self):
        coords = _frozen(self.coords)
        if coords.ndim < 3 or coords.shape[-1] != self._dims:
            raise ValueError(f"coords must have shape (frames, joints, {self._dims}); got {coords.shape}")
        object.__setattr__(self, "coords", coords)
        if self.occlusion is not None and not isinstance(self.occlusion, OcclusionTrack):
            object.__setattr__(self, "occlusion", OcclusionTrack(self.occlusion))
        if self.confidence is not None:
            object.__setattr__(self, "confidence", _frozen(self.confidence))
        object.__setattr__(self, "joints", _resolve_joints(self.schema, self.joints))
        object.__setattr__(self, "missing", frozenset(self.missing))

    @property
    def num_frames(self) -> int:
        return self.coords.shape[0]

    @property
    def num_joints(self) -> int:
        return self.coords.shape[-2]

    def joint_index(self, joint: int | str) -> int:
        if isinstance(joint, str):
            schema = get_schema(self.schema)
            name = schema.joints[schema.index(joint)]
            if name not in self.joints:
                raise KeyError(f"joint {name!r} not present in this sequence")
            return self.joints.index(name)
        j = int(joint)
        if not 0 <= j < self.num_joints:
            raise IndexError(f"joint index {j} out of range ({self.num_joints} joints)")
        return j

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        for f in dataclasses.fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if a is None or b is None or not np.array_equal(a, b, equal_nan=True):
                    return False
            elif a != b:
                return False
        return True


@dataclass(frozen=True, eq=False)
class PoseSequence2D(_PoseSequence):
    """2D keypoints in pixels, shape ``(frames, joints, 2)``."""

    width: float = 1000.0
    height: float = 1000.0

    _dims = 2

    @property
    def resolution(self) -> tuple[float, float]:
        return (self.width, self.height)


@dataclass(frozen=True, eq=False)
class PoseSequence3D(_PoseSequence):
    """Camera-space 3D joints in millimetres.

    ``coords`` is ``(frames, joints, 3)``, or ``(frames, hypotheses, joints, 3)``
    for multi-hypothesis predictors.
    """

    _dims = 3

    @property
    def num_hypotheses(self) -> int | None:
        return self.coords.shape[1] if self.coords.ndim == 4 else None


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole intrinsics plus world-to-camera extrinsics: ``X_cam = R @ X_world + t``."""

    fx: float
    fy: float
    cx: float
    cy: float
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    resolution: tuple[float, float] = (1000.0, 1000.0)

    def __post_init__(self):
        R = _frozen(self.R).reshape(3, 3)
        t = _frozen(self.t).reshape(3)
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise ValueError("camera extrinsics must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
            raise ValueError("R is not orthonormal (|R^T R - I| > 1e-9)")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "resolution", tuple(float(v) for v in self.resolution))

    @property
    def position(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return -self.R.T @ self.t

    @property
    def viewing_direction(self) -> np.ndarray:
        """Camera optical axis (+Z) expressed in world coordinates."""
        return self.R[2].copy()

    def world_to_camera(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.R.T + self.t

    def camera_to_world(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.t) @ self.R

    def to_dict(self) -> dict:
        return {
            "fx": float(self.fx), "fy": float(self.fy), "cx": float(self.cx), "cy": float(self.cy),
            "R": [float(v) for v in self.R.ravel()],
            "t": [float(v) for v in self.t],
        }

    def __eq__(self, other):
        if not isinstance(other, CameraModel):
            return NotImplemented
        return (
            (self.fx, self.fy, self.cx, self.cy, self.resolution)
            == (other.fx, other.fy, other.cx, other.cy, other.resolution)
            and np.array_equal(self.R, other.R)
            and np.array_equal(self.t, other.t)
        )


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    frame: int | None = None
    joint: int | None = None


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_sequence(seq: PoseSequence2D | PoseSequence3D, schema: SkeletonSchema | None = None) -> ValidationResult:
    """Collect every structural problem in ``seq``. Never raises."""
    schema = schema or get_schema(seq.schema)
    out: list[Violation] = []
    coords = seq.coords
    n_frames = coords.shape[0]
    n_joints = coords.shape[-2]

    if seq.schema != schema.tag:
        out.append(Violation("schema", f"sequence schema {seq.schema} does not match {schema.tag}"))
    unknown = [j for j in seq.joints if j not in schema.joints]
    if unknown:
        out.append(Violation("schema", f"joints not in {schema.tag}: {unknown}"))
    if len(seq.joints) != n_joints:
        out.append(Violation("dimension", f"{n_joints} coordinate columns for {len(seq.joints)} joints"))
    if n_frames < 1:
        out.append(Violation("dimension", "sequence has no frames"))

    missing_cols = [i for i, name in enumerate(seq.joints) if name in seq.missing]
    bad = ~np.isfinite(coords)
    while bad.ndim > 2:
        bad = bad.any(axis=-1) if bad.ndim == 3 else bad.any(axis=1)
    if missing_cols and bad.shape[1] == n_joints:
        bad[:, missing_cols] = False
    for f, j in zip(*np.nonzero(bad)):
        out.append(Violation("non-finite", f"non-finite coordinate at frame {f}, joint {j}", int(f), int(j)))

    if isinstance(seq, PoseSequence2D) and not (seq.width > 0 and seq.height > 0):
        out.append(Violation("resolution", f"resolution must be positive, got {seq.width}x{seq.height}"))

    if seq.occlusion is not None:
        labels = seq.occlusion.labels
        if labels.shape != (n_frames, n_joints):
            out.append(Violation("dimension", f"occlusion track shape {labels.shape} != {(n_frames, n_joints)}"))
        else:
            for f, j in zip(*np.nonzero(~np.isin(labels, [0, 1, 2]))):
                out.append(Violation("label", f"label {labels[f, j]} out of range at frame {f}, joint {j}", int(f), int(j)))

    if seq.confidence is not None:
        conf = seq.confidence
        if conf.shape != (n_frames, n_joints):
            out.append(Violation("dimension", f"confidence shape {conf.shape} != {(n_frames, n_joints)}"))
        else:
            for f, j in zip(*np.nonzero(~((conf >= 0) & (conf <= 1)))):
                out.append(Violation("confidence", f"confidence outside [0,1] at frame {f}, joint {j}", int(f), int(j)))

    return ValidationResult(tuple(out))


def project(points, cam: CameraModel, *, space: str = "world") -> np.ndarray:
    """Pinhole projection of ``(joints, 3)`` or ``(frames, joints, 3)`` points to pixels.

    ``space="camera"`` skips the extrinsic transform.
    """
    pts = np.asarray(points, dtype=float)
    if space == "world":
        pts = cam.world_to_camera(pts)
    elif space != "camera":
        raise ValueError(f"space must be 'world' or 'camera', got {space!r}")
    z = pts[..., 2]
    bad = ~(z > 0)
    if bad.any():
        idx = np.argwhere(np.atleast_1d(bad))[0]
        frame, joint = (int(idx[0]), int(idx[1])) if z.ndim == 2 else (0, int(idx[0]) if z.ndim else 0)
        raise DepthError(frame, joint, float(np.atleast_1d(z)[tuple(idx)]))
    u = cam.fx * pts[..., 0] / z + cam.cx
    v = cam.fy * pts[..., 1] / z + cam.cy
    return np.stack([u, v], axis=-1)


def center_on_root(seq: PoseSequence3D, root: str = "Hip") -> PoseSequence3D:
    """Translate each frame (and hypothesis) so the root joint sits at the origin."""
    r = seq.joint_index(root)
    coords = seq.coords - seq.coords[..., r : r + 1, :]
    return seq.replace(coords=coords)
