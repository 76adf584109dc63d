"""Subject orientation and distance relative to the camera, binned error maps,
and 2D keypoint velocity profiles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from occlubench.core import CameraModel
from occlubench.skeleton import H36M17

DEFAULT_ORIENTATION_EDGES = np.linspace(0.0, 180.0, 19)
DEFAULT_DISTANCE_EDGES = np.linspace(0.0, 8.0, 17)
DEFAULT_VELOCITY_EDGES = np.logspace(-2, 2, 21)


class DegenerateGeometryError(ValueError):
    pass


def subject_center(frame) -> np.ndarray:
    """Mean of all joints of one frame (or of each frame for ``(F, J, 3)`` input)."""
    return np.asarray(frame, dtype=float).mean(axis=-2)


def _to_world(frame, cam: CameraModel, space: str) -> np.ndarray:
    if space == "world":
        return np.asarray(frame, dtype=float)
    if space == "camera":
        return cam.camera_to_world(frame)
    raise ValueError(f"space must be 'world' or 'camera', got {space!r}")


def camera_distance(frame, cam: CameraModel, space: str = "world") -> float:
    """Distance in metres from the camera centre to the subject centre (input in mm)."""
    if not isinstance(cam, CameraModel):
        raise TypeError("camera_distance needs a CameraModel")
    center = subject_center(_to_world(frame, cam, space))
    return float(np.linalg.norm(center - cam.position) / 1000.0)


def orientation_angle(frame, cam: CameraModel, space: str = "world", joints=H36M17.joints) -> float:
    """Angle in degrees between the torso normal and the camera's viewing axis.

    The normal ``(LShoulder - Hip) x (RShoulder - Hip)`` points the way the
    subject faces, so 0 means facing away from the camera and 180 facing it.
    """
    pts = _to_world(frame, cam, space)
    hip = pts[joints.index("Hip")]
    ls = pts[joints.index("LShoulder")]
    rs = pts[joints.index("RShoulder")]
    if not np.all(np.isfinite([hip, ls, rs])):
        raise DegenerateGeometryError("hip or shoulder coordinates are not finite")
    a, b = ls - hip, rs - hip
    n = np.cross(a, b)
    norm = np.linalg.norm(n)
    if norm <= 1e-12 * max(np.linalg.norm(a) * np.linalg.norm(b), 1e-300):
        raise DegenerateGeometryError("hip and shoulders are collinear")
    cosang = np.clip(np.dot(n / norm, cam.viewing_direction), -1.0, 1.0)
    return float(np.degrees(np.arccos(cosang)))


def frame_geometry(coords, cam: CameraModel, space: str = "camera", joints=H36M17.joints):
    """Per-frame (orientation deg, distance m); degenerate frames give NaN orientation."""
    coords = np.asarray(coords, dtype=float)
    orient = np.full(len(coords), np.nan)
    dist = np.empty(len(coords))
    for i, frame in enumerate(coords):
        dist[i] = camera_distance(frame, cam, space)
        try:
            orient[i] = orientation_angle(frame, cam, space, joints)
        except DegenerateGeometryError:
            pass
    return orient, dist


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Bin per value, half-open bins with the last one closed; -1 when outside."""
    idx = np.searchsorted(edges, values, side="right") - 1
    idx[values == edges[-1]] = len(edges) - 2
    idx[(values < edges[0]) | (values > edges[-1]) | ~np.isfinite(values)] = -1
    return idx


def _check_edges(edges) -> np.ndarray:
    e = np.asarray(edges, dtype=float)
    if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
        raise ValueError("bin edges must be strictly increasing with at least two entries")
    return e


@dataclass
class HeatmapGrid:
    """Mergeable accumulator of error samples over (distance, orientation) bins.

    Rows are distance bins and columns orientation bins. Samples outside the
    grid are not binned and are counted in ``spill``.
    """

    orientation_edges: np.ndarray = field(default_factory=lambda: DEFAULT_ORIENTATION_EDGES.copy())
    distance_edges: np.ndarray = field(default_factory=lambda: DEFAULT_DISTANCE_EDGES.copy())
    sums: np.ndarray | None = None
    counts: np.ndarray | None = None
    spill: int = 0

    def __post_init__(self):
        self.orientation_edges = _check_edges(self.orientation_edges)
        self.distance_edges = _check_edges(self.distance_edges)
        shape = (self.distance_edges.size - 1, self.orientation_edges.size - 1)
        if self.sums is None:
            self.sums = np.zeros(shape)
        if self.counts is None:
            self.counts = np.zeros(shape, dtype=np.int64)

    def add(self, orientation, distance, error=None) -> "HeatmapGrid":
        o = np.atleast_1d(np.asarray(orientation, dtype=float))
        d = np.atleast_1d(np.asarray(distance, dtype=float))
        e = np.zeros_like(o) if error is None else np.atleast_1d(np.asarray(error, dtype=float))
        oi = _bin_index(o, self.orientation_edges)
        di = _bin_index(d, self.distance_edges)
        ok = (oi >= 0) & (di >= 0)
        self.spill += int((~ok).sum())
        np.add.at(self.counts, (di[ok], oi[ok]), 1)
        np.add.at(self.sums, (di[ok], oi[ok]), e[ok])
        return self

    def merge(self, other: "HeatmapGrid") -> "HeatmapGrid":
        if not (np.array_equal(self.orientation_edges, other.orientation_edges)
                and np.array_equal(self.distance_edges, other.distance_edges)):
            raise ValueError("cannot merge grids with different edges")
        return HeatmapGrid(self.orientation_edges, self.distance_edges,
                           self.sums + other.sums, self.counts + other.counts, self.spill + other.spill)

    @property
    def mean(self) -> np.ndarray:
        """Mean error per bin; NaN marks empty bins."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.sums / np.maximum(self.counts, 1), np.nan)

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.spill


def bin_heatmap(samples, orientation_edges=DEFAULT_ORIENTATION_EDGES, distance_edges=DEFAULT_DISTANCE_EDGES) -> HeatmapGrid:
    """Bin ``(orientation deg, distance m, error mm)`` samples, shape ``(N, 3)``."""
    s = np.asarray(samples, dtype=float).reshape(-1, 3)
    return HeatmapGrid(np.array(orientation_edges, dtype=float), np.array(distance_edges, dtype=float)).add(s[:, 0], s[:, 1], s[:, 2])


@dataclass(frozen=True)
class VelocityBin:
    low: float
    high: float
    count: int
    mean_error: float | None


def keypoint_speeds(coords2d) -> np.ndarray:
    """Pixels per frame for frames 1.., shape ``(F - 1, J)``."""
    c = np.asarray(coords2d, dtype=float)
    if c.shape[0] < 2:
        raise ValueError("velocity needs at least two frames")
    return np.linalg.norm(np.diff(c, axis=0), axis=-1)


def bin_velocity(speeds, errors, edges=DEFAULT_VELOCITY_EDGES) -> list[VelocityBin]:
    """Frequency and mean error per speed bin. Speeds beyond the ends fall in the end bins."""
    e = _check_edges(edges)
    s = np.asarray(speeds, dtype=float).ravel()
    err = np.asarray(errors, dtype=float).ravel()
    keep = np.isfinite(s) & np.isfinite(err)
    s, err = s[keep], err[keep]
    idx = np.clip(np.searchsorted(e, s, side="right") - 1, 0, e.size - 2)
    counts = np.bincount(idx, minlength=e.size - 1)
    sums = np.bincount(idx, weights=err, minlength=e.size - 1)
    return [
        VelocityBin(float(e[i]), float(e[i + 1]), int(counts[i]), float(sums[i] / counts[i]) if counts[i] else None)
        for i in range(e.size - 1)
    ]


def velocity_profile(seq2d, pred3d, gt3d, edges=DEFAULT_VELOCITY_EDGES, exclude=()) -> list[VelocityBin]:
    """Per-keypoint 3D error as a function of 2D keypoint speed."""
    c2 = getattr(seq2d, "coords", seq2d)
    speeds = keypoint_speeds(c2)
    p = np.asarray(getattr(pred3d, "coords", pred3d), dtype=float)
    g = np.asarray(getattr(gt3d, "coords", gt3d), dtype=float)
    if p.shape != g.shape or p.shape[:2] != np.shape(c2)[:2]:
        raise ValueError("2D, predicted and ground-truth sequences must share frames and joints")
    err = np.linalg.norm(p - g, axis=-1)[1:]
    if exclude:
        names = tuple(getattr(gt3d, "joints", H36M17.joints))
        keep = [j for j, n in enumerate(names) if n not in set(exclude)]
        speeds, err = speeds[:, keep], err[:, keep]
    return bin_velocity(speeds, err, edges)
