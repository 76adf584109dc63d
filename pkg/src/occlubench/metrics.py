"""MPJPE variants, 2D detector error statistics and occlusion statistics.

Selections that come out empty are reported as ABSENT (NaN in arrays,
``None`` in mappings), never as zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from occlubench.core import OcclusionTrack, Visibility
from occlubench.skeleton import H36M17, SCHEMAS

SLICES = ("overall", "visible", "occluded")
DEFAULT_EXCLUDE = ("Hip",)
ABSENT = None


class EmptySelectionError(ValueError):
    pass


@dataclass(frozen=True)
class JointExclusion:
    joints: frozenset[str] = frozenset(DEFAULT_EXCLUDE)

    def __post_init__(self):
        object.__setattr__(self, "joints", frozenset(self.joints))


def _coords(x) -> np.ndarray:
    c = x.coords if hasattr(x, "coords") else np.asarray(x, dtype=float)
    if c.ndim != 3:
        raise ValueError(f"expected (frames, joints, dims) coordinates, got shape {c.shape}; aggregate hypotheses first")
    return c


def _joint_names(*seqs, n_joints: int) -> tuple[str, ...] | None:
    for s in seqs:
        if hasattr(s, "joints"):
            return tuple(s.joints)
    # Bare arrays are assumed to follow the canonical layout.
    return H36M17.joints if n_joints == H36M17.num_joints else None


def _labels_array(labels) -> np.ndarray | None:
    if labels is None:
        return None
    if isinstance(labels, OcclusionTrack):
        return labels.labels
    return np.asarray(labels)


def _exclude_set(exclude) -> frozenset[str]:
    if exclude is None:
        return frozenset()
    if isinstance(exclude, JointExclusion):
        return exclude.joints
    if isinstance(exclude, str):
        return frozenset([exclude])
    return frozenset(exclude)


def selection_mask(shape: tuple[int, int], joints: Sequence[str] | None, exclude=DEFAULT_EXCLUDE,
                   slice: str = "overall", labels=None, frames: slice | None = None) -> np.ndarray:
    """Boolean ``(frames, joints)`` mask of the entries an MPJPE variant averages over."""
    if slice not in SLICES:
        raise ValueError(f"slice must be one of {SLICES}, got {slice!r}")
    n_f, n_j = shape
    mask = np.ones(shape, dtype=bool)
    excl = _exclude_set(exclude)
    if excl:
        if joints is None:
            raise ValueError("joint exclusion needs named joints; pass sequences or exclude=None")
        known = set(joints).union(*(sch.joints for sch in SCHEMAS.values()))
        unknown = excl - known
        if unknown:
            raise ValueError(f"unknown excluded joints: {sorted(unknown)}")
        for j, name in enumerate(joints):
            if name in excl:
                mask[:, j] = False
    if frames is not None:
        keep = np.zeros(n_f, dtype=bool)
        keep[frames] = True
        mask &= keep[:, None]
    if slice != "overall":
        lab = _labels_array(labels)
        if lab is None:
            raise ValueError(f"slice {slice!r} requires occlusion labels")
        if lab.shape != shape:
            raise ValueError(f"labels shape {lab.shape} does not match {shape}")
        occluded = lab != Visibility.Visible
        mask &= occluded if slice == "occluded" else ~occluded
    return mask


def joint_errors(pred, gt) -> np.ndarray:
    """Euclidean error per (frame, joint)."""
    p, g = _coords(pred), _coords(gt)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs gt {g.shape}")
    return np.linalg.norm(p - g, axis=-1)


def mpjpe(pred, gt, exclude=DEFAULT_EXCLUDE, slice: str = "overall", labels=None, frames=None) -> float:
    """Mean per-joint position error over the selected (frame, joint) entries."""
    err = joint_errors(pred, gt)
    mask = selection_mask(err.shape, _joint_names(gt, pred, n_joints=err.shape[1]), exclude, slice, labels, frames)
    if not mask.any():
        raise EmptySelectionError(f"no entries selected for slice {slice!r}")
    return float(err[mask].mean())


def per_joint_mpjpe(pred, gt, exclude=DEFAULT_EXCLUDE, slice: str = "overall", labels=None, frames=None) -> np.ndarray:
    """Per-joint MPJPE; NaN marks joints with nothing selected (or excluded)."""
    err = joint_errors(pred, gt)
    mask = selection_mask(err.shape, _joint_names(gt, pred, n_joints=err.shape[1]), exclude, slice, labels, frames)
    counts = mask.sum(axis=0)
    sums = np.where(mask, err, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


class SliceSum(NamedTuple):
    total: float
    count: int


def slice_sums(pred, gt, exclude=DEFAULT_EXCLUDE, labels=None, frames=None,
               slices: Iterable[str] = SLICES) -> dict[str, SliceSum]:
    """Error sum and entry count per slice, for pooling across sequences."""
    err = joint_errors(pred, gt)
    names = _joint_names(gt, pred, n_joints=err.shape[1])
    out = {}
    for s in slices:
        if s != "overall" and labels is None:
            continue
        m = selection_mask(err.shape, names, exclude, s, labels, frames)
        out[s] = SliceSum(float(err[m].sum()), int(m.sum()))
    return out


def normalized_mpjpe(series, baseline):
    """Difference to the clean-input baseline, key by key.

    Accepts two scalars, or two mappings with matching keys.
    """
    if isinstance(series, Mapping):
        if not isinstance(baseline, Mapping):
            raise TypeError("baseline must be a mapping when series is")
        out = {}
        for key, value in series.items():
            if key not in baseline:
                raise KeyError(f"no baseline value for {key!r}")
            out[key] = value - baseline[key]
        return out
    return float(series) - float(baseline)


@dataclass(frozen=True)
class CategoryStats:
    mean: float
    std: float
    count: int


def detector_error_stats(detected, gt, labels=None) -> dict[str, CategoryStats | None]:
    """2D pixel error per visibility category (mean and population std).

    Inputs should already be aligned to a common joint set; NaN entries are ignored.
    """
    d, g = _coords(detected), _coords(gt)
    if d.shape != g.shape:
        raise ValueError(f"shape mismatch: {d.shape} vs {g.shape}")
    lab = _labels_array(labels if labels is not None else getattr(gt, "occlusion", None))
    if lab is None:
        raise ValueError("detector error statistics need occlusion labels")
    if lab.shape != d.shape[:2]:
        raise ValueError(f"labels shape {lab.shape} does not match {d.shape[:2]}")
    err = np.linalg.norm(d - g, axis=-1)
    finite = np.isfinite(err)
    out: dict[str, CategoryStats | None] = {}
    for cat in Visibility:
        sel = np.sort(err[(lab == cat) & finite])
        out[cat.name] = CategoryStats(float(sel.mean()), float(sel.std()), int(sel.size)) if sel.size else ABSENT
    return out


def run_lengths(flags) -> np.ndarray:
    """Lengths of maximal runs of truthy values in a 1D sequence."""
    f = np.asarray(flags, dtype=bool).astype(np.int8)
    if f.size == 0:
        return np.zeros(0, dtype=int)
    edges = np.diff(np.concatenate([[0], f, [0]]))
    starts = np.nonzero(edges == 1)[0]
    ends = np.nonzero(edges == -1)[0]
    return ends - starts


@dataclass(frozen=True)
class DurationStats:
    average: np.ndarray
    maximum: np.ndarray


def _as_occluded(track) -> np.ndarray:
    if isinstance(track, OcclusionTrack):
        return track.occluded
    a = np.asarray(track)
    if a.ndim == 1:
        a = a[:, None]
    return a != Visibility.Visible


def occlusion_duration_stats(labels) -> DurationStats:
    """Average and longest occlusion streak per joint, in frames.

    ``labels`` is one track, or a mapping from action to a track (or list of
    tracks, e.g. one per camera). Streak statistics are taken per action, then
    the maximum is taken across actions and the average is averaged over the
    actions where the joint is occluded at all.
    """
    groups = labels if isinstance(labels, Mapping) else {None: labels}
    per_action_avg, per_action_max = [], []
    n_j = None
    for tracks in groups.values():
        if isinstance(tracks, (list, tuple)):
            occs = [_as_occluded(t) for t in tracks]
        else:
            occs = [_as_occluded(tracks)]
        n_j = occs[0].shape[1] if n_j is None else n_j
        avg = np.full(n_j, np.nan)
        mx = np.zeros(n_j)
        for j in range(n_j):
            runs = np.concatenate([run_lengths(o[:, j]) for o in occs])
            if runs.size:
                avg[j] = runs.mean()
                mx[j] = runs.max()
        per_action_avg.append(avg)
        per_action_max.append(mx)
    if n_j is None:
        return DurationStats(np.zeros(0), np.zeros(0))
    avgs = np.array(per_action_avg)
    occurred = ~np.isnan(avgs)
    n_occ = occurred.sum(axis=0)
    average = np.where(n_occ > 0, np.where(occurred, avgs, 0.0).sum(axis=0) / np.maximum(n_occ, 1), 0.0)
    return DurationStats(average, np.max(per_action_max, axis=0))


@dataclass(frozen=True)
class OccludedHistogram:
    counts: np.ndarray  # counts[k] = frames with exactly k occluded joints
    mean_fraction: float | None

    @property
    def frames(self) -> int:
        return int(self.counts.sum())


def occluded_count_histogram(labels, n_joints: int | None = None) -> OccludedHistogram:
    """Distribution of the number of occluded joints per frame."""
    tracks = labels if isinstance(labels, (list, tuple)) else [labels]
    occs = [_as_occluded(t) for t in tracks]
    n_j = n_joints or (occs[0].shape[1] if occs else 17)
    counts = np.zeros(n_j + 1, dtype=np.int64)
    total_occ = total = 0
    for o in occs:
        per_frame = o.sum(axis=1)
        counts += np.bincount(per_frame, minlength=n_j + 1)[: n_j + 1]
        total_occ += int(o.sum())
        total += o.size
    return OccludedHistogram(counts, total_occ / total if total else None)


def occlusion_rate_per_joint(labels) -> np.ndarray:
    """Fraction of frames in which each joint is occluded."""
    tracks = labels if isinstance(labels, (list, tuple)) else [labels]
    occs = np.concatenate([_as_occluded(t) for t in tracks], axis=0)
    return occs.mean(axis=0)


@dataclass(frozen=True)
class RunSummary:
    mean: float
    std: float
    n: int


def _summarize(values: Sequence[float]) -> RunSummary:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("at least one run is required")
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return RunSummary(float(v.mean()), std, int(v.size))


def aggregate_runs(runs):
    """Mean and sample standard deviation across runs.

    ``runs`` is a sequence of values, or a mapping from key to such a sequence.
    """
    if isinstance(runs, Mapping):
        return {k: _summarize(v) for k, v in runs.items()}
    return _summarize(runs)


class ReportKey(NamedTuple):
    model: str
    sigma: float | None  # None = clean 2D input
    run: int | None  # None = aggregated over runs
    action: str = "ALL"
    camera: str = "ALL"
    joint: str = "ALL"
    slice: str = "overall"


@dataclass(frozen=True)
class ReportEntry:
    mean: float
    std: float
    count: int


@dataclass
class MetricReport:
    entries: dict[ReportKey, ReportEntry] = field(default_factory=dict)

    def add(self, key: ReportKey, mean: float, std: float, count: int) -> None:
        if count <= 0:
            raise ValueError(f"{key}: count must be positive")
        if std < 0:
            raise ValueError(f"{key}: std must be non-negative")
        self.entries[key] = ReportEntry(mean, std, count)

    def get(self, key: ReportKey) -> ReportEntry | None:
        return self.entries.get(key)

    def partition_violations(self) -> list[Hashable]:
        """Keys whose overall count differs from visible + occluded counts."""
        bad = []
        for key, entry in self.entries.items():
            if key.slice != "overall":
                continue
            vis = self.entries.get(key._replace(slice="visible"))
            occ = self.entries.get(key._replace(slice="occluded"))
            if vis is None and occ is None:
                continue
            if entry.count != (vis.count if vis else 0) + (occ.count if occ else 0):
                bad.append(key)
        return bad
