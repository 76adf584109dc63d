"""Occlusion simulation on 2D keypoints.

Protocol 1 perturbs every keypoint labelled occluded with isotropic Gaussian
noise whose pixel scale is a fraction of the mean image side. Protocol 2
perturbs a single joint inside a fixed frame window. The masking and
interpolation helpers reproduce the input preprocessing of occlusion-aware
lifters (zeroed joints plus a guidance mask, or nearest-visible filling with a
confidence channel).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterator, Mapping

import numpy as np

from occlubench.core import OcclusionTrack, PoseSequence2D, PoseSequence3D
from occlubench.rng import derive_seed, normal_pairs, stable_id, uniform
from occlubench.skeleton import H36M17

DEFAULT_SIGMAS = (0.001, 0.005, 0.01, 0.03, 0.05)
P2_SIGMAS = (0.03,)
P2_WINDOW = (50, 150)
P2_SEGMENT = 243

PROTOCOL_IDS = {"P1": 1, "P2": 2}
_MASK_STREAM = 3
_ALL_JOINTS = -1


def sigma_to_px(sigma: float, width: float, height: float) -> float:
    """Pixel standard deviation for a noise level given as a fraction of the mean image side."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if not (width > 0 and height > 0):
        raise ValueError(f"resolution must be positive, got {width}x{height}")
    # Decimal arithmetic on the shortest repr treats the inputs as the decimals
    # they were written as, so 0.05 at 1000x1002 gives 50.05 rather than 50.050000000000004.
    d = Decimal(repr(float(sigma))) * (Decimal(repr(float(width))) + Decimal(repr(float(height)))) / 2
    return float(d)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise level plus the key of the random stream that realises it.

    ``sigma_px`` overrides the pixel scale; by default it is derived from the
    corrupted sequence's resolution.
    """

    sigma: float
    seed: int
    run: int = 0
    sigma_px: float | None = None

    def __post_init__(self):
        if self.sigma < 0 or (self.sigma_px is not None and self.sigma_px < 0):
            raise ValueError("noise level must be non-negative")

    def pixels(self, width: float, height: float) -> float:
        return self.sigma_px if self.sigma_px is not None else sigma_to_px(self.sigma, width, height)


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: str = "P1"
    sigmas: tuple[float, ...] | None = None
    runs: int | None = None
    window: tuple[int, int] = P2_WINDOW
    segment: int = P2_SEGMENT
    joints: tuple[str, ...] | None = None
    base_seed: int = 0

    def __post_init__(self):
        proto = self.protocol.upper()
        if proto not in PROTOCOL_IDS:
            raise ValueError(f"protocol must be P1 or P2, got {self.protocol!r}")
        object.__setattr__(self, "protocol", proto)
        if self.sigmas is None:
            object.__setattr__(self, "sigmas", DEFAULT_SIGMAS if proto == "P1" else P2_SIGMAS)
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if any(s < 0 for s in self.sigmas):
            raise ValueError("sigmas must be non-negative")
        if self.runs is None:
            object.__setattr__(self, "runs", 10 if proto == "P1" else 5)
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        lo, hi = self.window
        object.__setattr__(self, "window", (int(lo), int(hi)))
        if not 0 <= lo <= hi <= self.segment:
            raise ValueError(f"window {self.window} must lie within the first {self.segment} frames")

    @property
    def protocol_id(self) -> int:
        return PROTOCOL_IDS[self.protocol]


def task_seed(base_seed: int, protocol: str, sigma_index: int, run: int, sequence_id: str, joint: int = _ALL_JOINTS) -> int:
    return derive_seed(base_seed, PROTOCOL_IDS[protocol], sigma_index, run, stable_id(sequence_id), joint)


def _require_labels(seq: PoseSequence2D) -> np.ndarray:
    if seq.occlusion is None:
        raise ValueError("sequence has no occlusion track")
    occ = seq.occlusion.occluded
    if occ.shape != seq.coords.shape[:2]:
        raise ValueError(f"occlusion track shape {occ.shape} does not match coords {seq.coords.shape[:2]}")
    return occ


def inject_occlusion_noise(seq: PoseSequence2D, spec: NoiseSpec) -> PoseSequence2D:
    """Add N(0, sigma_px^2 I) to every occluded keypoint; visible keypoints are untouched."""
    occ = _require_labels(seq)
    sigma_px = spec.pixels(seq.width, seq.height)
    if sigma_px == 0 or not occ.any():
        return seq
    n_f, n_j = occ.shape
    eps = normal_pairs(spec.seed, np.arange(n_f * n_j)).reshape(n_f, n_j, 2) * sigma_px
    coords = np.where(occ[..., None], seq.coords + eps, seq.coords)
    return seq.replace(coords=coords)


def protocol2_perjoint(seq: PoseSequence2D, joint: int | str, spec: NoiseSpec, window: tuple[int, int] = P2_WINDOW) -> PoseSequence2D:
    """Perturb one joint on frames ``window[0] <= f < window[1]`` only."""
    j = seq.joint_index(joint)
    lo, hi = window
    if not 0 <= lo <= hi:
        raise ValueError(f"invalid window {window}")
    if seq.num_frames < hi:
        raise ValueError(f"sequence has {seq.num_frames} frames, shorter than window end {hi}")
    sigma_px = spec.pixels(seq.width, seq.height)
    if hi == lo or sigma_px == 0:
        return seq
    frames = np.arange(lo, hi)
    eps = normal_pairs(spec.seed, frames * seq.num_joints + j) * sigma_px
    coords = np.array(seq.coords)
    coords[lo:hi, j] += eps
    return seq.replace(coords=coords)


@dataclass(frozen=True)
class SweepVariant:
    """One corrupted copy of a dataset. ``sigma is None`` marks the clean baseline."""

    protocol: str
    sigma_index: int | None
    sigma: float | None
    run: int | None
    joint: str | None = None
    sequences: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    @property
    def is_baseline(self) -> bool:
        return self.sigma is None


def protocol1_task(seq: PoseSequence2D, sequence_id: str, sigma_index: int, sigma: float, run: int, base_seed: int):
    seed = task_seed(base_seed, "P1", sigma_index, run, sequence_id)
    return inject_occlusion_noise(seq, NoiseSpec(sigma, seed, run)), seed


def protocol1_sweep(dataset: Mapping[str, PoseSequence2D], config: ProtocolConfig) -> list[SweepVariant]:
    """Baseline plus one corrupted copy per (sigma, run)."""
    for sid, seq in dataset.items():
        _require_labels(seq)
    out = [SweepVariant("P1", None, None, None, sequences=dict(dataset))]
    for si, sigma in enumerate(config.sigmas):
        for run in range(config.runs):
            seqs, seeds = {}, {}
            for sid, seq in dataset.items():
                seqs[sid], seeds[sid] = protocol1_task(seq, sid, si, sigma, run, config.base_seed)
            out.append(SweepVariant("P1", si, sigma, run, sequences=seqs, seeds=seeds))
    return out


def protocol2_task(seq: PoseSequence2D, sequence_id: str, sigma_index: int, sigma: float, run: int,
                   joint: str, config: ProtocolConfig):
    if seq.num_frames < config.segment:
        raise ValueError(f"{sequence_id}: {seq.num_frames} frames, protocol 2 needs {config.segment}")
    seg = truncate(seq, config.segment)
    j = seg.joint_index(joint)
    seed = task_seed(config.base_seed, "P2", sigma_index, run, sequence_id, j)
    return protocol2_perjoint(seg, j, NoiseSpec(sigma, seed, run), config.window), seed


def protocol2_sweep(dataset: Mapping[str, PoseSequence2D], config: ProtocolConfig) -> Iterator[SweepVariant]:
    """Baseline (first ``segment`` frames) plus one copy per (sigma, run, joint)."""
    yield SweepVariant("P2", None, None, None, sequences={k: truncate(s, config.segment) for k, s in dataset.items()})
    for si, sigma in enumerate(config.sigmas):
        for run in range(config.runs):
            for joint in p2_joints(config, next(iter(dataset.values())) if dataset else None):
                seqs, seeds = {}, {}
                for sid, seq in dataset.items():
                    seqs[sid], seeds[sid] = protocol2_task(seq, sid, si, sigma, run, joint, config)
                yield SweepVariant("P2", si, sigma, run, joint, seqs, seeds)


def p2_joints(config: ProtocolConfig, seq=None) -> tuple[str, ...]:
    if config.joints is not None:
        return tuple(config.joints)
    return tuple(seq.joints) if seq is not None else H36M17.joints


def truncate(seq, n_frames: int):
    if seq.num_frames <= n_frames:
        return seq
    return seq.replace(
        coords=seq.coords[:n_frames],
        occlusion=None if seq.occlusion is None else OcclusionTrack(seq.occlusion.labels[:n_frames]),
        confidence=None if seq.confidence is None else seq.confidence[:n_frames],
    )


# --- preprocessing used by occlusion-aware lifters ------------------------

@dataclass(frozen=True)
class MaskSpec:
    mode: str = "None"  # None | RandK | FromLabels
    k: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("None", "RandK", "FromLabels"):
            raise ValueError(f"unknown mask mode {self.mode!r}")


def apply_mask(seq: PoseSequence2D, mask: MaskSpec) -> tuple[PoseSequence2D, np.ndarray]:
    """Zero the masked joints and return the boolean guidance matrix (True = masked)."""
    n_f, n_j = seq.coords.shape[:2]
    if mask.mode == "RandK":
        if not 0 <= mask.k <= n_j:
            raise ValueError(f"k={mask.k} outside [0, {n_j}]")
        key = derive_seed(mask.seed, _MASK_STREAM)
        # Ranking i.i.d. uniforms gives a uniform random k-subset per frame.
        u = uniform(key, np.arange(n_f * n_j)).reshape(n_f, n_j)
        order = np.argsort(u, axis=1, kind="stable")
        guide = np.zeros((n_f, n_j), dtype=bool)
        np.put_along_axis(guide, order[:, : mask.k], True, axis=1)
    elif mask.mode == "FromLabels":
        guide = _require_labels(seq).copy()
    else:
        guide = np.zeros((n_f, n_j), dtype=bool)
    if not guide.any():
        return seq, guide
    coords = np.where(guide[..., None], 0.0, seq.coords)
    return seq.replace(coords=coords), guide


def interpolate_occluded(seq: PoseSequence2D, labels: OcclusionTrack | np.ndarray | None = None,
                         halfwindow: int = 40) -> tuple[PoseSequence2D, np.ndarray]:
    """Fill occluded keypoints from the nearest visible frame within ``halfwindow``.

    Ties go to the earlier frame. Keypoints with no visible instance in reach
    become (0, 0) with confidence 0. Filled entries get confidence
    ``1 - d / (halfwindow + 1)`` where ``d`` is the frame distance.
    """
    if labels is None:
        occ = _require_labels(seq)
    else:
        occ = labels.occluded if isinstance(labels, OcclusionTrack) else np.asarray(labels) != 0
    n_f, n_j = seq.coords.shape[:2]
    if occ.shape != (n_f, n_j):
        raise ValueError(f"labels shape {occ.shape} does not match {(n_f, n_j)}")
    vis = ~occ
    f = np.arange(n_f)[:, None]
    prev = np.maximum.accumulate(np.where(vis, f, -1), axis=0)
    nxt = np.minimum.accumulate(np.where(vis, f, n_f)[::-1], axis=0)[::-1]
    d_prev = np.where(prev >= 0, f - prev, np.iinfo(np.int64).max)
    d_next = np.where(nxt < n_f, nxt - f, np.iinfo(np.int64).max)
    use_prev = d_prev <= d_next
    dist = np.where(use_prev, d_prev, d_next)
    src = np.where(use_prev, prev, nxt)
    reach = occ & (dist <= halfwindow)

    cols = np.broadcast_to(np.arange(n_j), (n_f, n_j))
    filled = np.where(vis[..., None], seq.coords, 0.0)
    filled[reach] = seq.coords[src[reach], cols[reach]]
    conf = np.where(vis, 1.0, 0.0)
    conf[reach] = 1.0 - dist[reach] / (halfwindow + 1)
    return seq.replace(coords=filled, confidence=conf), conf


def aggregate_hypotheses(pred: PoseSequence3D) -> PoseSequence3D:
    """Average multiple 3D hypotheses per frame into one pose."""
    if pred.coords.ndim == 3:
        return pred
    if pred.coords.shape[1] == 0:
        raise ValueError("no hypotheses to aggregate")
    return pred.replace(coords=pred.coords.mean(axis=1))
