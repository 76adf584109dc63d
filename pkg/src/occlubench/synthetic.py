"""Procedural test dataset: a walking skeleton seen by several cameras, with
random occlusion streaks. Used by the test-suite and for trying the CLI."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from occlubench.core import CameraModel, OcclusionTrack, PoseSequence2D, PoseSequence3D, Visibility, project
from occlubench.io import SequenceContainer, write_container

# Body frame: +x subject's right, +y forward, +z up (mm).
REST_POSE = np.array([
    [0, 0, 1000],      # Hip
    [130, 0, 1000],    # RHip
    [130, 0, 550],     # RKnee
    [130, 0, 100],     # RFoot
    [-130, 0, 1000],   # LHip
    [-130, 0, 550],    # LKnee
    [-130, 0, 100],    # LFoot
    [0, 0, 1250],      # Spine
    [0, 0, 1500],      # Thorax
    [0, 30, 1600],     # Neck
    [0, 20, 1720],     # Head
    [-180, 0, 1480],   # LShoulder
    [-200, 0, 1200],   # LElbow
    [-210, 0, 950],    # LWrist
    [180, 0, 1480],    # RShoulder
    [200, 0, 1200],    # RElbow
    [210, 0, 950],     # RWrist
], dtype=float)


def rot_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def look_at_camera(position, target, f: float = 1000.0, resolution=(1000.0, 1002.0)) -> CameraModel:
    """Camera at ``position`` (mm, z-up world) looking at ``target``, image y pointing down."""
    c = np.asarray(position, dtype=float)
    fwd = np.asarray(target, dtype=float) - c
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, [0.0, 0.0, 1.0])
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd])
    return CameraModel(f, f, resolution[0] / 2, resolution[1] / 2, R, -R @ c, resolution)


def walking_sequence(n_frames: int, rng: np.random.Generator) -> np.ndarray:
    """World-space joints ``(n_frames, 17, 3)`` for a subject walking on a curve."""
    t = np.arange(n_frames) / 50.0
    freq = rng.uniform(0.6, 1.2)
    phase = 2 * np.pi * freq * t
    heading = rng.uniform(0, 2 * np.pi) + rng.uniform(-0.6, 0.6) * t
    swing = np.sin(phase)
    out = np.empty((n_frames, 17, 3))
    pos = np.zeros(3)
    for i in range(n_frames):
        body = REST_POSE.copy()
        # legs and arms swing along the forward axis in opposite phase
        body[[2, 3], 1] += 250 * swing[i] * np.array([0.5, 1.0])
        body[[5, 6], 1] -= 250 * swing[i] * np.array([0.5, 1.0])
        body[[12, 13], 1] += 200 * swing[i] * np.array([0.5, 1.0])
        body[[15, 16], 1] -= 200 * swing[i] * np.array([0.5, 1.0])
        body[:, 2] += 20 * np.cos(2 * phase[i])
        R = rot_z(heading[i])
        if i:
            pos = pos + R @ np.array([0.0, 12.0, 0.0])
            pos[:2] = np.clip(pos[:2], -1200, 1200)
        out[i] = body @ R.T + pos
    return out


def occlusion_labels(n_frames: int, n_joints: int, rng: np.random.Generator,
                     p_start: float = 0.02, mean_length: float = 30.0) -> np.ndarray:
    """Markov-chain occlusion streaks with random self/external categories."""
    labels = np.zeros((n_frames, n_joints), dtype=np.int8)
    for j in range(n_joints):
        f = 0
        while f < n_frames:
            if rng.random() < p_start:
                length = max(1, int(rng.exponential(mean_length)))
                cat = rng.choice([Visibility.SelfOccluded, Visibility.ExternallyOccluded])
                labels[f : f + length, j] = cat
                f += length
            f += 1
    return labels


def make_dataset(root, n_actions: int = 3, n_cameras: int = 2, n_frames: int = 300, seed: int = 0,
                 subject: str = "S2") -> tuple[Path, Path]:
    """Write ``root/2d/*.poseq`` (pixels + labels) and ``root/3d/*.poseq`` (camera-space mm + camera + labels)."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    cams = []
    for c in range(n_cameras):
        ang = 2 * np.pi * c / max(n_cameras, 1) + 0.3
        radius = rng.uniform(3500, 6000)
        cams.append(look_at_camera([radius * np.cos(ang), radius * np.sin(ang), 1500.0], [0.0, 0.0, 1000.0]))
    for a in range(n_actions):
        action = f"Action{a:02d}"
        world = walking_sequence(n_frames, rng)
        for c, cam in enumerate(cams):
            labels = OcclusionTrack(occlusion_labels(n_frames, 17, rng))
            cam_coords = cam.world_to_camera(world)
            seq3d = PoseSequence3D(np.round(cam_coords, 6), occlusion=labels, fps=50)
            uv = np.round(project(cam_coords, cam, space="camera"), 6)
            seq2d = PoseSequence2D(uv, occlusion=labels, fps=50, width=cam.resolution[0], height=cam.resolution[1])
            stem = f"{subject}_{action}_cam{c}"
            extra = {"camera_id": str(c)}
            write_container(SequenceContainer(seq2d, subject, action, cam, extra), root / "2d" / f"{stem}.poseq")
            write_container(SequenceContainer(seq3d, subject, action, cam, extra), root / "3d" / f"{stem}.poseq")
    return root / "2d", root / "3d"
