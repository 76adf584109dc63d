"""``.poseq`` container files and joint-layout adapters.

A ``.poseq`` file is plain text. Line 1 is a JSON header object, every
following line is one frame::

    {"schema": "H36M17", "units": "px", "width": 1000, "height": 1002, ...}
    0,512.000000,300.250000,...|01200000000000000|1.000000,0.500000,...
    1,...

Coordinates are written with 6 fractional digits; a MISSING joint is an
empty field. The occlusion section is one digit per joint and the
confidence section one value per joint; either may be empty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from occlubench.core import CameraModel, OcclusionTrack, PoseSequence2D, PoseSequence3D
from occlubench.skeleton import BM3D, COCO17, H36M17, SCHEMAS, get_schema

HEADER_KEYS = ("schema", "units", "width", "height", "fps", "subject", "action", "camera")


class ContainerFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.field = field


class MappingError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


@dataclass(eq=False)
class SequenceContainer:
    """A pose sequence plus the metadata stored in a ``.poseq`` header.

    ``extra`` carries any additional header keys (``sigma``, ``run``,
    ``protocol``, ``seed``, ``camera_id`` ...) and is preserved on round-trip.
    """

    sequence: PoseSequence2D | PoseSequence3D
    subject: str = ""
    action: str = ""
    camera: CameraModel | None = None
    extra: dict = field(default_factory=dict)

    @property
    def units(self) -> str:
        return "px" if isinstance(self.sequence, PoseSequence2D) else "mm"

    @property
    def camera_id(self) -> str:
        return str(self.extra.get("camera_id", ""))

    @property
    def sequence_id(self) -> str:
        return f"{self.subject}/{self.action}/{self.camera_id}"

    def header(self) -> dict:
        seq = self.sequence
        if isinstance(seq, PoseSequence2D):
            width, height = seq.width, seq.height
        elif self.camera is not None:
            width, height = self.camera.resolution
        else:
            width = height = None
        head = {
            "schema": seq.schema,
            "units": self.units,
            "width": _num(width),
            "height": _num(height),
            "fps": _num(seq.fps),
            "subject": self.subject,
            "action": self.action,
        }
        if self.camera is not None:
            head["camera"] = self.camera.to_dict()
        extra = dict(self.extra)
        if isinstance(seq, PoseSequence3D) and seq.num_hypotheses is not None:
            extra["hypotheses"] = seq.num_hypotheses
        if tuple(seq.joints) != get_schema(seq.schema).joints:
            extra["joints"] = list(seq.joints)
        for key in sorted(extra):
            if key in HEADER_KEYS:
                raise ContainerFormatError(f"extra key {key!r} shadows a header key")
            head[key] = extra[key]
        return head

    def __eq__(self, other):
        if not isinstance(other, SequenceContainer):
            return NotImplemented
        return (
            self.sequence == other.sequence
            and (self.subject, self.action, self.extra) == (other.subject, other.action, other.extra)
            and self.camera == other.camera
        )


def _num(v):
    if v is None:
        return None
    f = float(v)
    return int(f) if f.is_integer() else f


def _fmt(v: float) -> str:
    return "" if np.isnan(v) else f"{v:.6f}"


def format_container(container: SequenceContainer) -> str:
    seq = container.sequence
    lines = [json.dumps(container.header())]
    flat = seq.coords.reshape(seq.num_frames, -1)
    labels = seq.occlusion.labels if seq.occlusion is not None else None
    conf = seq.confidence
    for i in range(seq.num_frames):
        row = str(i) + "," + ",".join(_fmt(v) for v in flat[i])
        if labels is not None or conf is not None:
            row += "|"
            if labels is not None:
                row += "".join(str(int(v)) for v in labels[i])
        if conf is not None:
            row += "|" + ",".join(_fmt(v) for v in conf[i])
        lines.append(row)
    return "\n".join(lines) + "\n"


def write_container(container: SequenceContainer, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_container(container))


def _parse_float(text: str, line: int, fld: str) -> float:
    if text == "":
        return np.nan
    try:
        return float(text)
    except ValueError:
        raise ContainerFormatError(f"not a number: {text!r}", line, fld) from None


def parse_container(text: str, source: str = "<string>") -> SequenceContainer:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ContainerFormatError(f"{source} is empty", 1)
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ContainerFormatError(f"header is not valid JSON ({exc.msg})", 1) from None
    if not isinstance(head, dict):
        raise ContainerFormatError("header must be a JSON object", 1)
    for key in ("schema", "units"):
        if key not in head:
            raise ContainerFormatError("missing header key", 1, key)
    if head["schema"] not in SCHEMAS:
        raise ContainerFormatError(f"unknown schema tag {head['schema']!r}", 1, "schema")
    units = head["units"]
    if units not in ("px", "mm"):
        raise ContainerFormatError(f"units must be 'px' or 'mm', got {units!r}", 1, "units")
    dims = 2 if units == "px" else 3
    schema = get_schema(head["schema"])
    extra = {k: v for k, v in head.items() if k not in HEADER_KEYS}
    joints = tuple(extra.pop("joints", schema.joints))
    hyp = extra.pop("hypotheses", None)
    if hyp is not None and dims != 3:
        raise ContainerFormatError("hypotheses require 3D (mm) data", 1, "hypotheses")
    n_j = len(joints)
    n_vals = n_j * dims * (hyp or 1)

    camera = None
    if head.get("camera") is not None:
        cam = head["camera"]
        try:
            res = (head["width"], head["height"]) if head.get("width") is not None else (1000.0, 1000.0)
            camera = CameraModel(cam["fx"], cam["fy"], cam["cx"], cam["cy"], np.reshape(cam["R"], (3, 3)), cam["t"], res)
        except (KeyError, ValueError, TypeError) as exc:
            raise ContainerFormatError(f"invalid camera: {exc}", 1, "camera") from None

    frames, labels, conf = [], [], []
    for ln, row in enumerate(lines[1:], start=2):
        parts = row.split("|")
        if len(parts) > 3:
            raise ContainerFormatError("too many '|' sections", ln)
        fields = parts[0].split(",")
        try:
            idx = int(fields[0])
        except ValueError:
            raise ContainerFormatError(f"bad frame index {fields[0]!r}", ln, "frame") from None
        if idx != ln - 2:
            raise ContainerFormatError(f"frame index {idx} out of order (expected {ln - 2})", ln, "frame")
        if len(fields) - 1 != n_vals:
            raise ContainerFormatError(
                f"shape mismatch in frame row {idx}: {len(fields) - 1} values, expected {n_vals} "
                f"({n_j} joints x {dims})", ln, "coords")
        frames.append([_parse_float(t, ln, f"coords[{k}]") for k, t in enumerate(fields[1:])])
        occ_text = parts[1] if len(parts) > 1 else ""
        if occ_text:
            digits = occ_text.split(",") if "," in occ_text else list(occ_text)
            if len(digits) != n_j or not all(d in ("0", "1", "2") for d in digits):
                raise ContainerFormatError(f"occlusion section must be {n_j} digits in 0..2", ln, "occlusion")
            labels.append([int(d) for d in digits])
        if len(parts) > 2:
            cvals = parts[2].split(",")
            if len(cvals) != n_j:
                raise ContainerFormatError(f"confidence section has {len(cvals)} values, expected {n_j}", ln, "confidence")
            conf.append([_parse_float(t, ln, "confidence") for t in cvals])
    n_f = len(frames)
    if labels and len(labels) != n_f:
        raise ContainerFormatError("occlusion section present on some frames only", None, "occlusion")
    if conf and len(conf) != n_f:
        raise ContainerFormatError("confidence section present on some frames only", None, "confidence")

    shape = (n_f, hyp, n_j, dims) if hyp else (n_f, n_j, dims)
    coords = np.array(frames, dtype=float).reshape(shape)
    col_nan = np.isnan(coords).all(axis=tuple(a for a in range(coords.ndim) if a != coords.ndim - 2)) if n_f else np.zeros(n_j, bool)
    missing = frozenset(joints[j] for j in np.nonzero(col_nan)[0]) if n_f else frozenset()
    common = dict(
        coords=coords,
        occlusion=OcclusionTrack(np.array(labels, dtype=np.int8).reshape(n_f, n_j)) if labels else None,
        confidence=np.array(conf, dtype=float).reshape(n_f, n_j) if conf else None,
        schema=schema.tag,
        joints=joints,
        missing=missing,
        fps=head.get("fps"),
    )
    if dims == 2:
        for key in ("width", "height"):
            if not isinstance(head.get(key), (int, float)) or head[key] <= 0:
                raise ContainerFormatError("2D containers need a positive resolution", 1, key)
        seq = PoseSequence2D(width=head["width"], height=head["height"], **common)
    else:
        seq = PoseSequence3D(**common)
    return SequenceContainer(seq, str(head.get("subject", "")), str(head.get("action", "")), camera, extra)


def read_container(path) -> SequenceContainer:
    path = Path(path)
    return parse_container(path.read_text(encoding="utf-8"), str(path))


# --- joint mappings -------------------------------------------------------

MISSING = None


@dataclass(frozen=True)
class JointMapping:
    """For every target joint, the source joint index it copies (or ``MISSING``)."""

    source: str
    target: str
    indices: tuple[int | None, ...]

    def __post_init__(self):
        src, tgt = get_schema(self.source), get_schema(self.target)
        if len(self.indices) != tgt.num_joints:
            raise MappingError(f"mapping needs {tgt.num_joints} entries, got {len(self.indices)}")
        for i in self.indices:
            if i is not None and not 0 <= i < src.num_joints:
                raise MappingError(f"source index {i} out of bounds for {self.source}")

    @classmethod
    def by_name(cls, source: str, target: str, pairs: dict[str, str]) -> "JointMapping":
        """Build from ``{target_name: source_name}``; unlisted targets are MISSING."""
        src, tgt = get_schema(source), get_schema(target)
        indices = tuple(src.joints.index(pairs[name]) if name in pairs else MISSING for name in tgt.joints)
        return cls(source, target, indices)

    @property
    def missing(self) -> tuple[str, ...]:
        tgt = get_schema(self.target)
        return tuple(name for name, i in zip(tgt.joints, self.indices) if i is None)

    def inverse(self) -> "JointMapping":
        src = get_schema(self.source)
        back: list[int | None] = [MISSING] * src.num_joints
        for t, s in enumerate(self.indices):
            if s is not None:
                back[s] = t
        return JointMapping(self.target, self.source, tuple(back))


_COCO_TO_H36M = {
    "LShoulder": "LShoulder", "RShoulder": "RShoulder",
    "LElbow": "LElbow", "RElbow": "RElbow",
    "LWrist": "LWrist", "RWrist": "RWrist",
    "LHip": "LHip", "RHip": "RHip",
    "LKnee": "LKnee", "RKnee": "RKnee",
    "LFoot": "LAnkle", "RFoot": "RAnkle",
}

_BM3D_TO_H36M = {
    "Hip": "pelvis", "Spine": "spine", "Thorax": "thorax", "Neck": "neck", "Head": "head",
    "LHip": "l_hip", "LKnee": "l_knee", "LFoot": "l_foot",
    "RHip": "r_hip", "RKnee": "r_knee", "RFoot": "r_foot",
    "LShoulder": "l_shoulder", "LElbow": "l_elbow", "LWrist": "l_wrist",
    "RShoulder": "r_shoulder", "RElbow": "r_elbow", "RWrist": "r_wrist",
}

MAPPINGS: dict[str, JointMapping] = {
    "h36m-identity": JointMapping(H36M17.tag, H36M17.tag, tuple(range(17))),
    "bm3d-to-h36m": JointMapping.by_name(BM3D.tag, H36M17.tag, _BM3D_TO_H36M),
    "coco-to-h36m": JointMapping.by_name(COCO17.tag, H36M17.tag, _COCO_TO_H36M),
}
MAPPINGS["h36m-to-bm3d"] = MAPPINGS["bm3d-to-h36m"].inverse()
MAPPINGS["h36m-to-coco"] = MAPPINGS["coco-to-h36m"].inverse()


def get_mapping(mapping_id: str) -> JointMapping:
    try:
        return MAPPINGS[mapping_id]
    except KeyError:
        raise MappingError(f"unknown mapping id {mapping_id!r}; expected one of {sorted(MAPPINGS)}") from None


def default_mapping(source: str, target: str) -> JointMapping | None:
    for m in MAPPINGS.values():
        if m.source == source and m.target == target:
            return m
    return None


def map_skeleton(seq, mapping: JointMapping):
    """Re-express ``seq`` in the mapping's target layout.

    MISSING targets get NaN coordinates, label Visible, confidence 0 and are
    listed in ``seq.missing``.
    """
    src = get_schema(mapping.source)
    if seq.schema != mapping.source or tuple(seq.joints) != src.joints:
        raise MappingError(f"sequence layout {seq.schema} does not match mapping source {mapping.source}")
    tgt = get_schema(mapping.target)
    take = np.array([i if i is not None else 0 for i in mapping.indices])
    present = np.array([i is not None for i in mapping.indices])
    coords = np.array(seq.coords[..., take, :])
    coords[..., ~present, :] = np.nan
    occlusion = None
    if seq.occlusion is not None:
        labels = np.array(seq.occlusion.labels[:, take])
        labels[:, ~present] = 0
        occlusion = OcclusionTrack(labels)
    confidence = None
    if seq.confidence is not None:
        confidence = np.array(seq.confidence[:, take])
        confidence[:, ~present] = 0.0
    missing = {tgt.joints[t] for t, s in enumerate(mapping.indices) if s is None or src.joints[s] in seq.missing}
    return seq.replace(
        coords=coords, occlusion=occlusion, confidence=confidence,
        schema=tgt.tag, joints=tgt.joints, missing=frozenset(missing),
    )


def restrict_joints(seq, joints):
    """Keep only ``joints`` (names), in the given order."""
    idx = [seq.joints.index(j) for j in joints]
    return seq.replace(
        coords=seq.coords[..., idx, :],
        occlusion=None if seq.occlusion is None else OcclusionTrack(seq.occlusion.labels[:, idx]),
        confidence=None if seq.confidence is None else seq.confidence[:, idx],
        joints=tuple(joints),
        missing=frozenset(j for j in seq.missing if j in joints),
    )


class Alignment(NamedTuple):
    pred: object
    gt: object
    joints: tuple[str, ...]


def align_for_scoring(pred, gt, mapping: JointMapping | None = None) -> Alignment:
    """Bring ``pred`` and ``gt`` into one layout and keep only joints present in both.

    When the layouts differ, the side whose schema is the mapping source is
    mapped (by default into H36M17), so the retained set does not depend on
    argument order.
    """
    if pred.num_frames != gt.num_frames:
        raise AlignmentError(f"frame counts differ: {pred.num_frames} vs {gt.num_frames}")
    if mapping is None and pred.schema != gt.schema:
        mapping = default_mapping(pred.schema, gt.schema) if gt.schema == H36M17.tag else None
        mapping = mapping or default_mapping(gt.schema, pred.schema)
        if mapping is None:
            raise AlignmentError(f"no mapping between {pred.schema} and {gt.schema}")
    if mapping is not None:
        if pred.schema == mapping.source and pred.schema != mapping.target:
            pred = map_skeleton(pred, mapping)
        if gt.schema == mapping.source and gt.schema != mapping.target:
            gt = map_skeleton(gt, mapping)
    if pred.schema != gt.schema:
        raise AlignmentError(f"mapping {mapping.source}->{mapping.target} does not reconcile {pred.schema} and {gt.schema}")
    order = get_schema(gt.schema).joints
    common = tuple(
        j for j in order
        if j in pred.joints and j in gt.joints and j not in pred.missing and j not in gt.missing
    )
    if not common:
        raise AlignmentError("prediction and ground truth share no joints")
    return Alignment(restrict_joints(pred, common), restrict_joints(gt, common), common)
