"""Joint definitions and skeleton layouts.

The canonical layout is the 17-joint Human3.6M convention. Every other
layout (BlendMimic3D export order, COCO-17) is mapped into it through the
tables in :mod:`occlubench.io`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class JointId(IntEnum):
    """Canonical joint index. Slot 9 is ``Neck``; some H36M tooling calls it ``Nose``."""

    Hip = 0
    RHip = 1
    RKnee = 2
    RFoot = 3
    LHip = 4
    LKnee = 5
    LFoot = 6
    Spine = 7
    Thorax = 8
    Neck = 9
    Head = 10
    LShoulder = 11
    LElbow = 12
    LWrist = 13
    RShoulder = 14
    RElbow = 15
    RWrist = 16


NUM_JOINTS = 17

# Accepted alternative spellings when resolving joint names.
JOINT_ALIASES = {
    "nose": "Neck",
    "pelvis": "Hip",
    "root": "Hip",
    "lankle": "LFoot",
    "rankle": "RFoot",
}


@dataclass(frozen=True)
class SkeletonSchema:
    tag: str
    joints: tuple[str, ...]
    parents: tuple[int, ...]

    def __post_init__(self):
        if len(self.joints) != len(self.parents):
            raise ValueError(f"{self.tag}: {len(self.joints)} joints but {len(self.parents)} parents")
        if len(set(self.joints)) != len(self.joints):
            raise ValueError(f"{self.tag}: duplicate joint names")
        roots = [i for i, p in enumerate(self.parents) if p < 0]
        if len(roots) != 1:
            raise ValueError(f"{self.tag}: expected exactly one root, got {roots}")
        for start in range(len(self.joints)):
            seen = set()
            j = start
            while j >= 0:
                if j in seen or j >= len(self.joints):
                    raise ValueError(f"{self.tag}: parent chain from joint {start} is not a tree")
                seen.add(j)
                j = self.parents[j]

    @property
    def num_joints(self) -> int:
        return len(self.joints)

    @property
    def root(self) -> str:
        return self.joints[self.parents.index(-1)]

    def index(self, joint: int | str) -> int:
        """Resolve a joint given by index, canonical name or alias."""
        if isinstance(joint, (int,)) and not isinstance(joint, bool):
            if not 0 <= int(joint) < self.num_joints:
                raise IndexError(f"joint index {int(joint)} out of range for {self.tag} ({self.num_joints} joints)")
            return int(joint)
        name = str(joint)
        if name in self.joints:
            return self.joints.index(name)
        lowered = {n.lower(): i for i, n in enumerate(self.joints)}
        key = name.lower()
        if key in lowered:
            return lowered[key]
        alias = JOINT_ALIASES.get(key)
        if alias is not None and alias in self.joints:
            return self.joints.index(alias)
        raise KeyError(f"unknown joint {name!r} for schema {self.tag}")


H36M17 = SkeletonSchema(
    tag="H36M17",
    joints=tuple(j.name for j in JointId),
    parents=(-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15),
)

# Joint order of the BlendMimic3D export after the H36M-style adaptation:
# trunk first, then left and right limbs.
BM3D = SkeletonSchema(
    tag="BM3D",
    joints=(
        "pelvis", "spine", "thorax", "neck", "head",
        "l_hip", "l_knee", "l_foot",
        "r_hip", "r_knee", "r_foot",
        "l_shoulder", "l_elbow", "l_wrist",
        "r_shoulder", "r_elbow", "r_wrist",
    ),
    parents=(-1, 0, 1, 2, 3, 0, 5, 6, 0, 8, 9, 2, 11, 12, 2, 14, 15),
)

COCO17 = SkeletonSchema(
    tag="COCO17",
    joints=(
        "Nose", "LEye", "REye", "LEar", "REar",
        "LShoulder", "RShoulder", "LElbow", "RElbow", "LWrist", "RWrist",
        "LHip", "RHip", "LKnee", "RKnee", "LAnkle", "RAnkle",
    ),
    parents=(-1, 0, 0, 1, 2, 0, 0, 5, 6, 7, 8, 5, 6, 11, 12, 13, 14),
)

SCHEMAS = {s.tag: s for s in (H36M17, BM3D, COCO17)}


def get_schema(tag: str) -> SkeletonSchema:
    try:
        return SCHEMAS[tag]
    except KeyError:
        raise KeyError(f"unknown schema tag {tag!r}; expected one of {sorted(SCHEMAS)}") from None
