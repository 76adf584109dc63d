"""Run configuration: one JSON document, validated, with CLI overrides on top."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import jsonschema

from occlubench.metrics import SLICES
from occlubench.occlusion import ProtocolConfig
from occlubench.skeleton import H36M17

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "occlubench run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "protocol": {"enum": ["p1", "p2", "P1", "P2"]},
        "sigmas": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "runs": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "window": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "segment": {"type": "integer", "minimum": 1},
        "joints": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
        "jobs": {"type": ["integer", "null"], "minimum": 1},
        "exclude_joints": {"type": "array", "items": {"type": "string"}},
        "slices": {"type": "array", "items": {"enum": list(SLICES)}, "minItems": 1, "uniqueItems": True},
        "allow_partial": {"type": "boolean"},
    },
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    protocol: str = "p1"
    sigmas: tuple[float, ...] | None = None
    runs: int | None = None
    seed: int = 0
    window: tuple[int, int] = (50, 150)
    segment: int = 243
    joints: tuple[str, ...] | None = None
    jobs: int | None = None
    exclude_joints: tuple[str, ...] = ("Hip",)
    slices: tuple[str, ...] = SLICES
    allow_partial: bool = False

    def protocol_config(self) -> ProtocolConfig:
        try:
            return ProtocolConfig(self.protocol, self.sigmas, self.runs, self.window, self.segment, self.joints, self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def workers(self) -> int:
        return self.jobs or os.cpu_count() or 1

    def resolved(self) -> dict:
        """Canonical, fully-defaulted form used in manifests and digests. ``jobs`` is left out."""
        pc = self.protocol_config()
        d = asdict(self)
        d.pop("jobs")
        d.update(protocol=pc.protocol.lower(), sigmas=list(pc.sigmas), runs=pc.runs,
                 window=list(pc.window), joints=list(pc.joints) if pc.joints else None,
                 exclude_joints=list(self.exclude_joints), slices=list(self.slices))
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.resolved(), sort_keys=True).encode()).hexdigest()


def _normalize_joint_names(names) -> tuple[str, ...]:
    out = []
    for n in names:
        try:
            out.append(H36M17.joints[H36M17.index(n)])
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    return tuple(out)


def build_config(path=None, **overrides) -> RunConfig:
    """Load ``path`` (if given), then apply non-None ``overrides``."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    data.update({k: v for k, v in overrides.items() if v is not None})
    if "exclude_joints" in data:
        data["exclude_joints"] = [] if data["exclude_joints"] in ([], ["none"]) else list(data["exclude_joints"])
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {loc}: {exc.message}") from None
    names = {f.name for f in fields(RunConfig)}
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items() if k in names}
    if "protocol" in kwargs:
        kwargs["protocol"] = kwargs["protocol"].lower()
    if kwargs.get("joints") is not None:
        kwargs["joints"] = _normalize_joint_names(kwargs["joints"])
    if "exclude_joints" in kwargs:
        kwargs["exclude_joints"] = _normalize_joint_names(kwargs["exclude_joints"])
    cfg = replace(RunConfig(), **kwargs)
    cfg.protocol_config()
    return cfg
