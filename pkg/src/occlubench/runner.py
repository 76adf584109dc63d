"""Command implementations: convert, corrupt, evaluate, analyze.

This is the only module with side effects. Work is split into pure tasks
that are mapped over a process pool (or run inline for ``jobs == 1``) and
merged in a fixed order, so outputs do not depend on the degree of
parallelism.

Output layout::

    <out>/corrupted/<protocol>/<sigma>/<run>/[<joint>/]<stem>.poseq
    <out>/manifest.json
    <out>/reports/*.csv
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from occlubench import __version__
from occlubench.config import RunConfig
from occlubench.core import PoseSequence2D, PoseSequence3D, project
from occlubench.geometry import HeatmapGrid, bin_velocity, frame_geometry, keypoint_speeds
from occlubench.io import (
    AlignmentError, ContainerFormatError, MappingError, SequenceContainer, align_for_scoring,
    format_container, get_mapping, map_skeleton, read_container, write_container,
)
from occlubench.lifters import BASELINE_IDS, run_baseline
from occlubench.metrics import (
    SLICES, aggregate_runs, detector_error_stats, joint_errors, occluded_count_histogram,
    occlusion_duration_stats, occlusion_rate_per_joint, selection_mask,
)
from occlubench.skeleton import H36M17
from occlubench.occlusion import aggregate_hypotheses, protocol1_task, protocol2_task, truncate

log = logging.getLogger(__name__)

GT_KEY = "gt"


class UsageError(Exception):
    """Bad command line or configuration (exit code 2)."""


class DataError(Exception):
    """Input data could not be processed (exit code 1)."""


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sigma_key(sigma: float | None) -> str:
    return GT_KEY if sigma is None else format(sigma, "g")


def _fmt_mm(v) -> str:
    return "ABSENT" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.4f}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _pmap(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _read(path) -> SequenceContainer:
    try:
        return read_container(path)
    except ContainerFormatError as exc:
        raise DataError(f"{path}: {exc}") from None
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from None


def _list_poseq(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"not a directory: {d}")
    return sorted(d.glob("*.poseq"))


# --- convert --------------------------------------------------------------

def cmd_convert(input_path, mapping_id: str, output_path) -> Path:
    try:
        mapping = get_mapping(mapping_id)
    except MappingError as exc:
        raise UsageError(str(exc)) from None
    container = _read(input_path)
    try:
        seq = map_skeleton(container.sequence, mapping)
    except MappingError as exc:
        raise DataError(f"{input_path}: {exc}") from None
    container.sequence = seq
    write_container(container, output_path)
    return Path(output_path)


# --- corrupt --------------------------------------------------------------

@dataclass(frozen=True)
class CorruptTask:
    protocol: str
    stem: str
    source: str
    sigma_index: int | None
    sigma: float | None
    run: int
    joint: str | None
    out_root: str

    @property
    def relpath(self) -> str:
        parts = ["corrupted", self.protocol.lower(), sigma_key(self.sigma), str(self.run)]
        if self.joint is not None:
            parts.append(self.joint)
        return "/".join(parts + [f"{self.stem}.poseq"])


def _run_corrupt_task(args) -> dict:
    task, cfg = args
    container = read_container(task.source)
    seq = container.sequence
    pc = cfg.protocol_config()
    extra = dict(container.extra)
    extra.update(protocol=task.protocol.lower(), sigma=task.sigma, run=task.run)
    if task.protocol == "P1":
        if task.sigma is None:
            out, seed = seq, None
        else:
            out, seed = protocol1_task(seq, task.stem, task.sigma_index, task.sigma, task.run, pc.base_seed)
    else:
        extra.update(window=list(pc.window))
        if task.sigma is None:
            out, seed = truncate(seq, pc.segment), None
        else:
            out, seed = protocol2_task(seq, task.stem, task.sigma_index, task.sigma, task.run, task.joint, pc)
            extra.update(joint=task.joint)
    extra["seed"] = seed
    container = SequenceContainer(out, container.subject, container.action, container.camera, extra)
    text = format_container(container)
    path = Path(task.out_root) / task.relpath
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return {"id": task.relpath[len("corrupted/"):-len(".poseq")], "output": task.relpath, "seed": seed,
            "digest": hashlib.sha256(text.encode()).hexdigest()}


def cmd_corrupt(dataset_dir, cfg: RunConfig, out_dir) -> dict:
    """Write corrupted variants of every 2D sequence in ``dataset_dir``."""
    pc = cfg.protocol_config()
    out = Path(out_dir)
    files = _list_poseq(dataset_dir)
    if not files:
        raise DataError(f"no .poseq files in {dataset_dir}")
    inputs, layouts = {}, {}
    for path in files:
        c = _read(path)
        seq = c.sequence
        if not isinstance(seq, PoseSequence2D):
            raise DataError(f"{path}: corruption needs 2D (px) sequences")
        if pc.protocol == "P1" and seq.occlusion is None:
            raise DataError(f"{path}: protocol 1 needs occlusion labels")
        if pc.protocol == "P2" and seq.num_frames < pc.segment:
            raise DataError(f"{path}: protocol 2 needs at least {pc.segment} frames, got {seq.num_frames}")
        inputs[path.stem] = sha256_file(path)
        layouts[path.stem] = seq.joints

    tasks = []
    for path in files:
        common = dict(protocol=pc.protocol, stem=path.stem, source=str(path), out_root=str(out))
        tasks.append(CorruptTask(sigma_index=None, sigma=None, run=0, joint=None, **common))
        for si, sigma in enumerate(pc.sigmas):
            for run in range(pc.runs):
                if pc.protocol == "P1":
                    tasks.append(CorruptTask(sigma_index=si, sigma=sigma, run=run, joint=None, **common))
                else:
                    for joint in pc.joints or layouts[path.stem]:
                        tasks.append(CorruptTask(sigma_index=si, sigma=sigma, run=run, joint=joint, **common))

    started = time.time()
    try:
        records = _pmap(_run_corrupt_task, [(t, cfg) for t in tasks], cfg.workers)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    manifest = {
        "tool": "occlubench",
        "version": __version__,
        "command": "corrupt",
        "config": cfg.resolved(),
        "config_digest": cfg.digest(),
        "base_seed": pc.base_seed,
        "inputs": inputs,
        "tasks": sorted(records, key=lambda r: r["output"]),
    }
    _write_json(out / "manifest.json", manifest)
    # Wall-clock data lives outside the manifest so the manifest stays reproducible.
    _write_json(out / "run_log.json", {"started": started, "finished": time.time(), "jobs": cfg.workers})
    log.info("wrote %d corrupted files to %s", len(records), out)
    return manifest


# --- evaluate -------------------------------------------------------------

@dataclass(frozen=True)
class EvalUnit:
    model: str
    protocol: str  # p1 | p2
    sigma: str  # "gt" or formatted sigma
    run: int
    joint: str | None
    stem: str
    source: str | None  # prediction file, or 2D input for baselines
    gt: str

    @property
    def sort_key(self):
        return (self.model, self.protocol, self.sigma, self.run, self.joint or "", self.stem)


def _parse_variant_path(rel: Path):
    """``<protocol>/<sigma>/<run>/[<joint>/]<stem>.poseq`` -> fields, or None."""
    parts = rel.parts
    if len(parts) not in (4, 5) or parts[0] not in ("p1", "p2"):
        return None
    try:
        run = int(parts[2])
    except ValueError:
        return None
    joint = parts[3] if len(parts) == 5 else None
    return parts[0], parts[1], run, joint, rel.stem


def _collect_units(gt_dir, predictions_dir, models, corrupted_dir):
    gt_files = {p.stem: p for p in _list_poseq(gt_dir)}
    units, unmatched = [], []
    seen_groups = defaultdict(set)

    def add(model, fields, source):
        protocol, sig, run, joint, stem = fields
        if stem not in gt_files:
            unmatched.append(f"{model}/{protocol}/{sig}/{run}/{joint or ''}{'/' if joint else ''}{stem}: no ground truth")
            return
        seen_groups[(model, protocol, sig, run, joint)].add(stem)
        units.append(EvalUnit(model, protocol, sig, run, joint, stem, str(source), str(gt_files[stem])))

    if predictions_dir is not None:
        pred_root = Path(predictions_dir)
        if not pred_root.is_dir():
            raise DataError(f"not a directory: {pred_root}")
        for model_dir in sorted(p for p in pred_root.iterdir() if p.is_dir()):
            for f in sorted(model_dir.rglob("*.poseq")):
                fields = _parse_variant_path(f.relative_to(model_dir))
                if fields is None:
                    raise DataError(f"{f}: expected <model>/<protocol>/<sigma>/<run>/[<joint>/]<stem>.poseq")
                add(model_dir.name, fields, f)
    for model in models:
        if model not in BASELINE_IDS:
            raise UsageError(f"unknown model id {model!r}; baselines are {', '.join(BASELINE_IDS)}")
        if corrupted_dir is None:
            for stem in sorted(gt_files):
                add(model, ("p1", GT_KEY, 0, None, stem), None)
            continue
        root = Path(corrupted_dir)
        if (root / "corrupted").is_dir():
            root = root / "corrupted"
        for f in sorted(root.rglob("*.poseq")):
            fields = _parse_variant_path(f.relative_to(root))
            if fields is None:
                raise DataError(f"{f}: unexpected location in corrupted tree")
            add(model, fields, f)

    for group, stems in sorted(seen_groups.items(), key=lambda kv: tuple(str(x) for x in kv[0])):
        for stem in sorted(set(gt_files) - stems):
            model, protocol, sig, run, joint = group
            unmatched.append(f"{model}/{protocol}/{sig}/{run}/{joint or ''}{'/' if joint else ''}{stem}: no prediction")
    units.sort(key=lambda u: u.sort_key)
    return units, unmatched


def _load_prediction(unit: EvalUnit, gt: SequenceContainer) -> PoseSequence3D:
    gt_seq = gt.sequence
    if unit.model in BASELINE_IDS:
        seq2d = read_container(unit.source).sequence if unit.source not in (None, "None") else None
        if seq2d is not None:
            gt_seq = truncate(gt_seq, seq2d.num_frames)
        return run_baseline(unit.model, seq2d, gt_seq, gt.camera)
    pred = read_container(unit.source).sequence
    if not isinstance(pred, PoseSequence3D):
        raise DataError(f"{unit.source}: predictions must be 3D (mm)")
    if pred.num_hypotheses is not None:
        pred = aggregate_hypotheses(pred)
    return pred


def _eval_unit(args):
    """Per-slice and per-joint error sums for one (prediction, ground truth) pair."""
    unit, cfg, p2_targets = args
    gt = read_container(unit.gt)
    try:
        pred = _load_prediction(unit, gt)
    except (ContainerFormatError, ValueError) as exc:
        return {"error": f"{unit.source}: {exc}"}
    gt_seq = gt.sequence
    if unit.protocol == "p2":
        gt_seq = truncate(gt_seq, pred.num_frames)
    try:
        pred, gt_seq, joints = align_for_scoring(pred, gt_seq)
    except (AlignmentError, MappingError) as exc:
        return {"error": f"{unit.source or unit.stem}: {exc}"}

    err = joint_errors(pred, gt_seq)
    shape = err.shape
    frames = None
    if unit.protocol == "p2":
        lo, hi = cfg.window
        frames = slice(lo, hi)
        target_joints = [unit.joint] if unit.joint else list(p2_targets or joints)
    else:
        target_joints = [None]
    out = []
    for target in target_joints:
        if unit.protocol == "p2":
            if target not in joints:
                continue
            lab = np.zeros(shape, dtype=np.int8)
            lab[frames, joints.index(target)] = 1
        else:
            lab = gt_seq.occlusion.labels if gt_seq.occlusion is not None else None
        slices = {}
        for s in cfg.slices:
            if s != "overall" and lab is None:
                continue
            m = selection_mask(shape, joints, cfg.exclude_joints, s, lab, frames)
            slices[s] = {
                "sum": float(err[m].sum()), "count": int(m.sum()),
                "joint_sum": np.where(m, err, 0.0).sum(axis=0), "joint_count": m.sum(axis=0),
            }
        out.append({"target": target, "slices": slices})
    return {"unit": unit, "joints": joints, "action": gt.action, "camera": gt.camera_id, "results": out}


def _joint_order(name):
    if name is None:
        return (-1, "")
    return (H36M17.joints.index(name), name) if name in H36M17.joints else (len(H36M17.joints), name)


def _mean_or_none(total, count):
    return total / count if count else None


class _Pool:
    """Error sums pooled over sequences; per-joint sums only while every sequence shares one joint layout."""

    def __init__(self, joints):
        self.joints = tuple(joints)
        self.total = 0.0
        self.count = 0
        self.joint_sum = np.zeros(len(joints))
        self.joint_count = np.zeros(len(joints), dtype=np.int64)

    def add(self, joints, v) -> None:
        self.total += v["sum"]
        self.count += v["count"]
        if self.joint_sum is not None and tuple(joints) == self.joints:
            self.joint_sum = self.joint_sum + v["joint_sum"]
            self.joint_count = self.joint_count + v["joint_count"]
        else:
            self.joint_sum = self.joint_count = None

    def per_joint(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.joint_count > 0, self.joint_sum / np.maximum(self.joint_count, 1), np.nan)


def cmd_evaluate(gt_dir, out_dir, cfg: RunConfig, predictions_dir=None, models=(), corrupted_dir=None) -> dict:
    units, unmatched = _collect_units(gt_dir, predictions_dir, models, corrupted_dir)
    if not units:
        raise DataError("nothing to evaluate: no predictions paired with ground truth")
    if unmatched and not cfg.allow_partial:
        raise DataError("unmatched prediction/ground-truth pairs (use --allow-partial to evaluate anyway):\n  "
                        + "\n  ".join(unmatched))
    p2_targets = tuple(sorted({u.joint for u in units if u.protocol == "p2" and u.joint}, key=_joint_order))
    results = _pmap(_eval_unit, [(u, cfg, p2_targets) for u in units], cfg.workers)
    errors = [r["error"] for r in results if "error" in r]
    if errors:
        raise DataError("evaluation failed:\n  " + "\n  ".join(errors))

    # Pool sums over sequences per (model, protocol, sigma, run, target, slice).
    pooled: dict[tuple, _Pool] = {}
    per_action = defaultdict(lambda: [0.0, 0])
    joint_sets = {}
    for r in results:
        u = r["unit"]
        joint_sets[u.stem] = list(r["joints"])
        for res in r["results"]:
            target = res["target"] if u.protocol == "p2" else None
            for s, v in res["slices"].items():
                key = (u.model, u.protocol, u.sigma, u.run, target, s)
                if key not in pooled:
                    pooled[key] = _Pool(r["joints"])
                pooled[key].add(r["joints"], v)
                if u.protocol == "p1" and u.sigma == GT_KEY and s == "overall":
                    pa = per_action[(u.model, r["action"], r["camera"])]
                    pa[0] += v["sum"]
                    pa[1] += v["count"]

    reports = Path(out_dir) / "reports"
    written = []

    def sigma_sort(sig):
        return (-1.0, sig) if sig == GT_KEY else (float(sig), sig)

    for protocol in ("p1", "p2"):
        keys = sorted((k for k in pooled if k[1] == protocol),
                      key=lambda k: (k[0], sigma_sort(k[2]), _joint_order(k[4]), SLICES.index(k[5]), k[3]))
        if not keys:
            continue
        run_rows = []
        by_cell = defaultdict(list)
        by_joint = defaultdict(list)
        joint_names = {}
        for k in keys:
            model, _, sig, run, target, s = k
            pool = pooled[k]
            value = _mean_or_none(pool.total, pool.count)
            row = [model, protocol, sig, run] + ([target] if protocol == "p2" else []) + [s, _fmt_mm(value), pool.count]
            run_rows.append(row)
            if value is not None:
                by_cell[(model, sig, target, s)].append(value)
            if protocol == "p1" and pool.joint_sum is not None:
                joint_names[(model, sig, s)] = pool.joints
                by_joint[(model, sig, s)].append(pool.per_joint())

        head_extra = ["joint"] if protocol == "p2" else []
        _write_csv(reports / f"runs_{protocol}.csv",
                   ["model", "protocol", "sigma", "run"] + head_extra + ["slice", "mpjpe_mm", "count"], run_rows)
        written.append(f"runs_{protocol}.csv")

        summary = {cell: aggregate_runs(vals) for cell, vals in by_cell.items()}
        table_rows = []
        for cell in sorted(summary, key=lambda c: (c[0], sigma_sort(c[1]), _joint_order(c[2]), SLICES.index(c[3]))):
            model, sig, target, s = cell
            st = summary[cell]
            base = summary.get((model, GT_KEY, target, s))
            norm = st.mean - base.mean if base is not None else None
            table_rows.append([model, sig] + ([target] if protocol == "p2" else [])
                              + [s, _fmt_mm(st.mean), _fmt_mm(st.std), st.n, _fmt_mm(norm)])
        name = "table_p1.csv" if protocol == "p1" else "perjoint_p2.csv"
        _write_csv(reports / name, ["model", "sigma"] + head_extra + ["slice", "mean_mm", "std_mm", "runs", "normalized_mm"], table_rows)
        written.append(name)

        if protocol == "p1" and by_joint:
            rows = []
            for cell in sorted(by_joint, key=lambda c: (c[0], sigma_sort(c[1]), SLICES.index(c[2]))):
                model, sig, s = cell
                stack = np.array(by_joint[cell])
                for j, name_j in enumerate(joint_names[cell]):
                    vals = stack[:, j][~np.isnan(stack[:, j])]
                    if vals.size == 0:
                        rows.append([model, sig, s, name_j, "ABSENT", "ABSENT", 0])
                        continue
                    st = aggregate_runs(vals)
                    rows.append([model, sig, s, name_j, _fmt_mm(st.mean), _fmt_mm(st.std), st.n])
            _write_csv(reports / "perjoint_p1.csv", ["model", "sigma", "slice", "joint", "mean_mm", "std_mm", "runs"], rows)
            written.append("perjoint_p1.csv")

    if per_action:
        rows = [[m, a, c, _fmt_mm(_mean_or_none(t, n)), n] for (m, a, c), (t, n) in sorted(per_action.items())]
        _write_csv(reports / "actions_p1.csv", ["model", "action", "camera", "mpjpe_mm", "count"], rows)
        written.append("actions_p1.csv")

    manifest = {
        "tool": "occlubench",
        "version": __version__,
        "command": "evaluate",
        "config": cfg.resolved(),
        "config_digest": cfg.digest(),
        "models": sorted({u.model for u in units}),
        "ground_truth": {Path(u.gt).stem: sha256_file(u.gt) for u in units},
        "aligned_joints": joint_sets,
        "unmatched": unmatched,
        "reports": sorted(written),
        "units": len(units),
    }
    _write_json(reports / "manifest.json", manifest)
    return manifest


# --- analyze --------------------------------------------------------------

ANALYSES = ("geometry", "velocity", "occlusion-stats", "detector-stats")


def _model_predictions(gt_files, predictions_dir, models):
    """``{model: {stem: PoseSequence3D}}`` for clean-input (GT sigma) predictions."""
    out = {}
    for model in models:
        if model not in BASELINE_IDS:
            raise UsageError(f"unknown model id {model!r}")
        preds = {}
        for stem, path in gt_files.items():
            gt = read_container(path)
            seq2d = None
            if model == "baseline:passthrough":
                seq2d = PoseSequence2D(project(gt.sequence.coords, gt.camera, space="camera"),
                                       width=gt.camera.resolution[0], height=gt.camera.resolution[1])
            preds[stem] = run_baseline(model, seq2d, gt.sequence, gt.camera)
        out[model] = preds
    if predictions_dir is not None:
        for model_dir in sorted(p for p in Path(predictions_dir).iterdir() if p.is_dir()):
            preds = {}
            for stem in gt_files:
                f = model_dir / "p1" / GT_KEY / "0" / f"{stem}.poseq"
                if f.exists():
                    seq = read_container(f).sequence
                    if seq.num_hypotheses is not None:
                        seq = aggregate_hypotheses(seq)
                    preds[stem] = seq
            if preds:
                out[model_dir.name] = preds
    return out


def _heatmap_rows(grid: HeatmapGrid, values: np.ndarray, fmt) -> list[list[str]]:
    rows = []
    for i in range(values.shape[0]):
        label = f"{grid.distance_edges[i]:g}-{grid.distance_edges[i + 1]:g}"
        rows.append([label] + ["" if grid.counts[i, j] == 0 else fmt(values[i, j]) for j in range(values.shape[1])])
    return rows


def _write_heatmap(path: Path, grid: HeatmapGrid, counts_only: bool = False) -> None:
    header = ["distance_m\\orientation_deg"] + [
        f"{grid.orientation_edges[j]:g}-{grid.orientation_edges[j + 1]:g}" for j in range(grid.orientation_edges.size - 1)
    ]
    if counts_only:
        rows = _heatmap_rows(grid, grid.counts, lambda v: str(int(v)))
    else:
        rows = _heatmap_rows(grid, grid.mean, lambda v: f"{v:.4f}")
    _write_csv(path, header, rows)


def _per_frame_error(pred, gt, exclude) -> np.ndarray:
    pred, gt, joints = align_for_scoring(pred, gt)
    err = joint_errors(pred, gt)
    keep = [j for j, n in enumerate(joints) if n not in set(exclude)]
    return err[:, keep].mean(axis=1)


def cmd_analyze(which: str, out_dir, cfg: RunConfig, dataset_dir=None, gt_dir=None, predictions_dir=None,
                models=(), detections_dir=None) -> list[str]:
    if which not in ANALYSES:
        raise UsageError(f"unknown analysis {which!r}; expected one of {ANALYSES}")
    reports = Path(out_dir) / "reports"
    written = []

    if which == "occlusion-stats":
        src = dataset_dir or gt_dir
        if src is None:
            raise UsageError("occlusion-stats needs a dataset or --gt directory")
        by_action = defaultdict(list)
        tracks, joints = [], None
        for path in _list_poseq(src):
            c = _read(path)
            if c.sequence.occlusion is None:
                raise DataError(f"{path}: no occlusion labels")
            by_action[c.action or path.stem].append(c.sequence.occlusion)
            tracks.append(c.sequence.occlusion)
            joints = c.sequence.joints
        if not tracks:
            raise DataError(f"no .poseq files in {src}")
        dur = occlusion_duration_stats(dict(sorted(by_action.items())))
        rate = occlusion_rate_per_joint(tracks)
        _write_csv(reports / "occlusion_durations.csv", ["joint", "average_frames", "maximum_frames", "occluded_fraction"],
                   [[n, f"{dur.average[j]:.4f}", int(dur.maximum[j]), f"{rate[j]:.6f}"] for j, n in enumerate(joints)])
        hist = occluded_count_histogram(tracks, len(joints))
        _write_csv(reports / "occlusion_histogram.csv", ["occluded_joints", "frames"],
                   [[k, int(v)] for k, v in enumerate(hist.counts)])
        _write_csv(reports / "occlusion_summary.csv",
                   ["frames", "mean_occluded_fraction", "frames_all_visible", "frames_all_occluded"],
                   [[hist.frames, "" if hist.mean_fraction is None else f"{hist.mean_fraction:.6f}",
                     int(hist.counts[0]), int(hist.counts[-1])]])
        written += ["occlusion_durations.csv", "occlusion_histogram.csv", "occlusion_summary.csv"]

    elif which == "geometry":
        if gt_dir is None:
            raise UsageError("geometry needs --gt")
        gt_files = {p.stem: p for p in _list_poseq(gt_dir)}
        gts = {s: _read(p) for s, p in gt_files.items()}
        for s, c in gts.items():
            if c.camera is None:
                raise DataError(f"{gt_files[s]}: no camera parameters; geometry analysis refused")
        preds = _model_predictions(gt_files, predictions_dir, models)
        dist_grid = HeatmapGrid()
        geo = {}
        for s, c in gts.items():
            orient, dist = frame_geometry(c.sequence.coords, c.camera, "camera", c.sequence.joints)
            geo[s] = (orient, dist)
            dist_grid.add(orient, dist)
        _write_heatmap(reports / "geometry_distribution.csv", dist_grid, counts_only=True)
        written.append("geometry_distribution.csv")
        pooled = HeatmapGrid()
        for model, mp in preds.items():
            grid = HeatmapGrid()
            for s in sorted(mp):
                orient, dist = geo[s]
                err = _per_frame_error(mp[s], gts[s].sequence, cfg.exclude_joints)
                grid.add(orient, dist, err)
            pooled = pooled.merge(grid)
            name = f"heatmap_{model.replace(':', '_')}.csv"
            _write_heatmap(reports / name, grid)
            written.append(name)
        if preds:
            _write_heatmap(reports / "heatmap_mean.csv", pooled)
            written.append("heatmap_mean.csv")

    elif which == "velocity":
        if dataset_dir is None or gt_dir is None:
            raise UsageError("velocity needs a 2D dataset directory and --gt")
        gt_files = {p.stem: p for p in _list_poseq(gt_dir)}
        seqs2d = {p.stem: _read(p).sequence for p in _list_poseq(dataset_dir) if p.stem in gt_files}
        preds = _model_predictions(gt_files, predictions_dir, models)
        speeds_all = []
        for s in sorted(seqs2d):
            speeds_all.append(keypoint_speeds(seqs2d[s].coords).ravel())
        dist = bin_velocity(np.concatenate(speeds_all), np.zeros(sum(a.size for a in speeds_all)))
        _write_csv(reports / "velocity_distribution.csv", ["low_px", "high_px", "count"],
                   [[f"{b.low:.6g}", f"{b.high:.6g}", b.count] for b in dist])
        written.append("velocity_distribution.csv")
        for model, mp in preds.items():
            sp, er = [], []
            for s in sorted(mp):
                if s not in seqs2d:
                    continue
                gt = _read(gt_files[s]).sequence
                seq2d = seqs2d[s]
                speeds = keypoint_speeds(seq2d.coords)
                err = np.linalg.norm(mp[s].coords - gt.coords, axis=-1)[1:]
                keep = [j for j, n in enumerate(gt.joints) if n not in set(cfg.exclude_joints)]
                sp.append(speeds[:, keep].ravel())
                er.append(err[:, keep].ravel())
            bins = bin_velocity(np.concatenate(sp), np.concatenate(er))
            name = f"velocity_{model.replace(':', '_')}.csv"
            _write_csv(reports / name, ["low_px", "high_px", "count", "mpjpe_mm"],
                       [[f"{b.low:.6g}", f"{b.high:.6g}", b.count, _fmt_mm(b.mean_error)] for b in bins])
            written.append(name)

    elif which == "detector-stats":
        if dataset_dir is None or detections_dir is None:
            raise UsageError("detector-stats needs a 2D ground-truth dataset directory and --detections")
        det_root = Path(detections_dir)
        detectors = sorted(p for p in det_root.iterdir() if p.is_dir()) or [det_root]
        gts = {p.stem: _read(p).sequence for p in _list_poseq(dataset_dir)}
        columns, stats = [], []
        for d in detectors:
            det_seqs, gt_seqs = [], []
            for f in _list_poseq(d):
                if f.stem not in gts:
                    raise DataError(f"{f}: no ground truth named {f.stem}")
                gt = gts[f.stem]
                if gt.occlusion is None:
                    raise DataError(f"{f.stem}: ground truth has no occlusion labels")
                det = _read(f).sequence
                if not isinstance(det, PoseSequence2D):
                    raise DataError(f"{f}: detections must be 2D keypoints")
                try:
                    a = align_for_scoring(det, gt)
                except (AlignmentError, MappingError) as exc:
                    raise DataError(f"{f}: {exc}") from None
                det_seqs.append(a.pred.coords)
                gt_seqs.append(a.gt)
            if not det_seqs:
                raise DataError(f"no detections in {d}")
            labels = np.concatenate([g.occlusion.labels for g in gt_seqs])
            st = detector_error_stats(np.concatenate(det_seqs), np.concatenate([g.coords for g in gt_seqs]), labels)
            columns.append(d.name)
            stats.append(st)
        header = ["category"] + [f"{c}_{x}" for c in columns for x in ("mean_px", "std_px")]
        rows = []
        for cat in ("Visible", "SelfOccluded", "ExternallyOccluded"):
            row = [cat]
            for st in stats:
                e = st[cat]
                row += ["ABSENT", "ABSENT"] if e is None else [f"{e.mean:.4f}", f"{e.std:.4f}"]
            rows.append(row)
        _write_csv(reports / "detector_stats.csv", header, rows)
        written.append("detector_stats.csv")

    return written
