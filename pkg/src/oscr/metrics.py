"""Layout-adherence metrics: depth ordering, angular error, objectness.

Estimates come from external perception models via files; ground truth
comes from the layout itself (box yaw, camera-space center depth).
Objects whose objectness score is missing or below the filter threshold
are excluded from the depth and orientation metrics.

The pairwise depth score is reported under two aggregations, mean pair
accuracy in [0, 1] and correct pairs per image (unbounded), because
published comparisons use an aggregate that can exceed 1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, NoPairs
from .scene import SceneLayout, camera_pose

DEPTH_TIE_EPS = 1e-6


@dataclass(frozen=True)
class SceneEval:
    """One scene's ground truth and estimates, keyed by box id."""

    scene_id: str
    gt_depth: dict[int, float]
    gt_yaw: dict[int, float]
    est_depth: dict[int, float | None]
    est_yaw: dict[int, float | None]
    objectness: dict[int, float | None]


@dataclass(frozen=True)
class MetricReport:
    depth_pair_accuracy: float | None
    correct_pairs_per_image: float | None
    n_pairs: int
    angular_error_deg: float | None
    relaxed_angular_error_deg: float | None
    objectness_mean: float | None
    n_boxes: int
    n_filtered: int
    n_scenes: int

    def to_json(self) -> dict:
        return {
            "v": 1,
            "depth_pair_accuracy": self.depth_pair_accuracy,
            "correct_pairs_per_image": self.correct_pairs_per_image,
            "n_pairs": self.n_pairs,
            "angular_error_deg": self.angular_error_deg,
            "relaxed_angular_error_deg": self.relaxed_angular_error_deg,
            "objectness_mean": self.objectness_mean,
            "n_boxes": self.n_boxes,
            "n_filtered": self.n_filtered,
            "n_scenes": self.n_scenes,
        }

    def table(self) -> str:
        def fmt(v, nd=4):
            return "n/a" if v is None else f"{v:.{nd}f}"

        lines = [
            f"{'depth pair accuracy':<28}{fmt(self.depth_pair_accuracy)}",
            f"{'correct pairs / image':<28}{fmt(self.correct_pairs_per_image)}",
            f"{'angular error (deg)':<28}{fmt(self.angular_error_deg, 2)}",
            f"{'relaxed angular error (deg)':<28}{fmt(self.relaxed_angular_error_deg, 2)}",
            f"{'objectness mean':<28}{fmt(self.objectness_mean)}",
            f"{'boxes evaluated / filtered':<28}{self.n_boxes - self.n_filtered} / {self.n_filtered}",
            f"{'scenes':<28}{self.n_scenes}",
        ]
        return "\n".join(lines)


def angular_error(gt_yaw: float, est_yaw: float, relaxed: bool = False) -> float:
    """Absolute circular yaw error in degrees; radians in.

    Strict range [0, 180]. The relaxed variant forgives front/back flips
    by also scoring the estimate rotated half a turn, range [0, 90].
    """
    diff = abs(math.degrees(est_yaw) - math.degrees(gt_yaw)) % 360.0
    strict = min(diff, 360.0 - diff)
    if not relaxed:
        return strict
    flipped = (diff + 180.0) % 360.0
    return min(strict, min(flipped, 360.0 - flipped))


def _retained_ids(scene: SceneEval, threshold: float) -> list[int]:
    out = []
    for bid in sorted(scene.gt_depth):
        score = scene.objectness.get(bid)
        if score is None or score < threshold:
            continue
        out.append(bid)
    return out


def depth_order_score(
    scenes: list[SceneEval], objectness_threshold: float = 0.0
) -> tuple[float, float, int]:
    """Pairwise relative-depth agreement with the ground truth.

    Per scene, every unordered pair of retained boxes with depth
    estimates scores 1 when the estimated ordering matches the true
    ordering (ties, within 1e-6, only match ties). Returns (mean pair
    accuracy, mean correct pairs per image, total pairs).
    """
    total_pairs = 0
    total_correct = 0
    for scene in scenes:
        ids = [b for b in _retained_ids(scene, objectness_threshold)
               if scene.est_depth.get(b) is not None]
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                d_est = scene.est_depth[a] - scene.est_depth[b]
                d_gt = scene.gt_depth[a] - scene.gt_depth[b]
                est_tied = abs(d_est) < DEPTH_TIE_EPS
                gt_tied = abs(d_gt) < DEPTH_TIE_EPS
                if est_tied or gt_tied:
                    correct = est_tied and gt_tied
                else:
                    correct = (d_est > 0) == (d_gt > 0)
                total_pairs += 1
                total_correct += int(correct)
    if total_pairs == 0:
        raise NoPairs("no scene yields an evaluable pair")
    return total_correct / total_pairs, total_correct / len(scenes), total_pairs


def orientation_errors(
    scenes: list[SceneEval], objectness_threshold: float = 0.0
) -> tuple[float | None, float | None, int]:
    """Mean strict and relaxed angular error over retained boxes."""
    strict, relaxed = [], []
    for scene in scenes:
        for bid in _retained_ids(scene, objectness_threshold):
            est = scene.est_yaw.get(bid)
            if est is None:
                continue
            gt = scene.gt_yaw[bid]
            strict.append(angular_error(gt, est, relaxed=False))
            relaxed.append(angular_error(gt, est, relaxed=True))
    if not strict:
        return None, None, 0
    return float(np.mean(strict)), float(np.mean(relaxed)), len(strict)


def objectness_aggregate(
    scenes: list[SceneEval], threshold: float
) -> tuple[float | None, set[tuple[str, int]], list[tuple[str, int]]]:
    """Mean objectness over all scored boxes plus the retained set.

    Returns (mean over scored boxes or None when nothing is scored,
    {(scene, box) with score >= threshold}, [(scene, box) missing]).
    """
    scored = []
    retained = set()
    missing = []
    for scene in scenes:
        for bid in sorted(scene.gt_depth):
            score = scene.objectness.get(bid)
            if score is None:
                missing.append((scene.scene_id, bid))
                continue
            scored.append(score)
            if score >= threshold:
                retained.add((scene.scene_id, bid))
    mean = float(np.mean(scored)) if scored else None
    return mean, retained, missing


def evaluate(scenes: list[SceneEval], objectness_threshold: float = 0.0) -> MetricReport:
    """Compose the three metrics over a benchmark."""
    if not scenes:
        raise InputError("no scenes to evaluate")
    n_boxes = sum(len(s.gt_depth) for s in scenes)
    obj_mean, retained, missing = objectness_aggregate(scenes, objectness_threshold)
    n_retained = len(retained)

    try:
        pair_acc, per_image, n_pairs = depth_order_score(scenes, objectness_threshold)
    except NoPairs:
        pair_acc, per_image, n_pairs = None, None, 0
    strict, relaxed, _ = orientation_errors(scenes, objectness_threshold)

    return MetricReport(
        depth_pair_accuracy=pair_acc,
        correct_pairs_per_image=per_image,
        n_pairs=n_pairs,
        angular_error_deg=strict,
        relaxed_angular_error_deg=relaxed,
        objectness_mean=obj_mean,
        n_boxes=n_boxes,
        n_filtered=n_boxes - n_retained,
        n_scenes=len(scenes),
    )


def gt_from_layout(layout: SceneLayout) -> tuple[dict[int, float], dict[int, float]]:
    """Ground truth from the renderer's camera model: per-box center
    depth along the camera forward axis, and the stored yaw."""
    pose = camera_pose(layout.camera)
    depths = {}
    yaws = {}
    for b in layout.boxes:
        cam_pt = pose.world_to_cam(np.asarray(b.center))[0]
        depths[b.id] = float(cam_pt[2])
        yaws[b.id] = b.yaw
    return depths, yaws


def load_estimates(path: str | Path) -> dict[str, dict[int, dict]]:
    """Estimates file: {"scenes": [{"id", "boxes": [{"id", "depth", "yaw"}]}]}."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed estimates JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("scenes"), list):
        raise InputError('estimates file must be {"scenes": [...]}')
    out = {}
    for i, entry in enumerate(raw["scenes"]):
        where = f"scenes[{i}]"
        if not isinstance(entry, dict) or "id" not in entry or not isinstance(entry.get("boxes"), list):
            raise InputError(f"{where}: need an id and a boxes array")
        per = {}
        for j, b in enumerate(entry["boxes"]):
            if not isinstance(b, dict) or "id" not in b:
                raise InputError(f"{where}.boxes[{j}]: missing box id")
            for key in ("depth", "yaw"):
                v = b.get(key)
                if v is not None and not isinstance(v, (int, float)):
                    raise InputError(f"{where}.boxes[{j}]: {key} must be a number or null")
            per[int(b["id"])] = {"depth": b.get("depth"), "yaw": b.get("yaw")}
        out[str(entry["id"])] = per
    return out


def scenes_from_files(
    manifest: dict,
    manifest_dir: str | Path,
    estimates: dict[str, dict[int, dict]],
    scores: dict[str, dict[str, float]],
) -> list[SceneEval]:
    """Join manifest ground truth with estimate and score files."""
    from .scene import load_layout

    out = []
    for scene in manifest["scenes"]:
        layout = load_layout(Path(manifest_dir) / scene["files"]["layout.json"])
        gt_depth, gt_yaw = gt_from_layout(layout)
        est = estimates.get(scene["id"], {})
        sc = scores.get(scene["id"], {})
        out.append(
            SceneEval(
                scene_id=scene["id"],
                gt_depth=gt_depth,
                gt_yaw=gt_yaw,
                est_depth={b: est.get(b, {}).get("depth") for b in gt_depth},
                est_yaw={b: est.get(b, {}).get("yaw") for b in gt_depth},
                objectness={b: sc.get(str(b)) for b in gt_depth},
            )
        )
    return out
