"""Procedural generation of occlusion-heavy box scenes.

Scenes are rejection-sampled: objects drop uniformly into a disc on the
floor with the camera on a surrounding hemisphere, then candidates are
filtered for collisions, framing, object size, and the occlusion window
(every object visible enough, at least one occluded enough). Candidate
(slot, attempt) pairs map to independent deterministic random
substreams, so generation is reproducible and parallelizable by slot.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import BudgetExhausted, EmptyManifest, InputError
from .imageio import depth_pfm_bytes, mask_png_bytes, rgb_png_bytes
from .render import RenderOutput, render_oscr, visibility_ratio
from .scene import (
    TWO_PI,
    CameraSpec,
    OrientedBox,
    SceneLayout,
    dump_layout,
    yaw_matrix,
)

VOWELS = "aeiou"

REJECTION_REASONS = (
    "collision",
    "offscreen",
    "too_small",
    "too_large",
    "too_hidden",
    "all_visible",
)


@dataclass(frozen=True)
class AssetTemplate:
    """Nominal object dims plus a relative jitter range for sampling."""

    label: str
    dims: tuple[float, float, float]
    jitter: float = 0.15


def default_templates() -> tuple[AssetTemplate, ...]:
    raw = json.loads(resources.files("oscr").joinpath("templates.json").read_text())
    return tuple(AssetTemplate(label=t["label"], dims=tuple(t["dims"])) for t in raw["templates"])


@dataclass(frozen=True)
class GenConfig:
    seed: int
    n_scenes: int
    objects_per_scene: tuple[int, int] = (2, 4)
    placement_radius: float = 3.6
    camera_radius_range: tuple[float, float] = (4.0, 6.0)
    camera_elevation_range: tuple[float, float] = (0.03, 0.35)
    fov_deg: float = 65.0
    image_size: tuple[int, int] = (256, 256)
    alpha: float = 0.5
    visibility_low: float = 0.3
    visibility_high: float = 0.7
    bbox_side_min_frac: float = 0.125
    bbox_side_max_frac: float = 0.750
    score_threshold: float = 0.25
    max_rejections_per_scene: int = 500
    asset_templates: tuple[AssetTemplate, ...] = field(default_factory=default_templates)

    def __post_init__(self):
        lo, hi = self.objects_per_scene
        if not (1 <= lo <= hi <= 4):
            raise InputError(f"objects_per_scene {self.objects_per_scene} not within [1, 4]")
        if not (0.0 < self.visibility_low < self.visibility_high < 1.0):
            raise InputError("need 0 < visibility_low < visibility_high < 1")
        if not (0.0 < self.bbox_side_min_frac < self.bbox_side_max_frac < 1.0):
            raise InputError("need 0 < bbox_side_min_frac < bbox_side_max_frac < 1")
        if hi > len(self.asset_templates):
            raise InputError("fewer asset templates than objects_per_scene allows")

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "n_scenes": self.n_scenes,
            "objects_per_scene": list(self.objects_per_scene),
            "placement_radius": self.placement_radius,
            "camera_radius_range": list(self.camera_radius_range),
            "camera_elevation_range": list(self.camera_elevation_range),
            "fov_deg": self.fov_deg,
            "image_size": list(self.image_size),
            "alpha": self.alpha,
            "visibility_low": self.visibility_low,
            "visibility_high": self.visibility_high,
            "bbox_side_min_frac": self.bbox_side_min_frac,
            "bbox_side_max_frac": self.bbox_side_max_frac,
            "score_threshold": self.score_threshold,
            "max_rejections_per_scene": self.max_rejections_per_scene,
            "asset_templates": [
                {"label": t.label, "dims": list(t.dims), "jitter": t.jitter}
                for t in self.asset_templates
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GenConfig":
        kwargs = dict(obj)
        for key in ("objects_per_scene", "camera_radius_range", "camera_elevation_range", "image_size"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if "asset_templates" in kwargs:
            kwargs["asset_templates"] = tuple(
                AssetTemplate(label=t["label"], dims=tuple(t["dims"]), jitter=t.get("jitter", 0.15))
                for t in kwargs["asset_templates"]
            )
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise InputError(f"bad generation config: {exc}") from exc


def candidate_rng(seed: int, slot: int, attempt: int) -> np.random.Generator:
    """Independent substream for one (scene slot, attempt) candidate."""
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), slot, attempt]))


def _article(label: str) -> str:
    return "an" if label[0].lower() in VOWELS else "a"


def _build_prompt(labels: list[str]) -> tuple[str, list[tuple[int, int]]]:
    """Prompt text plus the whitespace-token span of each label."""
    tokens = ["a", "scene", "with"]
    spans = []
    for i, label in enumerate(labels):
        if i > 0:
            if i == len(labels) - 1:
                tokens.append("and")
            else:
                tokens[-1] += ","
        tokens.append(_article(label))
        words = label.split()
        spans.append((len(tokens), len(tokens) + len(words)))
        tokens.extend(words)
    return " ".join(tokens), spans


def sample_scene(cfg: GenConfig, rng: np.random.Generator) -> SceneLayout:
    """Draw one unfiltered scene candidate from the configured ranges.

    Objects rest on the floor (center.z = height/2) inside the placement
    disc; yaw, camera azimuth, elevation, and radius are uniform.
    """
    lo, hi = cfg.objects_per_scene
    n = int(rng.integers(lo, hi + 1))
    picks = rng.choice(len(cfg.asset_templates), size=n, replace=False)
    labels = [cfg.asset_templates[int(k)].label for k in picks]
    prompt, spans = _build_prompt(labels)

    boxes = []
    for i, k in enumerate(picks):
        t = cfg.asset_templates[int(k)]
        scale = 1.0 + t.jitter * rng.uniform(-1.0, 1.0)
        dims = tuple(d * scale for d in t.dims)
        r = cfg.placement_radius * math.sqrt(rng.uniform())
        th = rng.uniform(0.0, TWO_PI)
        boxes.append(
            OrientedBox(
                id=i,
                label=t.label,
                center=(r * math.cos(th), r * math.sin(th), dims[2] / 2.0),
                dims=dims,
                yaw=rng.uniform(0.0, TWO_PI),
                noun_span=spans[i],
            )
        )

    camera = CameraSpec(
        radius=rng.uniform(*cfg.camera_radius_range),
        azimuth=rng.uniform(0.0, TWO_PI),
        elevation=rng.uniform(*cfg.camera_elevation_range),
        fov_deg=cfg.fov_deg,
        image_size=cfg.image_size,
    )
    return SceneLayout(boxes=tuple(boxes), camera=camera, prompt=prompt)


def _footprint_corners(box: OrientedBox) -> np.ndarray:
    """(4, 2) ground-plane corners of the yaw-rotated footprint."""
    w, d = box.dims[0] / 2.0, box.dims[1] / 2.0
    local = np.array([[w, d], [w, -d], [-w, -d], [-w, d]])
    rot = yaw_matrix(box.yaw)[:2, :2]
    return local @ rot.T + np.asarray(box.center[:2])


def check_collision(a: OrientedBox, b: OrientedBox) -> bool:
    """True iff the two boxes' 3D volumes intersect with positive measure.

    Z intervals must overlap and the rotated footprints must overlap by
    a separating-axis test over the 4 edge normals. Touching contact
    counts as non-colliding.
    """
    a_lo, a_hi = a.center[2] - a.dims[2] / 2, a.center[2] + a.dims[2] / 2
    b_lo, b_hi = b.center[2] - b.dims[2] / 2, b.center[2] + b.dims[2] / 2
    if a_lo >= b_hi or b_lo >= a_hi:
        return False

    ca, cb = _footprint_corners(a), _footprint_corners(b)
    for yaw in (a.yaw, b.yaw):
        rot = yaw_matrix(yaw)[:2, :2]
        for axis in (rot[:, 0], rot[:, 1]):  # the rect's two edge normals
            pa, pb = ca @ axis, cb @ axis
            if pa.max() <= pb.min() or pb.max() <= pa.min():
                return False
    return True


@dataclass(frozen=True)
class BoxCheck:
    box_id: int
    visibility: float | None  # None when the box has no projected pixels
    bbox_side_frac: float | None

    def to_json(self) -> dict:
        return {"box_id": self.box_id, "visibility": self.visibility, "bbox_side_frac": self.bbox_side_frac}


@dataclass(frozen=True)
class AcceptReport:
    verdict: str  # "accepted" | "rejected"
    reason: str | None
    detail: str | None
    boxes: tuple[BoxCheck, ...]

    @property
    def accepted(self) -> bool:
        return self.verdict == "accepted"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "reason": self.reason,
            "detail": self.detail,
            "boxes": [b.to_json() for b in self.boxes],
        }


def _bbox_side_frac(mask: np.ndarray, width: int) -> float:
    rows, cols = np.nonzero(mask)
    side = max(rows.max() - rows.min() + 1, cols.max() - cols.min() + 1)
    return side / width


def accept_scene(candidate: SceneLayout, render: RenderOutput, cfg: GenConfig) -> AcceptReport:
    """Apply the filtering rules to a rendered candidate.

    Check order is fixed so rejection reasons are stable: collision,
    offscreen, size, too_hidden, then all_visible (nothing occluded
    enough). The first failing check names the rejection.
    """
    boxes = sorted(candidate.boxes, key=lambda b: b.id)

    checks = []
    for b in boxes:
        if render.amodal_masks[b.id].sum() == 0:
            checks.append(BoxCheck(b.id, None, None))
        else:
            checks.append(
                BoxCheck(
                    b.id,
                    visibility_ratio(render, b.id),
                    _bbox_side_frac(render.amodal_masks[b.id], candidate.camera.width),
                )
            )
    checks = tuple(checks)

    def rejected(reason, detail):
        return AcceptReport("rejected", reason, detail, checks)

    for i, a in enumerate(boxes):
        for b in boxes[i + 1 :]:
            if check_collision(a, b):
                return rejected("collision", f"boxes {a.id} and {b.id} intersect")
    for c in checks:
        if c.visibility is None:
            return rejected("offscreen", f"box {c.box_id} has no projected pixels")
    for c in checks:
        if c.bbox_side_frac < cfg.bbox_side_min_frac:
            return rejected("too_small", f"box {c.box_id} side fraction {c.bbox_side_frac:.4f}")
    for c in checks:
        if c.bbox_side_frac > cfg.bbox_side_max_frac:
            return rejected("too_large", f"box {c.box_id} side fraction {c.bbox_side_frac:.4f}")
    for c in checks:
        if c.visibility < cfg.visibility_low:
            return rejected("too_hidden", f"box {c.box_id} visibility {c.visibility:.4f}")
    if min(c.visibility for c in checks) > cfg.visibility_high:
        return rejected("all_visible", "no object is occluded enough")
    return AcceptReport("accepted", None, None, checks)


def _scene_artifacts(layout: SceneLayout, render: RenderOutput, report: AcceptReport) -> dict[str, bytes]:
    files = {
        "layout.json": (dump_layout(layout) + "\n").encode(),
        "oscr.png": rgb_png_bytes(render.oscr),
        "depth.pfm": depth_pfm_bytes(render.depth),
        "meta.json": (json.dumps(render.meta.to_json(), indent=2, sort_keys=True) + "\n").encode(),
        "accept.json": (json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n").encode(),
    }
    for bid in sorted(render.amodal_masks):
        files[f"amodal_{bid}.png"] = mask_png_bytes(render.amodal_masks[bid])
        files[f"visible_{bid}.png"] = mask_png_bytes(render.visible_masks[bid])
    return files


def generate_dataset(cfg: GenConfig, out_dir: str | Path) -> dict:
    """Sample, render, filter, and write scenes until n_scenes accepted.

    Writes per-scene artifacts plus manifest.json; the whole tree is a
    deterministic function of the config. Raises BudgetExhausted (with
    the partial manifest attached) when a slot runs out of attempts.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    scenes = []
    rejection_counts = {r: 0 for r in REJECTION_REASONS}
    candidates = 0
    exhausted_slot = None

    for slot in range(cfg.n_scenes):
        accepted = None
        for attempt in range(cfg.max_rejections_per_scene + 1):
            rng = candidate_rng(cfg.seed, slot, attempt)
            candidate = sample_scene(cfg, rng)
            render = render_oscr(candidate, alpha=cfg.alpha)
            report = accept_scene(candidate, render, cfg)
            candidates += 1
            if report.accepted:
                accepted = (candidate, render, report, attempt)
                break
            rejection_counts[report.reason] += 1
        if accepted is None:
            exhausted_slot = slot
            break

        candidate, render, report, attempt = accepted
        scene_id = f"scene_{slot:05d}"
        scene_dir = out / scene_id
        scene_dir.mkdir(exist_ok=True)
        artifacts = _scene_artifacts(candidate, render, report)
        sha = {}
        for name, data in artifacts.items():
            (scene_dir / name).write_bytes(data)
            sha[name] = hashlib.sha256(data).hexdigest()
        scenes.append(
            {
                "id": scene_id,
                "slot": slot,
                "attempts": attempt,
                "files": {name: f"{scene_id}/{name}" for name in sorted(artifacts)},
                "sha256": sha,
                "accept": report.to_json(),
                "scene_stats": {
                    "yaws": [b.yaw for b in sorted(candidate.boxes, key=lambda b: b.id)],
                    "min_visibility": min(c.visibility for c in report.boxes),
                    "side_fracs": [c.bbox_side_frac for c in report.boxes],
                    "camera_elevation": candidate.camera.elevation,
                },
            }
        )

    manifest = {
        "v": 1,
        "kind": "dataset_manifest",
        "config": cfg.to_json(),
        "scenes": scenes,
        "summary": {
            "n_requested": cfg.n_scenes,
            "n_accepted": len(scenes),
            "candidates": candidates,
            "acceptance_rate": len(scenes) / candidates if candidates else 0.0,
            "rejection_counts": rejection_counts,
        },
        "budget_exhausted": exhausted_slot is not None,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if exhausted_slot is not None:
        raise BudgetExhausted(
            f"slot {exhausted_slot}: no acceptable candidate in "
            f"{cfg.max_rejections_per_scene + 1} attempts",
            partial_manifest=manifest,
        )
    return manifest


def load_manifest(path: str | Path) -> dict:
    try:
        manifest = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed manifest JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(manifest, dict) or manifest.get("kind") != "dataset_manifest":
        raise InputError(f"{path} is not a dataset manifest")
    return manifest


def load_scores(path: str | Path) -> dict[str, dict[str, float]]:
    """Parse an external per-box score file into {scene_id: {box_id: score}}."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed scores JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("scenes"), list):
        raise InputError('scores file must be {"scenes": [...]}')
    out: dict[str, dict[str, float]] = {}
    for i, entry in enumerate(raw["scenes"]):
        where = f"scenes[{i}]"
        if not isinstance(entry, dict) or "id" not in entry:
            raise InputError(f"{where}: missing scene id")
        box_scores = entry.get("box_scores")
        if not isinstance(box_scores, dict):
            raise InputError(f"{where} (id {entry['id']}): box_scores must be an object")
        parsed = {}
        for key, value in box_scores.items():
            if not isinstance(value, (int, float)) or not (-1.0 <= value <= 1.0):
                raise InputError(
                    f"{where} (id {entry['id']}): score for box {key!r} is {value!r}, "
                    "expected a number in [-1, 1]"
                )
            parsed[str(key)] = float(value)
        out[str(entry["id"])] = parsed
    return out


def filter_augmentations(manifest: dict, scores: dict[str, dict[str, float]], threshold: float = 0.25) -> dict:
    """Keep a scene's augmentation iff every box scores >= threshold.

    A missing score for any box rejects the scene with reason
    missing_score. Returns a copy of the manifest with only kept scenes
    plus a per-scene decision log.
    """
    decisions = []
    kept = []
    for scene in manifest["scenes"]:
        box_ids = [str(c["box_id"]) for c in scene["accept"]["boxes"]]
        scene_scores = scores.get(scene["id"], {})
        missing = [b for b in box_ids if b not in scene_scores]
        if missing:
            decisions.append(
                {"id": scene["id"], "kept": False, "reason": "missing_score",
                 "detail": f"no score for box(es) {', '.join(missing)}"}
            )
            continue
        low = [b for b in box_ids if scene_scores[b] < threshold]
        if low:
            decisions.append(
                {"id": scene["id"], "kept": False, "reason": "low_score",
                 "detail": f"box(es) {', '.join(low)} below {threshold}"}
            )
            continue
        decisions.append({"id": scene["id"], "kept": True, "reason": None, "detail": None})
        kept.append(scene)

    out = dict(manifest)
    out["scenes"] = kept
    out["augmentation_filter"] = {
        "threshold": threshold,
        "n_in": len(manifest["scenes"]),
        "n_kept": len(kept),
        "decisions": decisions,
    }
    return out


_HIST_SPECS = {
    "min_visibility": (0.0, 1.0),
    "yaw": (0.0, TWO_PI),
    "bbox_side_frac": (0.0, 1.0),
    "camera_elevation": (0.0, math.pi / 2),
}
_HIST_BINS = 20


def dataset_stats(manifest: dict, out_dir: str | Path | None = None) -> dict:
    """Fixed-binning histograms over a manifest; optionally emit plots.

    20 bins per histogram: per-scene minimum visibility ratio, per-box
    yaw, per-box largest 2D bbox side fraction, and camera elevation.
    """
    scenes = manifest.get("scenes", [])
    if not scenes:
        raise EmptyManifest("manifest has no scenes")

    samples = {
        "min_visibility": [s["scene_stats"]["min_visibility"] for s in scenes],
        "yaw": [y for s in scenes for y in s["scene_stats"]["yaws"]],
        "bbox_side_frac": [f for s in scenes for f in s["scene_stats"]["side_fracs"]],
        "camera_elevation": [s["scene_stats"]["camera_elevation"] for s in scenes],
    }
    stats = {"n_scenes": len(scenes), "n_boxes": len(samples["yaw"]), "histograms": {}}
    for name, (lo, hi) in _HIST_SPECS.items():
        edges = np.linspace(lo, hi, _HIST_BINS + 1)
        counts, _ = np.histogram(samples[name], bins=edges)
        stats["histograms"][name] = {"edges": edges.tolist(), "counts": counts.tolist()}

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
        _plot_histograms(stats, out)
    return stats


def _plot_histograms(stats: dict, out: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    for name, hist in stats["histograms"].items():
        edges = np.asarray(hist["edges"])
        centers = (edges[:-1] + edges[1:]) / 2
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.bar(centers, hist["counts"], width=0.9 * (edges[1] - edges[0]))
        ax.set_xlabel(name.replace("_", " "))
        ax.set_ylabel("count")
        fig.tight_layout()
        fig.savefig(out / f"stats_{name}.png", dpi=110)
        plt.close(fig)
