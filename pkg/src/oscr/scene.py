"""Scene layout types, camera geometry, and layout validation.

Conventions used throughout the toolkit:

* World frame is right-handed with +Z up; the ground plane is z=0.
* Box rotation is yaw-only about +Z; yaw 0 means the box front faces +Y.
* The camera sits on a hemisphere of the given radius around the world
  origin and always looks at the origin with up = +Z.
* Image coordinates: x (u) grows right, y (v) grows down, origin at the
  top-left pixel corner; pixel (r, c) has center (c + 0.5, r + 0.5).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DegeneratePose, InputError

TWO_PI = 2.0 * math.pi

NEAR_PLANE = 1e-3  # meters; points at or nearer are culled

# Local face normals keyed in a fixed order. FACE_CORNERS lists each
# face's corner ids wound counter-clockwise seen from outside the box.
FACE_KEYS = ("+x", "-x", "+y", "-y", "+z", "-z")
FACE_NORMALS = {
    "+x": (1.0, 0.0, 0.0),
    "-x": (-1.0, 0.0, 0.0),
    "+y": (0.0, 1.0, 0.0),
    "-y": (0.0, -1.0, 0.0),
    "+z": (0.0, 0.0, 1.0),
    "-z": (0.0, 0.0, -1.0),
}
FACE_CORNERS = {
    "+x": (1, 3, 7, 5),
    "-x": (0, 4, 6, 2),
    "+y": (3, 2, 6, 7),
    "-y": (0, 1, 5, 4),
    "+z": (4, 5, 7, 6),
    "-z": (0, 2, 3, 1),
}


def normalize_yaw(yaw: float) -> float:
    """Reduce a finite yaw into [0, 2*pi)."""
    y = yaw % TWO_PI
    # Python % can return the divisor itself when yaw is a tiny negative.
    if y >= TWO_PI:
        y -= TWO_PI
    return y


@dataclass(frozen=True)
class OrientedBox:
    """One object's 3D bounding box plus its label and noun-token span.

    ``center`` and ``dims`` are in meters; ``dims`` is (width x, depth y,
    height z). ``noun_span`` is the half-open [start, end) token range of
    the object's noun phrase in the whitespace-tokenized scene prompt.
    """

    id: int
    label: str
    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float
    noun_span: tuple[int, int]
    levitating: bool = False

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "dims", tuple(float(v) for v in self.dims))
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))
        object.__setattr__(self, "noun_span", tuple(int(v) for v in self.noun_span))


@dataclass(frozen=True)
class CameraSpec:
    """Camera on the upper hemisphere, looking at the world origin.

    ``azimuth`` and ``elevation`` are radians; elevation pi/2 puts the
    camera straight above the origin, where the pose is degenerate.
    ``fov_deg`` is the horizontal field of view.
    """

    radius: float
    azimuth: float
    elevation: float
    fov_deg: float = 50.0
    image_size: tuple[int, int] = (512, 512)

    @property
    def width(self) -> int:
        return self.image_size[0]

    @property
    def height(self) -> int:
        return self.image_size[1]

    def position(self) -> np.ndarray:
        th, ph = self.azimuth, self.elevation
        return self.radius * np.array(
            [math.cos(ph) * math.cos(th), math.cos(ph) * math.sin(th), math.sin(ph)]
        )


@dataclass(frozen=True)
class SceneLayout:
    """Full user-specified scene: boxes, camera, and the text prompt."""

    boxes: tuple[OrientedBox, ...]
    camera: CameraSpec
    prompt: str

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))

    def box_by_id(self, box_id: int) -> OrientedBox:
        for b in self.boxes:
            if b.id == box_id:
                return b
        raise KeyError(f"no box with id {box_id}")

    def prompt_tokens(self) -> list[str]:
        return self.prompt.split()


@dataclass(frozen=True)
class FaceColorMap:
    """Six RGB colors in [0,1]^3 keyed by local face normal.

    The map is fixed for a whole dataset run and serialized alongside
    every render so downstream consumers can decode orientation.
    """

    colors: dict[str, tuple[float, float, float]] = field(
        default_factory=lambda: dict(DEFAULT_FACE_COLORS)
    )

    def __post_init__(self):
        got = set(self.colors)
        if got != set(FACE_KEYS):
            raise InputError(f"face color map must define exactly {FACE_KEYS}, got {sorted(got)}")
        vals = [tuple(float(c) for c in v) for v in self.colors.values()]
        if len(set(vals)) != 6:
            raise InputError("face colors must be pairwise distinct")
        for v in vals:
            if any(not (0.0 <= c <= 1.0) for c in v):
                raise InputError(f"face color {v} outside [0,1]")
        object.__setattr__(
            self, "colors", {k: tuple(float(c) for c in self.colors[k]) for k in FACE_KEYS}
        )

    def as_array(self) -> np.ndarray:
        """(6, 3) color array ordered like FACE_KEYS."""
        return np.array([self.colors[k] for k in FACE_KEYS])

    def to_json(self) -> dict:
        return {k: list(v) for k, v in self.colors.items()}

    @classmethod
    def from_json(cls, obj: dict) -> "FaceColorMap":
        return cls(colors={k: tuple(v) for k, v in obj.items()})


DEFAULT_FACE_COLORS = {
    "+x": (1.0, 0.0, 0.0),
    "-x": (0.0, 1.0, 1.0),
    "+y": (0.0, 1.0, 0.0),
    "-y": (1.0, 0.0, 1.0),
    "+z": (0.0, 0.0, 1.0),
    "-z": (1.0, 1.0, 0.0),
}


def yaw_matrix(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def box_corners(box: OrientedBox) -> np.ndarray:
    """8 world-space corners, shape (8, 3).

    Corner k has local signs (sx, sy, sz) with sx = +1 if k & 1 else -1,
    sy = +1 if k & 2 else -1, sz = +1 if k & 4 else -1, so corner 0 is
    (-,-,-) and corner 7 is (+,+,+) before rotation and translation.
    """
    half = np.asarray(box.dims) * 0.5
    signs = np.array([[1 if k & m else -1 for m in (1, 2, 4)] for k in range(8)], dtype=float)
    local = signs * half
    return local @ yaw_matrix(box.yaw).T + np.asarray(box.center)


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform plus pinhole intrinsics.

    Camera axes: x right, y down, z forward, so a world point X maps to
    Xc = rotation @ (X - position) and projects to
    u = cx + focal_px * Xc[0] / Xc[2], v = cy + focal_px * Xc[1] / Xc[2].
    """

    rotation: np.ndarray  # (3, 3), rows = right, down, forward
    position: np.ndarray  # (3,) camera center in world coords
    focal_px: float
    cx: float
    cy: float
    width: int
    height: int

    def world_to_cam(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return (pts - self.position) @ self.rotation.T


def camera_pose(cam: CameraSpec) -> CameraPose:
    """Build the look-at-origin pose and intrinsics for a camera spec.

    Raises DegeneratePose when the viewing direction is parallel to the
    world up axis (elevation pi/2); callers must perturb the elevation.
    """
    pos = cam.position()
    forward = -pos / np.linalg.norm(pos)
    up_world = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up_world)
    nr = np.linalg.norm(right)
    if nr < 1e-12:
        raise DegeneratePose(
            "camera looks straight down the up axis (elevation pi/2); "
            "perturb the elevation or supply an explicit up hint"
        )
    right /= nr
    down = np.cross(forward, right)  # completes x=right, y=down, z=forward
    rotation = np.stack([right, down, forward])
    focal = (cam.width / 2.0) / math.tan(math.radians(cam.fov_deg) / 2.0)
    return CameraPose(
        rotation=rotation,
        position=pos,
        focal_px=focal,
        cx=cam.width / 2.0,
        cy=cam.height / 2.0,
        width=cam.width,
        height=cam.height,
    )


def project(point, pose: CameraPose):
    """Pinhole-project one world point; None when behind the near plane.

    Returns (u, v, depth) with depth measured along the camera forward
    axis. The pixel coordinates may fall outside the image bounds.
    """
    pc = pose.world_to_cam(np.asarray(point, dtype=float))[0]
    depth = pc[2]
    if depth <= NEAR_PLANE:
        return None
    u = pose.cx + pose.focal_px * pc[0] / depth
    v = pose.cy + pose.focal_px * pc[1] / depth
    return (u, v, depth)


def validate_layout(layout: SceneLayout) -> list[str]:
    """Check every layout invariant; returns [] when the layout is valid.

    Violations are deterministic: layout-wide checks first, then per-box
    checks ordered by box id.
    """
    violations: list[str] = []
    if not layout.boxes:
        violations.append("no boxes")

    ids = [b.id for b in layout.boxes]
    for dup in sorted({i for i in ids if ids.count(i) > 1}):
        violations.append(f"duplicate id {dup}")

    cam = layout.camera
    if not (cam.radius > 0):
        violations.append(f"camera radius {cam.radius} must be > 0")
    if not (0.0 <= cam.elevation <= math.pi / 2):
        violations.append(f"camera elevation {cam.elevation} outside [0, pi/2]")
    if not (10.0 < cam.fov_deg < 120.0):
        violations.append(f"camera fov_deg {cam.fov_deg} outside (10, 120)")
    if cam.width <= 0 or cam.height <= 0:
        violations.append(f"image size {cam.image_size} must be positive")

    n_tokens = len(layout.prompt_tokens())
    spans: list[tuple[int, int, int]] = []
    for box in sorted(layout.boxes, key=lambda b: b.id):
        tag = f"box {box.id}"
        if any(d <= 0 for d in box.dims):
            violations.append(f"{tag}: dims {box.dims} must be componentwise > 0")
        if box.center[2] < 0 and not box.levitating:
            violations.append(f"{tag}: center.z {box.center[2]} < 0 for a non-levitating box")
        if not all(math.isfinite(v) for v in (*box.center, *box.dims, box.yaw)):
            violations.append(f"{tag}: non-finite geometry")
        start, end = box.noun_span
        if not (0 <= start < end <= n_tokens):
            violations.append(
                f"{tag}: noun_span [{start}, {end}) not a nonempty range within "
                f"{n_tokens} prompt tokens"
            )
        else:
            spans.append((start, end, box.id))

    spans.sort()
    for (s0, e0, id0), (s1, e1, id1) in zip(spans, spans[1:]):
        if s1 < e0:
            violations.append(f"noun_span of box {id0} overlaps noun_span of box {id1}")

    return violations


# Layout JSON schema. Field names are exact; unknown fields are rejected.

_CAMERA_FIELDS = {"radius", "azimuth", "elevation", "fov_deg", "width", "height"}
_BOX_REQUIRED = {"id", "label", "center", "dims", "yaw", "noun_span"}
_BOX_OPTIONAL = {"levitating"}


def _require_fields(obj: dict, required: set[str], optional: set[str], where: str) -> None:
    unknown = sorted(set(obj) - required - optional)
    if unknown:
        raise InputError(f"{where}: unknown field(s) {unknown}")
    missing = sorted(required - set(obj))
    if missing:
        raise InputError(f"{where}: missing field(s) {missing}")


def layout_from_json(obj: dict) -> SceneLayout:
    """Parse a layout dict against the exact schema; raises InputError."""
    if not isinstance(obj, dict):
        raise InputError("layout must be a JSON object")
    _require_fields(obj, {"prompt", "camera", "boxes"}, set(), "layout")
    cam_obj = obj["camera"]
    if not isinstance(cam_obj, dict):
        raise InputError("layout.camera must be an object")
    _require_fields(cam_obj, _CAMERA_FIELDS, set(), "camera")
    try:
        camera = CameraSpec(
            radius=float(cam_obj["radius"]),
            azimuth=float(cam_obj["azimuth"]),
            elevation=float(cam_obj["elevation"]),
            fov_deg=float(cam_obj["fov_deg"]),
            image_size=(int(cam_obj["width"]), int(cam_obj["height"])),
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"camera: {exc}") from exc

    if not isinstance(obj["boxes"], list):
        raise InputError("layout.boxes must be an array")
    boxes = []
    for i, box_obj in enumerate(obj["boxes"]):
        where = f"boxes[{i}]"
        if not isinstance(box_obj, dict):
            raise InputError(f"{where} must be an object")
        _require_fields(box_obj, _BOX_REQUIRED, _BOX_OPTIONAL, where)
        try:
            center = box_obj["center"]
            dims = box_obj["dims"]
            span = box_obj["noun_span"]
            if len(center) != 3 or len(dims) != 3:
                raise ValueError("center and dims must have 3 components")
            if len(span) != 2:
                raise ValueError("noun_span must be [start, end)")
            boxes.append(
                OrientedBox(
                    id=int(box_obj["id"]),
                    label=str(box_obj["label"]),
                    center=tuple(float(v) for v in center),
                    dims=tuple(float(v) for v in dims),
                    yaw=float(box_obj["yaw"]),
                    noun_span=(int(span[0]), int(span[1])),
                    levitating=bool(box_obj.get("levitating", False)),
                )
            )
        except (TypeError, ValueError) as exc:
            raise InputError(f"{where}: {exc}") from exc

    if not isinstance(obj["prompt"], str):
        raise InputError("layout.prompt must be a string")
    return SceneLayout(boxes=tuple(boxes), camera=camera, prompt=obj["prompt"])


def layout_to_json(layout: SceneLayout) -> dict:
    cam = layout.camera
    obj = {
        "prompt": layout.prompt,
        "camera": {
            "radius": cam.radius,
            "azimuth": cam.azimuth,
            "elevation": cam.elevation,
            "fov_deg": cam.fov_deg,
            "width": cam.width,
            "height": cam.height,
        },
        "boxes": [
            {
                "id": b.id,
                "label": b.label,
                "center": list(b.center),
                "dims": list(b.dims),
                "yaw": b.yaw,
                "noun_span": list(b.noun_span),
                **({"levitating": True} if b.levitating else {}),
            }
            for b in layout.boxes
        ],
    }
    return obj


def dump_layout(layout: SceneLayout) -> str:
    return json.dumps(layout_to_json(layout), indent=2, sort_keys=True)


def load_layout(path: str | Path) -> SceneLayout:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON at byte offset {exc.pos}: {exc.msg}") from exc
    return layout_from_json(obj)


def save_layout(layout: SceneLayout, path: str | Path) -> None:
    Path(path).write_text(dump_layout(layout) + "\n")


def with_camera(layout: SceneLayout, **changes) -> SceneLayout:
    """Copy a layout with some camera fields replaced."""
    return replace(layout, camera=replace(layout.camera, **changes))
