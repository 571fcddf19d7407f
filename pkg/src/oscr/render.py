"""Software rasterizer for translucent color-coded box layouts.

Each box face is a convex polygon; after near-plane clipping it is
rasterized with half-plane edge functions and the top-left fill rule, so
binary masks are exact and deterministic. Per pixel, fragments are
sorted back-to-front by camera depth (ties broken by ascending box id,
then face index) and alpha-over composited onto the background. The
result depends only on (layout, colors, alpha, flags), never on box
list order or parallelism.

Occlusion uses the boxes themselves as opaque proxy geometry: visible
masks and the depth map are taken from the nearest box surface per
pixel. Real scenes would use the actual 3D assets' masks; the proxy
changes absolute visibility numbers but keeps the pipeline structure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, OffscreenBox
from .scene import (
    FACE_CORNERS,
    FACE_KEYS,
    FACE_NORMALS,
    NEAR_PLANE,
    CameraPose,
    FaceColorMap,
    SceneLayout,
    box_corners,
    camera_pose,
    validate_layout,
    yaw_matrix,
)

_MIN_SCREEN_AREA = 1e-9  # px^2; degenerate projected faces are skipped
_MIN_PLANE_OFFSET = 1e-12  # faces whose plane passes through the camera


@dataclass(frozen=True)
class RenderMeta:
    """Everything needed to reproduce or decode a render."""

    colors: FaceColorMap
    alpha: float
    background: tuple[float, float, float]
    cull_backfaces: bool
    camera_json: dict

    def to_json(self) -> dict:
        return {
            "v": 1,
            "alpha": self.alpha,
            "background": list(self.background),
            "colors": self.colors.to_json(),
            "cull_backfaces": self.cull_backfaces,
            "camera": self.camera_json,
            "depth_infinity_encoded_as": 0.0,
        }


@dataclass(frozen=True)
class RenderOutput:
    """Composited condition map plus per-box masks and the depth map.

    ``amodal_masks[i]`` is box i's full projected silhouette ignoring
    other boxes; ``visible_masks[i]`` is the subset where box i owns the
    nearest surface. ``depth`` is +inf wherever no box covers the pixel.
    ``empty`` flags a render where no box projected into the frame.
    """

    oscr: np.ndarray  # (H, W, 3) float in [0, 1]
    amodal_masks: dict[int, np.ndarray]
    visible_masks: dict[int, np.ndarray]
    depth: np.ndarray  # (H, W) float, +inf where empty
    meta: RenderMeta
    empty: bool


class _FragmentBatch:
    """Flat fragment arrays for one scene: pixel index, depth, box, face."""

    __slots__ = ("pix", "depth", "box", "face")

    def __init__(self, pix, depth, box, face):
        self.pix = pix
        self.depth = depth
        self.box = box
        self.face = face

    def __len__(self):
        return len(self.pix)


def _clip_near(poly: np.ndarray, near: float = NEAR_PLANE) -> np.ndarray:
    """Sutherland-Hodgman clip of a camera-space polygon against z >= near."""
    out = []
    n = len(poly)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        a_in = a[2] >= near
        b_in = b[2] >= near
        if a_in:
            out.append(a)
        if a_in != b_in:
            t = (near - a[2]) / (b[2] - a[2])
            out.append(a + t * (b - a))
    return np.array(out) if len(out) >= 3 else np.empty((0, 3))


def _raster_convex(us: np.ndarray, vs: np.ndarray, width: int, height: int):
    """Pixel centers covered by a convex screen polygon.

    Coverage follows the top-left fill rule: a center exactly on an edge
    counts as inside only for top and left edges, so abutting polygons
    never double-cover or drop a pixel. Returns (rows, cols) int arrays.
    """
    area2 = np.sum(us * np.roll(vs, -1) - np.roll(us, -1) * vs)
    if abs(area2) < _MIN_SCREEN_AREA:
        return None
    if area2 < 0:
        us, vs = us[::-1], vs[::-1]

    col_lo = max(0, int(np.ceil(us.min() - 0.5)))
    col_hi = min(width - 1, int(np.floor(us.max() - 0.5)))
    row_lo = max(0, int(np.ceil(vs.min() - 0.5)))
    row_hi = min(height - 1, int(np.floor(vs.max() - 0.5)))
    if col_lo > col_hi or row_lo > row_hi:
        return None

    px = np.arange(col_lo, col_hi + 1, dtype=np.float64) + 0.5
    py = np.arange(row_lo, row_hi + 1, dtype=np.float64) + 0.5
    inside = np.ones((len(py), len(px)), dtype=bool)
    for i in range(len(us)):
        ax, ay = us[i], vs[i]
        bx, by = us[(i + 1) % len(us)], vs[(i + 1) % len(us)]
        dx, dy = bx - ax, by - ay
        e = dx * (py[:, None] - ay) - dy * (px[None, :] - ax)
        top_left = dy < 0 or (dy == 0 and dx > 0)
        inside &= (e >= 0) if top_left else (e > 0)
        if not inside.any():
            return None

    rr, cc = np.nonzero(inside)
    return rr + row_lo, cc + col_lo


def _scene_fragments(layout: SceneLayout, pose: CameraPose, cull_backfaces: bool) -> _FragmentBatch:
    """Rasterize every box face into flat fragment arrays."""
    w, h, f = pose.width, pose.height, pose.focal_px
    pix_parts, depth_parts, box_parts, face_parts = [], [], [], []

    for box in layout.boxes:
        corners_w = box_corners(box)
        corners_c = pose.world_to_cam(corners_w)
        rot_yaw = yaw_matrix(box.yaw)
        for fi, key in enumerate(FACE_KEYS):
            n_world = rot_yaw @ FACE_NORMALS[key]
            idx = list(FACE_CORNERS[key])
            if cull_backfaces:
                face_center = corners_w[idx].mean(axis=0)
                if np.dot(n_world, pose.position - face_center) <= 0.0:
                    continue
            poly = _clip_near(corners_c[idx])
            if len(poly) == 0:
                continue

            n_cam = pose.rotation @ n_world
            plane_d = float(n_cam @ corners_c[idx[0]])
            if abs(plane_d) < _MIN_PLANE_OFFSET:
                continue  # seen exactly edge-on

            us = pose.cx + f * poly[:, 0] / poly[:, 2]
            vs = pose.cy + f * poly[:, 1] / poly[:, 2]
            covered = _raster_convex(us, vs, w, h)
            if covered is None:
                continue
            rows, cols = covered
            # 1/z is affine in screen coords on the face plane.
            inv_z = (
                n_cam[0] * (cols + 0.5 - pose.cx) + n_cam[1] * (rows + 0.5 - pose.cy)
            ) / (f * plane_d) + n_cam[2] / plane_d
            pix_parts.append(rows * w + cols)
            depth_parts.append(1.0 / inv_z)
            box_parts.append(np.full(len(rows), box.id, dtype=np.int64))
            face_parts.append(np.full(len(rows), fi, dtype=np.int64))

    if not pix_parts:
        z = np.empty(0, dtype=np.int64)
        return _FragmentBatch(z, np.empty(0), z.copy(), z.copy())
    return _FragmentBatch(
        np.concatenate(pix_parts),
        np.concatenate(depth_parts),
        np.concatenate(box_parts),
        np.concatenate(face_parts),
    )


def _check_layout(layout: SceneLayout) -> None:
    # An empty box list is a legal render input (EmptyRender flag), even
    # though validate_layout reports it for authoring surfaces.
    violations = [v for v in validate_layout(layout) if v != "no boxes"]
    if violations:
        raise InputError("invalid layout: " + "; ".join(violations))


def render_oscr(
    layout: SceneLayout,
    colors: FaceColorMap | None = None,
    alpha: float = 0.5,
    background: tuple[float, float, float] = (1.0, 1.0, 1.0),
    cull_backfaces: bool = True,
) -> RenderOutput:
    """Render the translucent color-coded condition map for a layout.

    With backface culling on (the default) only camera-facing faces
    produce fragments, which keeps per-face colors crisp; the flag is
    recorded in the output meta so the alternative stays testable.
    """
    if not (0.0 < alpha < 1.0):
        raise InputError(f"alpha {alpha} outside (0, 1)")
    _check_layout(layout)
    colors = colors or FaceColorMap()
    pose = camera_pose(layout.camera)
    w, h = pose.width, pose.height

    frags = _scene_fragments(layout, pose, cull_backfaces)
    meta = RenderMeta(
        colors=colors,
        alpha=float(alpha),
        background=tuple(float(c) for c in background),
        cull_backfaces=cull_backfaces,
        camera_json={
            "radius": layout.camera.radius,
            "azimuth": layout.camera.azimuth,
            "elevation": layout.camera.elevation,
            "fov_deg": layout.camera.fov_deg,
            "width": w,
            "height": h,
        },
    )

    oscr = np.empty((h, w, 3), dtype=np.float64)
    oscr[:] = background
    depth_map = np.full(h * w, np.inf)
    box_ids = sorted(b.id for b in layout.boxes)
    amodal = {bid: np.zeros(h * w, dtype=bool) for bid in box_ids}
    visible = {bid: np.zeros(h * w, dtype=bool) for bid in box_ids}

    if len(frags) == 0:
        return RenderOutput(
            oscr=oscr,
            amodal_masks={bid: m.reshape(h, w) for bid, m in amodal.items()},
            visible_masks={bid: m.reshape(h, w) for bid, m in visible.items()},
            depth=depth_map.reshape(h, w),
            meta=meta,
            empty=True,
        )

    # Back-to-front order per pixel; lexsort keys are least significant first.
    order = np.lexsort((frags.face, frags.box, -frags.depth, frags.pix))
    pix = frags.pix[order]
    depth = frags.depth[order]
    box = frags.box[order]
    face = frags.face[order]

    first = np.empty(len(pix), dtype=bool)
    first[0] = True
    first[1:] = pix[1:] != pix[:-1]
    starts = np.flatnonzero(first)
    counts = np.diff(np.append(starts, len(pix)))
    rank = np.arange(len(pix)) - np.repeat(starts, counts)

    frag_color = colors.as_array()[face]
    flat = oscr.reshape(-1, 3)
    for r in range(int(counts.max())):
        sel = rank == r
        p = pix[sel]
        flat[p] = alpha * frag_color[sel] + (1.0 - alpha) * flat[p]

    last = np.empty(len(pix), dtype=bool)
    last[-1] = True
    last[:-1] = pix[1:] != pix[:-1]
    depth_map[pix[last]] = depth[last]
    for bid in box_ids:
        amodal[bid][pix[box == bid]] = True
        owner = last & (box == bid)
        visible[bid][pix[owner]] = True

    return RenderOutput(
        oscr=oscr,
        amodal_masks={bid: m.reshape(h, w) for bid, m in amodal.items()},
        visible_masks={bid: m.reshape(h, w) for bid, m in visible.items()},
        depth=depth_map.reshape(h, w),
        meta=meta,
        empty=False,
    )


def render_layout_depth(layout: SceneLayout) -> tuple[np.ndarray, bool]:
    """Opaque nearest-surface depth, min-max normalized into [0, 1].

    The baseline representation: occluded boxes contribute nothing.
    Empty pixels are 1. Returns (image, empty_flag).
    """
    _check_layout(layout)
    pose = camera_pose(layout.camera)
    frags = _scene_fragments(layout, pose, cull_backfaces=True)
    img = np.full(pose.height * pose.width, np.inf)
    if len(frags):
        np.minimum.at(img, frags.pix, frags.depth)
    finite = np.isfinite(img)
    if not finite.any():
        return np.ones((pose.height, pose.width)), True
    lo, hi = img[finite].min(), img[finite].max()
    out = np.ones_like(img)
    out[finite] = 0.0 if hi == lo else (img[finite] - lo) / (hi - lo)
    return out.reshape(pose.height, pose.width), False


def render_layer_map(layout: SceneLayout) -> list[tuple[int, np.ndarray]]:
    """Flat 2D layer stack: per-box amodal masks, nearest center first.

    Ties in center distance break by ascending box id. The stack is not
    3D aware; it exists as the reference representation to compare
    against.
    """
    _check_layout(layout)
    out = render_oscr(layout)
    pos = camera_pose(layout.camera).position
    keyed = sorted(
        layout.boxes, key=lambda b: (float(np.linalg.norm(np.asarray(b.center) - pos)), b.id)
    )
    return [(b.id, out.amodal_masks[b.id]) for b in keyed]


def visibility_ratio(output: RenderOutput, box_id: int) -> float:
    """Visible-pixel fraction of a box's amodal silhouette, in [0, 1]."""
    if box_id not in output.amodal_masks:
        raise OffscreenBox(f"box {box_id} was not rendered")
    total = int(output.amodal_masks[box_id].sum())
    if total == 0:
        raise OffscreenBox(f"box {box_id} has no projected pixels")
    return int(output.visible_masks[box_id].sum()) / total
