"""Scene builders shared across test modules."""
from __future__ import annotations

import math

import numpy as np

from oscr.scene import CameraSpec, OrientedBox, SceneLayout, box_corners, camera_pose, project

TWO_PI = 2.0 * math.pi


def box(box_id, center, dims, yaw=0.0, label="crate", span=None):
    return OrientedBox(
        id=box_id,
        label=label,
        center=center,
        dims=dims,
        yaw=yaw,
        noun_span=span if span is not None else (box_id, box_id + 1),
    )


def face_on_layout(boxes, radius=10.0, image_size=(128, 128), fov_deg=50.0):
    """Camera at (radius, 0, 0) looking along -X; +X faces are frontal."""
    prompt = " ".join(f"obj{i}" for i in range(len(boxes) + 8))
    cam = CameraSpec(radius=radius, azimuth=0.0, elevation=0.0, fov_deg=fov_deg, image_size=image_size)
    return SceneLayout(boxes=tuple(boxes), camera=cam, prompt=prompt)


def random_layout(rng, n_boxes=None, image_size=(96, 96)):
    """Random on-floor scene with a hemisphere camera; may self-intersect."""
    n = int(n_boxes if n_boxes is not None else rng.integers(1, 5))
    boxes = []
    for i in range(n):
        dims = tuple(rng.uniform(0.4, 2.5, 3))
        r = 2.5 * math.sqrt(rng.uniform())
        th = rng.uniform(0, TWO_PI)
        boxes.append(
            box(i, (r * math.cos(th), r * math.sin(th), dims[2] / 2), dims, yaw=rng.uniform(0, TWO_PI))
        )
    cam = CameraSpec(
        radius=rng.uniform(6, 12),
        azimuth=rng.uniform(0, TWO_PI),
        elevation=rng.uniform(0.1, 1.3),
        fov_deg=rng.uniform(35, 70),
        image_size=image_size,
    )
    prompt = " ".join(f"obj{i}" for i in range(n + 2))
    return SceneLayout(boxes=tuple(boxes), camera=cam, prompt=prompt)


def random_binding_config(rng, n_appearance=0):
    """Random token layout, per-box token grids, and disjoint noun spans."""
    from oscr.binding import TokenLayout

    tokens = TokenLayout(
        n_prompt=int(rng.integers(4, 12)),
        rows=int(rng.integers(2, 5)),
        cols=int(rng.integers(2, 5)),
        n_appearance=n_appearance,
    )
    n_boxes = int(rng.integers(1, 4))
    starts = rng.permutation(tokens.n_prompt)[:n_boxes]
    spans = {i: (int(s), int(s) + 1) for i, s in enumerate(sorted(starts))}
    masks = {i: rng.uniform(size=(tokens.rows, tokens.cols)) > 0.5 for i in spans}
    return tokens, masks, spans


def analytic_amodal_bbox(layout, box_id):
    """Oracle: 2D bbox of the 8 projected corners, in float pixel coords.

    Independent of the rasterizer: projects corners directly and takes
    min/max. Valid only when the whole box is in front of the camera.
    """
    pose = camera_pose(layout.camera)
    pts = [project(c, pose) for c in box_corners(layout.box_by_id(box_id))]
    assert all(p is not None for p in pts), "oracle requires box fully in front"
    us = [p[0] for p in pts]
    vs = [p[1] for p in pts]
    return min(us), max(us), min(vs), max(vs)


def mask_pixel_bbox(mask):
    """Covered-region bbox as pixel-boundary coords (min_u, max_u, min_v, max_v)."""
    rows, cols = np.nonzero(mask)
    assert len(rows), "empty mask has no bbox"
    return cols.min(), cols.max() + 1.0, rows.min(), rows.max() + 1.0
