"""Render-to-files builder shared by the CLI and the HTTP service.

Both surfaces emit the same named byte blobs for the same inputs, which
is what makes CLI/HTTP parity a byte-level guarantee rather than a
convention.
"""
from __future__ import annotations

import json

from .errors import InputError
from .imageio import depth_pfm_bytes, gray_png_bytes, mask_png_bytes, rgb_png_bytes
from .render import render_layer_map, render_layout_depth, render_oscr
from .scene import FaceColorMap, SceneLayout

RENDER_MODES = ("oscr", "depth", "layers")


def overlap_metadata(amodal_masks: dict) -> list[dict]:
    """Pairwise amodal-mask intersections, for UI occlusion hints."""
    out = []
    ids = sorted(amodal_masks)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            pixels = int((amodal_masks[a] & amodal_masks[b]).sum())
            if pixels:
                out.append({"a": a, "b": b, "pixels": pixels})
    return out


def render_artifact_bytes(
    layout: SceneLayout,
    mode: str = "oscr",
    alpha: float = 0.5,
    colors: FaceColorMap | None = None,
    cull_backfaces: bool = True,
) -> tuple[dict[str, bytes], dict]:
    """Render one layout into named file blobs plus response metadata."""
    if mode not in RENDER_MODES:
        raise InputError(f"unknown render mode {mode!r}, expected one of {RENDER_MODES}")

    if mode == "depth":
        img, empty = render_layout_depth(layout)
        files = {"depth_norm.png": gray_png_bytes(img)}
        info = {"mode": mode, "empty": empty}
        return files, info

    if mode == "layers":
        layers = render_layer_map(layout)
        files = {}
        order = []
        for k, (bid, mask) in enumerate(layers):
            name = f"layer_{k:02d}_box_{bid}.png"
            files[name] = mask_png_bytes(mask)
            order.append(bid)
        files["layers.json"] = (
            json.dumps({"v": 1, "order": order}, indent=2, sort_keys=True) + "\n"
        ).encode()
        info = {"mode": mode, "order": order, "empty": not any(m.any() for _, m in layers)}
        return files, info

    out = render_oscr(layout, colors=colors, alpha=alpha, cull_backfaces=cull_backfaces)
    files = {
        "oscr.png": rgb_png_bytes(out.oscr),
        "depth.pfm": depth_pfm_bytes(out.depth),
        "meta.json": (json.dumps(out.meta.to_json(), indent=2, sort_keys=True) + "\n").encode(),
    }
    for bid in sorted(out.amodal_masks):
        files[f"amodal_{bid}.png"] = mask_png_bytes(out.amodal_masks[bid])
        files[f"visible_{bid}.png"] = mask_png_bytes(out.visible_masks[bid])
    info = {
        "mode": mode,
        "empty": out.empty,
        "overlaps": overlap_metadata(out.amodal_masks),
        "meta": out.meta.to_json(),
    }
    return files, info
