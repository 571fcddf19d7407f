"""Deterministic encoders for render artifacts: 8-bit PNG and float PFM."""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image


def rgb_png_bytes(img: np.ndarray) -> bytes:
    """Encode an (H, W, 3) float image in [0,1] as 8-bit RGB PNG bytes."""
    data = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def gray_png_bytes(img: np.ndarray) -> bytes:
    """Encode an (H, W) float image in [0,1] as 8-bit grayscale PNG bytes."""
    data = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def mask_png_bytes(mask: np.ndarray) -> bytes:
    """Encode an (H, W) boolean mask as 0/255 grayscale PNG bytes."""
    data = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def read_mask_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) >= 128


def read_rgb_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB")).astype(np.float64) / 255.0


def depth_pfm_bytes(depth: np.ndarray) -> bytes:
    """Encode an (H, W) depth map as a little-endian grayscale PFM.

    PFM stores rows bottom-to-top; a negative scale marks little-endian.
    +inf (empty pixels) is written as 0.0; the render meta sidecar
    records that convention.
    """
    d = np.asarray(depth, dtype=np.float32).copy()
    d[~np.isfinite(d)] = 0.0
    h, w = d.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    return header + d[::-1].astype("<f4").tobytes()


def read_depth_pfm(path: str | Path) -> np.ndarray:
    """Decode a grayscale PFM written by depth_pfm_bytes; 0.0 -> +inf."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"Pf":
        raise ValueError(f"not a grayscale PFM: {parts[0]!r}")
    w, h = (int(t) for t in parts[1].split())
    scale = float(parts[2])
    fmt = "<f4" if scale < 0 else ">f4"
    d = np.frombuffer(parts[3], dtype=fmt, count=w * h).reshape(h, w)[::-1]
    d = d.astype(np.float64)
    d[d == 0.0] = np.inf
    return d


def mask_from_png_bytes(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("L")) >= 128


def rgb_from_png_bytes(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGB")).astype(np.float64) / 255.0
