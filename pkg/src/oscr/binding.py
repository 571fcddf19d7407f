"""Token-level attention masks binding boxes to their noun tokens.

The token sequence is [p | x_t | z | v]: prompt tokens, image tokens,
condition-map tokens on the same spatial grid, and optional appearance
tokens. A mask entry (q, k) = True allows query q to attend to key k.

Binding rules, applied on condition-token query rows only:

* z never attends to x_t (condition tokens must not read the image);
* a z token attends a box's noun-span tokens iff the token lies inside
  that box's grid mask, so grid cells where two boxes overlap attend
  both spans;
* z tokens attend all non-noun prompt tokens unrestricted;
* every other sector (p and x_t queries, z to z) stays fully open.

Personalization additionally routes appearance tokens: z tokens inside
the bound box's mask may read its v segment, all other z rows are cut
off from v, and v queries mirror the z rule by not reading x_t.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    InputError,
    MissingMask,
    NoAppearanceTokens,
    SpanOverlap,
)

MASK_MAGIC = b"OMK1"
DEFAULT_PATCH_PX = 16  # latent downsample 8 x patchify 2


@dataclass(frozen=True)
class TokenLayout:
    """Shape of the concatenated token sequence [p | x_t | z | v]."""

    n_prompt: int
    rows: int
    cols: int
    n_appearance: int = 0
    patch_px: int = DEFAULT_PATCH_PX

    def __post_init__(self):
        if self.n_prompt <= 0 or self.rows <= 0 or self.cols <= 0:
            raise InputError("token layout requires positive prompt and grid sizes")
        if self.n_appearance < 0:
            raise InputError("n_appearance must be >= 0")

    @property
    def n_spatial(self) -> int:
        return self.rows * self.cols

    @property
    def total(self) -> int:
        return self.n_prompt + 2 * self.n_spatial + self.n_appearance

    @property
    def prompt_sl(self) -> slice:
        return slice(0, self.n_prompt)

    @property
    def image_sl(self) -> slice:
        return slice(self.n_prompt, self.n_prompt + self.n_spatial)

    @property
    def cond_sl(self) -> slice:
        return slice(self.n_prompt + self.n_spatial, self.n_prompt + 2 * self.n_spatial)

    @property
    def appearance_sl(self) -> slice:
        return slice(self.n_prompt + 2 * self.n_spatial, self.total)

    @classmethod
    def for_image(cls, n_prompt: int, image_size: tuple[int, int], n_appearance: int = 0,
                  patch_px: int = DEFAULT_PATCH_PX) -> "TokenLayout":
        w, h = image_size
        if w % patch_px or h % patch_px:
            raise DimensionMismatch(f"image size {image_size} not divisible by patch {patch_px}")
        return cls(n_prompt=n_prompt, rows=h // patch_px, cols=w // patch_px,
                   n_appearance=n_appearance, patch_px=patch_px)


def token_mask_from_pixels(pixel_mask: np.ndarray, patch_px: int = DEFAULT_PATCH_PX) -> np.ndarray:
    """Lift a pixel mask to the token grid: a token is set iff any pixel
    in its patch is set."""
    mask = np.asarray(pixel_mask, dtype=bool)
    h, w = mask.shape
    if h % patch_px or w % patch_px:
        raise DimensionMismatch(f"mask shape {mask.shape} not divisible by patch {patch_px}")
    return mask.reshape(h // patch_px, patch_px, w // patch_px, patch_px).any(axis=(1, 3))


@dataclass(frozen=True)
class AttentionMask:
    """Dense boolean query x key matrix over the full token sequence."""

    tokens: TokenLayout
    matrix: np.ndarray
    box_token_masks: dict[int, np.ndarray]

    def sector(self, query: str, key: str) -> np.ndarray:
        sl = {
            "p": self.tokens.prompt_sl,
            "x": self.tokens.image_sl,
            "z": self.tokens.cond_sl,
            "v": self.tokens.appearance_sl,
        }
        return self.matrix[sl[query], sl[key]]


def build_attention_mask(
    tokens: TokenLayout,
    token_masks: dict[int, np.ndarray],
    noun_spans: dict[int, tuple[int, int]],
) -> AttentionMask:
    """Construct the binding mask from per-box token grids and noun spans."""
    if set(token_masks) != set(noun_spans):
        raise MissingMask(
            f"token masks for boxes {sorted(token_masks)} but noun spans for {sorted(noun_spans)}"
        )
    occupied = np.zeros(tokens.n_prompt, dtype=bool)
    for bid, (start, end) in noun_spans.items():
        if not (0 <= start < end <= tokens.n_prompt):
            raise InputError(f"box {bid}: noun span [{start}, {end}) outside prompt")
        if occupied[start:end].any():
            raise SpanOverlap(f"noun span of box {bid} overlaps another span")
        occupied[start:end] = True
    for bid, grid in token_masks.items():
        if grid.shape != (tokens.rows, tokens.cols):
            raise MissingMask(
                f"box {bid}: token mask shape {grid.shape} != grid {(tokens.rows, tokens.cols)}"
            )

    m = np.ones((tokens.total, tokens.total), dtype=bool)
    z = tokens.cond_sl
    m[z, tokens.image_sl] = False  # condition tokens never read the image

    # Noun columns are reserved: a z token reads span i only from inside
    # box i's grid cells. Overlap cells keep every participating span.
    noun_cols = np.flatnonzero(occupied)
    if len(noun_cols):
        m[z, noun_cols] = False
    for bid in sorted(token_masks):
        start, end = noun_spans[bid]
        inside = token_masks[bid].reshape(-1)
        rows = np.flatnonzero(inside) + z.start
        if len(rows):
            m[np.ix_(rows, np.arange(start, end))] = True

    return AttentionMask(tokens=tokens, matrix=m, box_token_masks=dict(token_masks))


def build_personalization_mask(base: AttentionMask, target_boxes) -> AttentionMask:
    """Bind appearance-token segments to boxes on top of a built mask.

    ``target_boxes`` is one box id or an ordered list of them; the v
    region splits into contiguous segments, one per reference object
    (earlier segments take the remainder). Only v rows/columns change.
    """
    tokens = base.tokens
    if tokens.n_appearance <= 0:
        raise NoAppearanceTokens("token layout has no appearance tokens")
    targets = [target_boxes] if np.isscalar(target_boxes) else list(target_boxes)
    if not targets:
        raise InputError("no target boxes given")
    for bid in targets:
        if bid not in base.box_token_masks:
            raise MissingMask(f"box {bid} has no token mask in the base attention mask")

    n_seg = len(targets)
    seg_len = tokens.n_appearance // n_seg
    extra = tokens.n_appearance - seg_len * n_seg
    if seg_len == 0:
        raise InputError(f"{tokens.n_appearance} appearance tokens cannot serve {n_seg} boxes")

    m = base.matrix.copy()
    v = tokens.appearance_sl
    z_start = tokens.cond_sl.start
    m[tokens.cond_sl, v] = False
    offset = v.start
    for i, bid in enumerate(targets):
        length = seg_len + (1 if i < extra else 0)
        rows = np.flatnonzero(base.box_token_masks[bid].reshape(-1)) + z_start
        if len(rows):
            m[np.ix_(rows, np.arange(offset, offset + length))] = True
        offset += length
    m[v, tokens.image_sl] = False  # appearance queries mirror the z rule

    return AttentionMask(tokens=tokens, matrix=m, box_token_masks=base.box_token_masks)


def export_mask(mask: AttentionMask, path: str | Path) -> None:
    """Write the matrix as bit-packed rows after an 8-byte header."""
    rows, cols = mask.matrix.shape
    header = MASK_MAGIC + struct.pack("<HH", rows, cols)
    Path(path).write_bytes(header + np.packbits(mask.matrix.reshape(-1)).tobytes())


def import_mask_matrix(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != MASK_MAGIC:
        raise InputError(f"{path}: not a mask file (magic {raw[:4]!r})")
    rows, cols = struct.unpack("<HH", raw[4:8])
    bits = np.unpackbits(np.frombuffer(raw[8:], dtype=np.uint8), count=rows * cols)
    return bits.astype(bool).reshape(rows, cols)


def summarize_mask(mask: AttentionMask) -> dict:
    """Allowed-entry counts per (query sector, key sector) pair."""
    names = ["p", "x", "z"] + (["v"] if mask.tokens.n_appearance else [])
    counts = {}
    for q in names:
        for k in names:
            counts[f"{q}->{k}"] = int(mask.sector(q, k).sum())
    return {
        "v": 1,
        "total_tokens": mask.tokens.total,
        "n_prompt": mask.tokens.n_prompt,
        "grid": [mask.tokens.rows, mask.tokens.cols],
        "n_appearance": mask.tokens.n_appearance,
        "allowed": counts,
    }


def write_mask_summary(mask: AttentionMask, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summarize_mask(mask), indent=2, sort_keys=True) + "\n")
