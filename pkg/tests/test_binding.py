import numpy as np
import pytest

from oscr.binding import (
    AttentionMask,
    TokenLayout,
    build_attention_mask,
    build_personalization_mask,
    export_mask,
    import_mask_matrix,
    summarize_mask,
    token_mask_from_pixels,
)
from oscr.errors import (
    DimensionMismatch,
    InputError,
    MissingMask,
    NoAppearanceTokens,
    SpanOverlap,
)


def grid_mask(rows, cols, cells=()):
    g = np.zeros((rows, cols), dtype=bool)
    for r, c in cells:
        g[r, c] = True
    return g


from helpers import random_binding_config as random_config


def tiny_tokens(n_prompt=6, rows=2, cols=2, n_appearance=0):
    return TokenLayout(n_prompt=n_prompt, rows=rows, cols=cols, n_appearance=n_appearance)


class TestTokenMaskFromPixels:
    def test_single_patch(self):
        px = np.zeros((32, 32), dtype=bool)
        px[0:16, 0:16] = True
        tm = token_mask_from_pixels(px, 16)
        assert tm.shape == (2, 2)
        assert tm[0, 0] and tm.sum() == 1

    def test_any_coverage_rule(self):
        px = np.zeros((32, 64), dtype=bool)
        px[17, 3] = True
        tm = token_mask_from_pixels(px, 16)
        assert tm[1, 0] and tm.sum() == 1

    def test_full_frame(self):
        assert token_mask_from_pixels(np.ones((48, 48), dtype=bool), 16).all()

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            token_mask_from_pixels(np.zeros((30, 32), dtype=bool), 16)

    def test_layout_for_image(self):
        tokens = TokenLayout.for_image(n_prompt=9, image_size=(512, 512))
        assert (tokens.rows, tokens.cols) == (32, 32)
        assert tokens.total == 9 + 2 * 1024
        with pytest.raises(DimensionMismatch):
            TokenLayout.for_image(n_prompt=9, image_size=(500, 512))


class TestBuildAttentionMask:
    def test_full_grid_box(self):
        tokens = tiny_tokens()
        masks = {0: np.ones((2, 2), dtype=bool)}
        built = build_attention_mask(tokens, masks, {0: (1, 3)})
        assert not built.sector("z", "x").any()
        z_to_p = built.sector("z", "p")
        assert z_to_p[:, 1:3].all()
        assert z_to_p[:, 0].all() and z_to_p[:, 3:].all()

    def test_token_outside_every_box(self):
        tokens = tiny_tokens()
        masks = {0: grid_mask(2, 2, [(0, 0)])}
        built = build_attention_mask(tokens, masks, {0: (2, 4)})
        outside_rows = [1, 2, 3]  # flattened grid cells not in the mask
        z_to_p = built.sector("z", "p")
        for r in outside_rows:
            assert not z_to_p[r, 2:4].any()
            assert z_to_p[r, [0, 1, 4, 5]].all()
        assert z_to_p[0, 2:4].all()

    def test_overlap_attends_both_spans(self):
        tokens = tiny_tokens()
        masks = {
            0: grid_mask(2, 2, [(0, 0), (0, 1)]),
            1: grid_mask(2, 2, [(0, 1), (1, 1)]),
        }
        built = build_attention_mask(tokens, masks, {0: (0, 1), 1: (3, 5)})
        z_to_p = built.sector("z", "p")
        # Cell (0,1) = flat index 1 lies in both boxes.
        assert z_to_p[1, 0] and z_to_p[1, 3:5].all()
        # Cell (0,0) only in box 0: span 1 blocked.
        assert z_to_p[0, 0] and not z_to_p[0, 3:5].any()
        # Cell (1,0) = flat 2 in neither: both spans blocked.
        assert not z_to_p[2, 0] and not z_to_p[2, 3:5].any()

    def test_untouched_sectors_fully_open(self):
        tokens = tiny_tokens()
        built = build_attention_mask(tokens, {0: grid_mask(2, 2, [(0, 0)])}, {0: (0, 2)})
        for q, k in [("p", "p"), ("p", "x"), ("p", "z"), ("x", "p"), ("x", "x"), ("x", "z"), ("z", "z")]:
            assert built.sector(q, k).all(), (q, k)

    def test_span_overlap_rejected(self):
        tokens = tiny_tokens()
        masks = {0: grid_mask(2, 2), 1: grid_mask(2, 2)}
        with pytest.raises(SpanOverlap):
            build_attention_mask(tokens, masks, {0: (0, 2), 1: (1, 3)})

    def test_mask_span_key_mismatch(self):
        tokens = tiny_tokens()
        with pytest.raises(MissingMask):
            build_attention_mask(tokens, {0: grid_mask(2, 2)}, {0: (0, 1), 1: (2, 3)})

    def test_bad_grid_shape(self):
        tokens = tiny_tokens()
        with pytest.raises(MissingMask):
            build_attention_mask(tokens, {0: grid_mask(3, 2)}, {0: (0, 1)})

    def test_span_outside_prompt(self):
        tokens = tiny_tokens(n_prompt=4)
        with pytest.raises(InputError):
            build_attention_mask(tokens, {0: grid_mask(2, 2)}, {0: (2, 6)})


class TestMaskProperties:
    def test_sector_invariants_random(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            tokens, masks, spans = random_config(rng)
            built = build_attention_mask(tokens, masks, spans)
            assert not built.sector("z", "x").any()
            assert built.sector("x", "z").all()

    def test_monotonicity(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            tokens, masks, spans = random_config(rng)
            bid = sorted(masks)[0]
            built = build_attention_mask(tokens, masks, spans)
            grown = dict(masks)
            extra = masks[bid] | (rng.uniform(size=masks[bid].shape) > 0.6)
            grown[bid] = extra
            rebuilt = build_attention_mask(tokens, grown, spans)
            start, end = spans[bid]
            before = built.sector("z", "p")[:, start:end]
            after = rebuilt.sector("z", "p")[:, start:end]
            assert not (before & ~after).any()

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            tokens, masks, spans = random_config(rng)
            ids = sorted(masks)
            perm = {old: new for old, new in zip(ids, rng.permutation(ids))}
            pm = {perm[i]: masks[i] for i in ids}
            ps = {perm[i]: spans[i] for i in ids}
            a = build_attention_mask(tokens, masks, spans)
            b = build_attention_mask(tokens, pm, ps)
            # Ids are bookkeeping only: the (mask, span) pairing decides
            # the matrix, so the rebuilt matrix is identical.
            assert np.array_equal(a.matrix, b.matrix)

    def test_determinism_bitwise(self, tmp_path):
        rng = np.random.default_rng(5)
        tokens, masks, spans = random_config(rng)
        a = build_attention_mask(tokens, masks, spans)
        b = build_attention_mask(tokens, masks, spans)
        export_mask(a, tmp_path / "a.bin")
        export_mask(b, tmp_path / "b.bin")
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


class TestPersonalization:
    def build(self, mask_cells, n_appearance=4):
        tokens = tiny_tokens(n_appearance=n_appearance)
        masks = {0: grid_mask(2, 2, mask_cells)}
        return build_attention_mask(tokens, masks, {0: (0, 1)})

    def test_empty_box_mask_blocks_all_v(self):
        base = self.build([])
        out = build_personalization_mask(base, 0)
        assert not out.sector("z", "v").any()

    def test_full_box_mask_allows_all_v(self):
        base = self.build([(0, 0), (0, 1), (1, 0), (1, 1)])
        out = build_personalization_mask(base, 0)
        assert out.sector("z", "v").all()

    def test_v_queries_mirror_z_blocking(self):
        base = self.build([(0, 0)])
        out = build_personalization_mask(base, 0)
        assert not out.sector("v", "x").any()
        assert out.sector("v", "p").all()
        assert out.sector("v", "z").all()
        assert out.sector("v", "v").all()

    def test_two_reference_objects_disjoint_segments(self):
        tokens = tiny_tokens(n_appearance=6)
        masks = {0: grid_mask(2, 2, [(0, 0)]), 1: grid_mask(2, 2, [(1, 1)])}
        base = build_attention_mask(tokens, masks, {0: (0, 1), 1: (2, 3)})
        out = build_personalization_mask(base, [0, 1])
        z_to_v = out.sector("z", "v")
        # Box 0 owns flat cell 0 and v segment [0,3); box 1 owns cell 3
        # and segment [3,6).
        assert z_to_v[0, :3].all() and not z_to_v[0, 3:].any()
        assert z_to_v[3, 3:].all() and not z_to_v[3, :3].any()
        assert not z_to_v[1].any() and not z_to_v[2].any()

    def test_only_v_rows_and_columns_change(self):
        base = self.build([(0, 1)])
        out = build_personalization_mask(base, 0)
        t = base.tokens
        keep = t.n_prompt + 2 * t.n_spatial
        assert np.array_equal(base.matrix[:keep, :keep], out.matrix[:keep, :keep])

    def test_requires_appearance_tokens(self):
        base = self.build([(0, 0)], n_appearance=0)
        with pytest.raises(NoAppearanceTokens):
            build_personalization_mask(base, 0)

    def test_unknown_target_box(self):
        base = self.build([(0, 0)])
        with pytest.raises(MissingMask):
            build_personalization_mask(base, 7)


class TestExportSummary:
    def test_all_true_4x4_summary(self):
        # Hand-built mask: every sector of a 1-prompt 1x1-grid layout with
        # one appearance token is a single cell; all-true counts are 1.
        tokens = TokenLayout(n_prompt=1, rows=1, cols=1, n_appearance=1)
        mask = AttentionMask(tokens=tokens, matrix=np.ones((4, 4), dtype=bool), box_token_masks={})
        summary = summarize_mask(mask)
        assert all(v == 1 for v in summary["allowed"].values())
        assert len(summary["allowed"]) == 16

    def test_export_import_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        tokens, masks, spans = random_config(rng)
        built = build_attention_mask(tokens, masks, spans)
        export_mask(built, tmp_path / "m.bin")
        again = import_mask_matrix(tmp_path / "m.bin")
        assert np.array_equal(again, built.matrix)

    def test_z_to_x_count_zero(self):
        rng = np.random.default_rng(9)
        tokens, masks, spans = random_config(rng)
        built = build_attention_mask(tokens, masks, spans)
        assert summarize_mask(built)["allowed"]["z->x"] == 0

    def test_import_rejects_bad_magic(self, tmp_path):
        (tmp_path / "junk.bin").write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(InputError):
            import_mask_matrix(tmp_path / "junk.bin")
