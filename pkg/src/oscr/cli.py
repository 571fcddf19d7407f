"""Command-line entry point: render, gen, filter-aug, stats, mask, eval, serve.

Exit codes: 0 success, 1 runtime error, 2 input error. Errors print as a
single machine-parsable line on stderr. OSCR_LOG selects the log level.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import BudgetExhausted, DegeneratePose, InputError, OscrError

log = logging.getLogger("oscr")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("OSCR_LOG", "warn").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def cmd_render(args) -> int:
    from .artifacts import render_artifact_bytes
    from .scene import FaceColorMap, load_layout, validate_layout

    layout = load_layout(args.layout)
    violations = validate_layout(layout)
    if violations:
        raise InputError("invalid layout: " + "; ".join(violations))
    colors = None
    if args.colors:
        colors = FaceColorMap.from_json(json.loads(Path(args.colors).read_text()))
    files, info = render_artifact_bytes(
        layout, mode=args.mode, alpha=args.alpha, colors=colors,
        cull_backfaces=not args.no_cull_backfaces,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, data in files.items():
        (out / name).write_bytes(data)
    if info.get("empty"):
        log.warning("no box projected into the frame (EmptyRender)")
    print(f"wrote {len(files)} file(s) to {out}")
    return 0


def cmd_gen(args) -> int:
    from .procgen import GenConfig, generate_dataset

    cfg_obj = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.seed is not None:
        cfg_obj["seed"] = args.seed
    if "seed" not in cfg_obj:
        raise InputError("a seed is required (config file or --seed)")
    if args.n_scenes is not None:
        cfg_obj["n_scenes"] = args.n_scenes
    if "n_scenes" not in cfg_obj:
        raise InputError("n_scenes is required (config file or --n-scenes)")
    cfg = GenConfig.from_json(cfg_obj)
    try:
        manifest = generate_dataset(cfg, args.out)
    except BudgetExhausted as exc:
        print(f"error: budget exhausted: {exc}", file=sys.stderr)
        return 1
    s = manifest["summary"]
    print(
        f"accepted {s['n_accepted']}/{s['n_requested']} scenes "
        f"from {s['candidates']} candidates (rate {s['acceptance_rate']:.3f})"
    )
    return 0


def cmd_filter_aug(args) -> int:
    from .procgen import filter_augmentations, load_manifest, load_scores

    manifest = load_manifest(args.manifest)
    scores = load_scores(args.scores)
    out = filter_augmentations(manifest, scores, threshold=args.threshold)
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    f = out["augmentation_filter"]
    print(f"kept {f['n_kept']}/{f['n_in']} scenes at threshold {f['threshold']}", file=sys.stderr)
    return 0


def cmd_stats(args) -> int:
    from .procgen import dataset_stats, load_manifest

    manifest = load_manifest(args.manifest)
    out_dir = args.out or str(Path(args.manifest).parent / "stats")
    stats = dataset_stats(manifest, out_dir)
    print(f"{stats['n_scenes']} scenes, {stats['n_boxes']} boxes; histograms in {out_dir}")
    return 0


def cmd_mask(args) -> int:
    from .binding import (
        TokenLayout,
        build_attention_mask,
        build_personalization_mask,
        export_mask,
        token_mask_from_pixels,
        write_mask_summary,
    )
    from .imageio import read_mask_png
    from .scene import load_layout, validate_layout

    layout = load_layout(args.layout)
    violations = validate_layout(layout)
    if violations:
        raise InputError("invalid layout: " + "; ".join(violations))

    tokens = TokenLayout.for_image(
        n_prompt=len(layout.prompt_tokens()),
        image_size=layout.camera.image_size,
        n_appearance=args.n_appearance,
        patch_px=args.patch_px,
    )
    render_dir = Path(args.render_dir)
    token_masks = {}
    spans = {}
    for box in layout.boxes:
        mask_path = render_dir / f"amodal_{box.id}.png"
        if not mask_path.exists():
            raise InputError(f"missing rendered mask {mask_path}")
        token_masks[box.id] = token_mask_from_pixels(read_mask_png(mask_path), args.patch_px)
        spans[box.id] = box.noun_span

    mask = build_attention_mask(tokens, token_masks, spans)
    if args.personalize is not None:
        mask = build_personalization_mask(mask, args.personalize)
    export_mask(mask, args.out)
    if args.summary:
        write_mask_summary(mask, args.summary)
    print(f"wrote {args.out} ({mask.matrix.shape[0]} x {mask.matrix.shape[1]} tokens)")
    return 0


def cmd_eval(args) -> int:
    from .metrics import evaluate, load_estimates, scenes_from_files
    from .procgen import load_manifest, load_scores

    manifest = load_manifest(args.manifest)
    estimates = load_estimates(args.estimates)
    scores = load_scores(args.scores) if args.scores else {}
    scenes = scenes_from_files(manifest, Path(args.manifest).parent, estimates, scores)
    report = evaluate(scenes, objectness_threshold=args.threshold)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    print(report.table())
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    cfg = ServiceConfig(
        host=args.host,
        port=args.port,
        static_dir=Path(args.static_dir) if args.static_dir else None,
        max_request_bytes=args.max_request_bytes,
        render_timeout_s=args.timeout,
    )
    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oscr", description="Occlusion-aware 3D layout toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a layout to image artifacts")
    p.add_argument("--layout", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--colors", help="face color map JSON")
    p.add_argument("--mode", choices=("oscr", "depth", "layers"), default="oscr")
    p.add_argument("--no-cull-backfaces", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("gen", help="generate a filtered synthetic dataset")
    p.add_argument("--config", help="generation config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-scenes", type=int)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("filter-aug", help="filter augmentations by external scores")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--threshold", type=float, default=0.25)
    p.add_argument("--out")
    p.set_defaults(func=cmd_filter_aug)

    p = sub.add_parser("stats", help="dataset histograms from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("mask", help="build the token binding mask for a rendered layout")
    p.add_argument("--layout", required=True)
    p.add_argument("--render-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--summary")
    p.add_argument("--personalize", type=int, help="bind appearance tokens to this box id")
    p.add_argument("--n-appearance", type=int, default=0)
    p.add_argument("--patch-px", type=int, default=16)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("eval", help="layout-adherence metrics from estimate files")
    p.add_argument("--manifest", required=True)
    p.add_argument("--estimates", required=True)
    p.add_argument("--scores")
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="local HTTP service and layout-studio host")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8754)
    p.add_argument("--static-dir", help="UI bundle directory")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--max-request-bytes", type=int, default=2 * 1024 * 1024)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, DegeneratePose) as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return 2
    except OscrError as exc:
        print(f"error: runtime: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
