"""Local HTTP service: live rendering, templates, single-shot procgen,
and the layout-studio static bundle.

Every request is stateless and builds its response from immutable
inputs; the render path shares render_artifact_bytes with the CLI, so
both surfaces emit identical bytes for identical inputs. All request
and response bodies carry a schema version field "v": 1.
"""
from __future__ import annotations

import base64
import concurrent.futures
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .artifacts import render_artifact_bytes
from .errors import DegeneratePose, InputError
from .procgen import GenConfig, accept_scene, candidate_rng, default_templates, sample_scene
from .render import render_oscr
from .scene import FaceColorMap, layout_from_json, layout_to_json, validate_layout

log = logging.getLogger("oscr.service")


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8754
    static_dir: Path | None = None
    max_request_bytes: int = 2 * 1024 * 1024
    render_timeout_s: float = 30.0

    def __post_init__(self):
        if not (0 < self.port < 65536):
            raise InputError(f"invalid port {self.port}")
        if self.render_timeout_s <= 0:
            raise InputError("render timeout must be > 0")


def _error_body(message: str, violations: list[str] | None = None) -> dict:
    body = {"v": 1, "error": message}
    if violations is not None:
        body["violations"] = violations
    return body


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def create_app(cfg: ServiceConfig | None = None) -> FastAPI:
    cfg = cfg or ServiceConfig()
    app = FastAPI(title="oscr", docs_url=None, redoc_url=None)
    pool = concurrent.futures.ThreadPoolExecutor(max_workers=4)

    @app.middleware("http")
    async def limit_body_size(request: Request, call_next):
        length = request.headers.get("content-length")
        if length is not None and int(length) > cfg.max_request_bytes:
            return JSONResponse(status_code=413, content=_error_body("request body too large"))
        return await call_next(request)

    @app.exception_handler(InputError)
    async def input_error_handler(_request, exc):
        return JSONResponse(status_code=400, content=_error_body(str(exc)))

    @app.exception_handler(DegeneratePose)
    async def pose_error_handler(_request, exc):
        return JSONResponse(status_code=400, content=_error_body(str(exc)))

    @app.post("/api/render")
    def http_render(payload: dict):
        layout_obj = payload.get("layout")
        if layout_obj is None:
            raise InputError("request needs a \"layout\" field")
        layout = layout_from_json(layout_obj)
        violations = validate_layout(layout)
        if violations:
            return JSONResponse(status_code=400, content=_error_body("invalid layout", violations))
        colors = None
        if payload.get("colors") is not None:
            colors = FaceColorMap.from_json(payload["colors"])

        def run():
            return render_artifact_bytes(
                layout,
                mode=payload.get("mode", "oscr"),
                alpha=payload.get("alpha", 0.5),
                colors=colors,
                cull_backfaces=payload.get("cull_backfaces", True),
            )

        future = pool.submit(run)
        try:
            files, info = future.result(timeout=cfg.render_timeout_s)
        except concurrent.futures.TimeoutError:
            return JSONResponse(status_code=504, content=_error_body("render timed out"))
        return {"v": 1, "info": info, "artifacts": {name: _b64(data) for name, data in sorted(files.items())}}

    @app.get("/api/templates")
    def http_templates():
        return {
            "v": 1,
            "templates": [{"label": t.label, "dims": list(t.dims)} for t in default_templates()],
        }

    @app.post("/api/procgen")
    def http_procgen(payload: dict):
        seed = payload.get("seed")
        if not isinstance(seed, int):
            raise InputError("request needs an integer \"seed\"")
        cfg_obj = dict(payload.get("config") or {})
        cfg_obj.setdefault("seed", seed)
        cfg_obj.setdefault("n_scenes", 1)
        gen_cfg = GenConfig.from_json(cfg_obj)
        attempt = payload.get("attempt", 0)
        candidate = sample_scene(gen_cfg, candidate_rng(seed, 0, attempt))
        render = render_oscr(candidate, alpha=gen_cfg.alpha)
        report = accept_scene(candidate, render, gen_cfg)
        return {"v": 1, "layout": layout_to_json(candidate), "accept": report.to_json()}

    if cfg.static_dir is not None and Path(cfg.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=cfg.static_dir, html=True), name="ui")
    else:
        @app.get("/")
        def index_placeholder():
            return JSONResponse(
                content={
                    "v": 1,
                    "service": "oscr",
                    "note": "UI bundle not found; build the frontend and pass --static-dir",
                }
            )

    return app
