"""HTTP facade over the annotation engine.

One session per served directory; every mutating request is funneled
through a per-session lock, so concurrent clients see some serial order
and mask versions count each mutation exactly once. Overlay and superpixel
previews are rendered server-side as PNG, keeping clients thin.
"""

from __future__ import annotations

import io
import threading
from contextlib import asynccontextmanager
from typing import Any, Optional

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response
from PIL import Image
from pydantic import BaseModel

from .errors import MaskForgeError, UnknownSessionError
from .mask import RoiRect
from .model import Session
from .superpixel import (
    SlicParams,
    SuperpixelMap,
    boundary_mask,
    compute_slic,
    pixel_digest,
)

DEFAULT_SESSION_ID = "default"

_STATUS_BY_CODE = {
    "unknown-class": 404,
    "unknown-session": 404,
    "not-found": 404,
    "stale-superpixel-map": 409,
    "io-failure": 500,
}

_BOUNDARY_COLOR = (255, 230, 0)


class NavigateBody(BaseModel):
    delta: int


class RoiBody(BaseModel):
    x0: int
    y0: int
    w: int
    h: int


class ClassBody(BaseModel):
    name: str


class StyleBody(BaseModel):
    name: str
    color: Optional[list[int]] = None
    opacity: Optional[float] = None


class OpBody(BaseModel):
    op: str
    class_name: str
    geometry: dict[str, Any]
    frame: str = "global"
    session_id: Optional[str] = None


def _png_bytes(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(rgb).save(buf, format="PNG")
    return buf.getvalue()


class ServiceState:
    """Session registry plus the superpixel preview cache."""

    def __init__(self, session: Session):
        self.sessions: dict[str, Session] = {DEFAULT_SESSION_ID: session}
        self.locks: dict[str, threading.Lock] = {DEFAULT_SESSION_ID: threading.Lock()}
        # preview cache keyed by (view digest, k, m, iterations)
        self._sp_cache: dict[tuple, tuple[SuperpixelMap, bytes]] = {}
        self._sp_latest: dict[str, SuperpixelMap] = {}

    def session(self, session_id: str | None) -> tuple[str, Session]:
        sid = session_id or DEFAULT_SESSION_ID
        if sid not in self.sessions:
            raise UnknownSessionError(f"unknown session {sid!r}")
        return sid, self.sessions[sid]

    def view_pixels(self, session: Session) -> np.ndarray:
        record = session.image_record()
        pixels = record.pixels
        if session.roi is not None:
            rows, cols = session.roi.slices()
            pixels = pixels[rows, cols]
        return pixels

    def superpixels(self, sid: str, session: Session,
                    params: SlicParams) -> tuple[SuperpixelMap, bytes]:
        pixels = self.view_pixels(session)
        digest = pixel_digest(pixels)
        key = (digest, params.k, params.m, params.iterations)
        cached = self._sp_cache.get(key)
        if cached is None:
            spmap = compute_slic(pixels, params)
            view = session.render(frame="roi", with_masks=False)
            view[boundary_mask(spmap.labels)] = _BOUNDARY_COLOR
            cached = (spmap, _png_bytes(view))
            if len(self._sp_cache) > 8:
                self._sp_cache.pop(next(iter(self._sp_cache)))
            self._sp_cache[key] = cached
        self._sp_latest[sid] = cached[0]
        return cached

    def latest_map(self, sid: str) -> SuperpixelMap | None:
        return self._sp_latest.get(sid)


def create_app(session: Session) -> FastAPI:
    """Build the service around an already-open session."""
    state = ServiceState(session)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        for s in state.sessions.values():
            s.flush()

    app = FastAPI(title="maskforge", lifespan=lifespan)
    app.state.service = state

    @app.exception_handler(MaskForgeError)
    async def _engine_error(request: Request, exc: MaskForgeError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(status_code=status,
                            content={"error": exc.code, "detail": str(exc)})

    def _session_info(sess: Session) -> dict:
        roi = sess.roi
        return {
            "session_id": DEFAULT_SESSION_ID,
            "images": [p.name for p in sess.images],
            "current": sess.current,
            "classes": [
                {"name": name, "color": list(style.color), "opacity": style.opacity}
                for name, style in sess.registry.entries
            ],
            "active_class": sess.registry.active_name,
            "roi": None if roi is None else
                   {"x0": roi.x0, "y0": roi.y0, "w": roi.w, "h": roi.h},
        }

    @app.get("/api/session")
    def get_session():
        _, sess = state.session(None)
        return _session_info(sess)

    @app.post("/api/session/navigate")
    def navigate(body: NavigateBody):
        sid, sess = state.session(None)
        with state.locks[sid]:
            current = sess.navigate(body.delta)
        return {"current": current}

    @app.post("/api/session/roi")
    def set_roi(body: RoiBody):
        sid, sess = state.session(None)
        with state.locks[sid]:
            sess.set_roi(RoiRect(body.x0, body.y0, body.w, body.h))
        return _session_info(sess)

    @app.delete("/api/session/roi")
    def clear_roi():
        sid, sess = state.session(None)
        with state.locks[sid]:
            sess.clear_roi()
        return _session_info(sess)

    @app.post("/api/classes")
    def add_class(body: ClassBody):
        sid, sess = state.session(None)
        with state.locks[sid]:
            sess.add_class(body.name)
        return _session_info(sess)

    @app.post("/api/classes/active")
    def set_active(body: ClassBody):
        sid, sess = state.session(None)
        with state.locks[sid]:
            sess.set_active_class(body.name)
        return _session_info(sess)

    @app.post("/api/classes/style")
    def set_style(body: StyleBody):
        sid, sess = state.session(None)
        with state.locks[sid]:
            color = tuple(body.color) if body.color is not None else None
            try:
                sess.registry.set_style(body.name, color=color, opacity=body.opacity)
            except ValueError as e:
                return JSONResponse(status_code=400,
                                    content={"error": "invalid-params",
                                             "detail": str(e)})
        return _session_info(sess)

    @app.post("/api/op")
    def apply_op(body: OpBody):
        sid, sess = state.session(body.session_id)
        with state.locks[sid]:
            spmap = None
            expected = None
            if body.op == "superpixel_click":
                spmap = state.latest_map(sid)
                expected = pixel_digest(state.view_pixels(sess))
            outcome = sess.apply(body.op, body.class_name, body.geometry,
                                 frame=body.frame, spmap=spmap,
                                 expected_digest=expected)
        bbox = outcome.bounding_box_of_change
        return {
            "changed_bits": outcome.changed_bits,
            "bounding_box_of_change": None if bbox is None else
                {"x0": bbox.x0, "y0": bbox.y0, "w": bbox.w, "h": bbox.h},
            "mask_version": outcome.mask_version,
        }

    @app.get("/api/image")
    def get_image(frame: str = Query("global")):
        _, sess = state.session(None)
        return Response(content=_png_bytes(sess.render(frame=frame, with_masks=False)),
                        media_type="image/png")

    @app.get("/api/overlay")
    def get_overlay(frame: str = Query("global")):
        _, sess = state.session(None)
        return Response(content=_png_bytes(sess.render(frame=frame, with_masks=True)),
                        media_type="image/png")

    @app.get("/api/superpixels")
    def get_superpixels(k: int = Query(...), m: float = Query(...),
                        iterations: int = Query(...)):
        sid, sess = state.session(None)
        with state.locks[sid]:
            spmap, _ = state.superpixels(sid, sess, SlicParams(k, m, iterations))
        return {"region_count": spmap.region_count}

    @app.get("/api/superpixels/preview")
    def get_superpixel_preview(k: int = Query(...), m: float = Query(...),
                               iterations: int = Query(...)):
        sid, sess = state.session(None)
        with state.locks[sid]:
            _, png = state.superpixels(sid, sess, SlicParams(k, m, iterations))
        return Response(content=png, media_type="image/png")

    @app.post("/api/export")
    def export():
        sid, sess = state.session(None)
        with state.locks[sid]:
            written = sess.export()
        return {"written": [str(p) for p in written]}

    return app


def serve(root_dir, classes: list[str], bind_address: str = "127.0.0.1:8000",
          masks_dir=None) -> None:
    """Open a session over root_dir and serve it until shutdown."""
    import uvicorn

    session = Session.open(root_dir, classes, masks_dir=masks_dir)
    app = create_app(session)
    host, _, port = bind_address.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
