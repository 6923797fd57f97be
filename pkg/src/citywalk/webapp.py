"""HTTP/WebSocket front of WalkEngine.

GET  /scene.json                     scene as canonical JSON
GET  /pano/<street>/<frame>.<ext>    panorama asset from the assets directory
GET  /overlay/<key>.pgm              lazily rendered overlay layer
WS   /ws                             walk/1 message loop, one session per socket

A static directory (the built viewer) can be mounted at the root.
"""
from __future__ import annotations

import os
import re
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles

from .service import WalkEngine, canonical

PGM_MEDIA = "image/x-portable-graymap"
_NAME = re.compile(r"^[A-Za-z0-9_.-]+$")


def make_app(engine: WalkEngine, assets_dir: str, static_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="citywalk", docs_url=None, redoc_url=None)

    @app.get("/scene.json")
    def scene() -> Response:
        return Response(engine.scene_json(), media_type="application/json")

    @app.get("/pano/{street}/{fname}")
    def pano(street: str, fname: str) -> Response:
        if not (_NAME.match(street) and _NAME.match(fname)):
            return PlainTextResponse("bad name", status_code=400)
        path = os.path.join(assets_dir, street, fname)
        if not os.path.isfile(path):
            return PlainTextResponse("no such panorama", status_code=404)
        media = PGM_MEDIA if fname.endswith(".pgm") else None
        return FileResponse(path, media_type=media)

    @app.get("/overlay/{key}.pgm")
    def overlay(key: str) -> Response:
        if not _NAME.match(key):
            return PlainTextResponse("bad key", status_code=400)
        data = engine.overlay_bytes(key)
        if data is None:
            return PlainTextResponse("unknown overlay", status_code=404)
        return Response(data, media_type=PGM_MEDIA)

    @app.websocket("/ws")
    async def ws(socket: WebSocket) -> None:
        await socket.accept()
        sid = engine.create_session()
        try:
            await socket.send_text(canonical(engine.hello(sid)))
            while True:
                text = await socket.receive_text()
                await socket.send_text(engine.handle_text(sid, text))
        except WebSocketDisconnect:
            pass
        finally:
            engine.drop_session(sid)

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="viewer")

    return app
