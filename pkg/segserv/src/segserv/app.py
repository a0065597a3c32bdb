"""FastAPI application implementing the /v1/segment wire protocol.

Request:  {"image": base64 PNG, "prompts": [str, ...], "threshold": float}
Response: {"heatmap": base64 8-bit grayscale PNG (input dimensions),
           "model": str, "latency_ms": number}
Errors:   400 malformed payload, 503 model not loaded.

The threshold travels with the request so the service can stay stateless;
binarization is the client's job and the value is only validated here.
"""

from __future__ import annotations

import base64
import io
import time

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel

from .config import ServiceConfig


class SegmentationRequest(BaseModel):
    image: str
    prompts: list[str]
    threshold: float


class SegmentationResponse(BaseModel):
    heatmap: str
    model: str
    latency_ms: float


def _decode_image(data: str) -> np.ndarray:
    raw = base64.b64decode(data, validate=True)
    img = Image.open(io.BytesIO(raw))
    img.load()
    return np.asarray(img.convert("RGB"))


def _encode_gray_png(gray: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(gray, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _resize_to(heat: np.ndarray, width: int, height: int) -> np.ndarray:
    img = Image.fromarray(np.rint(np.clip(heat * 255.0, 0.0, 255.0)).astype(np.uint8), mode="L")
    if img.size != (width, height):
        img = img.resize((width, height), Image.BILINEAR)
    return np.asarray(img)


def create_app(config: ServiceConfig | None = None, backend=None) -> FastAPI:
    """Builds the service; with backend=None it answers 503 until one is
    attached (app.state.backend), mirroring a model that is still loading."""
    config = config or ServiceConfig()
    app = FastAPI(title="segserv", version="0.1.0")
    app.state.config = config
    app.state.backend = backend

    @app.exception_handler(RequestValidationError)
    async def malformed_payload(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed payload"})

    @app.get("/healthz")
    def healthz():
        if app.state.backend is None:
            return JSONResponse(status_code=503, content={"error": "model not ready"})
        return {"status": "ok", "model": app.state.backend.name}

    @app.post("/v1/segment")
    def segment(req: SegmentationRequest):
        if app.state.backend is None:
            return JSONResponse(status_code=503, content={"error": "model not ready"})
        if not req.prompts or any(not p.strip() for p in req.prompts):
            return JSONResponse(status_code=400, content={"error": "prompts must be non-empty"})
        if not 0.0 <= req.threshold <= 1.0:
            return JSONResponse(status_code=400, content={"error": "threshold must be in [0, 1]"})
        try:
            image = _decode_image(req.image)
        except Exception:
            return JSONResponse(status_code=400, content={"error": "image is not decodable PNG base64"})

        t0 = time.perf_counter()
        maps = app.state.backend.heatmaps(image, req.prompts)
        fused = np.max(maps, axis=0)  # prompt fusion: elementwise max
        gray = _resize_to(fused, image.shape[1], image.shape[0])
        latency_ms = (time.perf_counter() - t0) * 1000.0
        return SegmentationResponse(
            heatmap=_encode_gray_png(gray),
            model=app.state.backend.name,
            latency_ms=latency_ms,
        )

    return app
