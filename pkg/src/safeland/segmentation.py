"""Raw landing-mask backends.

Two ways to obtain the binary "good to land" mask for a camera view: a
ground-truth oracle that degrades the true labels with reproducible noise
models, and an HTTP client for a remote open-vocabulary segmentation
service speaking the ``/v1/segment`` protocol.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass, field

import numpy as np
import requests
from PIL import Image
from scipy import ndimage

from .world import PALETTE, safe_mask

# 8-connectivity for mask components, matching the pipeline module.
_STRUCTURE_8 = np.ones((3, 3), dtype=bool)

# One-entry labeling cache: consecutive frames from a hovering UAV see the
# same view, and labeling is the oracle's dominant cost.
_label_cache: dict = {"key": None, "value": None}


def _labeled_regions(base: np.ndarray):
    key = base.tobytes()
    if _label_cache["key"] != key:
        _label_cache["key"] = key
        _label_cache["value"] = (
            ndimage.label(base, structure=_STRUCTURE_8),
            ndimage.label(~base, structure=_STRUCTURE_8),
        )
    return _label_cache["value"]


class SegmentationError(Exception):
    """Base class for segmentation backend failures."""


class BackendUnavailableError(SegmentationError):
    """The remote service could not be reached (timeout, connection refused)."""


class ProtocolError(SegmentationError):
    """The remote service answered with a malformed or mismatched payload."""


class RequestRejectedError(SegmentationError):
    """The remote service rejected the request (HTTP 400)."""


class ServiceNotReadyError(SegmentationError):
    """The remote service is up but its model is not loaded yet (HTTP 503)."""


@dataclass(frozen=True)
class RawHeatmap:
    """Binary per-pixel landing mask for one camera frame."""

    mask: np.ndarray  # bool, same shape as the camera image
    frame_index: int


@dataclass(frozen=True)
class NoiseParams:
    """Reproducible degradation applied on top of the oracle's true mask.

    All draws derive from (seed, frame_index) only, so replaying a frame
    stream reproduces the exact same noise.
    """

    component_flip_prob: float = 0.0  # per connected component per frame
    salt_pepper_prob: float = 0.0     # per pixel
    boundary_jitter_px: int = 0       # max dilation/erosion amplitude
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.component_flip_prob <= 1.0:
            raise ValueError("component_flip_prob must be in [0, 1]")
        if not 0.0 <= self.salt_pepper_prob <= 1.0:
            raise ValueError("salt_pepper_prob must be in [0, 1]")
        if self.boundary_jitter_px < 0:
            raise ValueError("boundary_jitter_px must be >= 0")

    @classmethod
    def none(cls, seed: int = 0) -> "NoiseParams":
        return cls(0.0, 0.0, 0, seed)


def oracle_segment(view: np.ndarray, noise: NoiseParams, frame_index: int) -> RawHeatmap:
    """Ground-truth mask of a label image, degraded by the noise models.

    Stages, in order, all driven by one RNG seeded from (seed, frame_index):
    whole-component flips of the true mask and of its complement, per-pixel
    salt-and-pepper flips, then a uniform-random dilation or erosion of the
    mask boundary by up to ``boundary_jitter_px`` (4-connected structuring
    element per step).
    """
    if view.size == 0:
        raise ValueError("view must be non-empty")
    base = safe_mask(view)
    out = base.copy()
    rng = np.random.default_rng([int(noise.seed), int(frame_index)])

    if noise.component_flip_prob > 0.0:
        flip = np.zeros_like(base)
        for region, (lab, n) in zip((base, ~base), _labeled_regions(base)):
            if n == 0:
                continue
            coins = rng.random(n) < noise.component_flip_prob
            if coins.any():
                flip |= coins[lab - 1] & region
        out ^= flip

    if noise.salt_pepper_prob > 0.0:
        out ^= rng.random(out.shape) < noise.salt_pepper_prob

    if noise.boundary_jitter_px > 0:
        k = int(rng.integers(-noise.boundary_jitter_px, noise.boundary_jitter_px + 1))
        if k > 0:
            out = ndimage.binary_dilation(out, iterations=k)
        elif k < 0:
            out = ndimage.binary_erosion(out, iterations=-k)

    return RawHeatmap(mask=out, frame_index=int(frame_index))


# ---------------------------------------------------------------------------
# Wire encoding helpers (shared with the remote service protocol)


def png_b64_encode(image: np.ndarray) -> str:
    """Encodes an 8-bit grayscale or RGB array as base64 PNG."""
    mode = "L" if image.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8), mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def png_b64_decode(data: str) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(base64.b64decode(data))))


def label_image_to_rgb(view: np.ndarray) -> np.ndarray:
    """Color rendering of a class-index image, for the wire and debug dumps."""
    return PALETTE[view]


def build_segment_request(image: np.ndarray, prompts: list[str], threshold: float) -> dict:
    """JSON body for POST /v1/segment."""
    return {
        "image": png_b64_encode(image),
        "prompts": list(prompts),
        "threshold": float(threshold),
    }


@dataclass
class ServiceClient:
    """Synchronous client for the /v1/segment endpoint.

    One in-flight request per client; use independent clients for parallelism.
    """

    base_url: str
    timeout_s: float = 10.0
    _session: requests.Session | None = field(default=None, repr=False)

    @property
    def session(self) -> requests.Session:
        if self._session is None:
            self._session = requests.Session()
        return self._session

    def close(self):
        if self._session is not None:
            self._session.close()
            self._session = None


def remote_segment(
    client: ServiceClient,
    image: np.ndarray,
    prompts: list[str],
    threshold: float,
    frame_index: int = 0,
) -> RawHeatmap:
    """Requests a heatmap from the remote service and binarizes it.

    The grayscale response is thresholded inclusively at ``threshold * 255``.
    Timeouts surface as BackendUnavailableError; HTTP 400 and 503 map to
    RequestRejectedError and ServiceNotReadyError; any shape mismatch between
    the response heatmap and the input image is a ProtocolError.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    body = build_segment_request(image, prompts, threshold)
    url = client.base_url.rstrip("/") + "/v1/segment"
    try:
        resp = client.session.post(url, json=body, timeout=client.timeout_s)
    except (requests.Timeout, requests.ConnectionError) as exc:
        raise BackendUnavailableError(f"segmentation service unreachable: {exc}") from exc
    if resp.status_code == 400:
        raise RequestRejectedError(f"service rejected request: {resp.text[:200]}")
    if resp.status_code == 503:
        raise ServiceNotReadyError("segmentation model not ready")
    if resp.status_code != 200:
        raise ProtocolError(f"unexpected status {resp.status_code}")
    try:
        payload = resp.json()
        heatmap = png_b64_decode(payload["heatmap"])
    except (ValueError, KeyError, OSError) as exc:
        raise ProtocolError(f"malformed response: {exc}") from exc
    if heatmap.ndim != 2 or heatmap.shape != image.shape[:2]:
        raise ProtocolError(
            f"heatmap shape {heatmap.shape} does not match image {image.shape[:2]}"
        )
    mask = heatmap.astype(np.float64) >= threshold * 255.0
    return RawHeatmap(mask=mask, frame_index=int(frame_index))
