"""Heatmap post-processing pipeline.

Raw binary masks are averaged over time, re-binarized, distance-transformed,
restricted to pixels with enough clearance, masked by the state-driven focus
disc, and finally scored patch-by-patch to pick the best landing pixel:

    score = (area / perimeter) / (center_distance + 1)

The focus disc radius relaxes toward a state-dependent target each frame:

    r <- r + (target - r) * lam        (clamped to [r_min, r_max])

Grids are plain numpy arrays; image center is ((W-1)/2, (H-1)/2), sub-pixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .segmentation import RawHeatmap
from .world import CameraModel

_STRUCTURE_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class AveragedHeatmap:
    """Exponential moving average of raw binary masks, values in [0, 1]."""

    values: np.ndarray  # float64
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")

    @classmethod
    def zeros(cls, height: int, width: int, alpha: float) -> "AveragedHeatmap":
        return cls(values=np.zeros((height, width)), alpha=alpha)


def ema_update(avg: AveragedHeatmap, raw: RawHeatmap) -> AveragedHeatmap:
    """values <- (1 - alpha) * values + alpha * raw, elementwise."""
    if raw.mask.shape != avg.values.shape:
        raise ValueError(f"shape mismatch: {raw.mask.shape} vs {avg.values.shape}")
    values = (1.0 - avg.alpha) * avg.values + avg.alpha * raw.mask
    return replace(avg, values=values)


def binarize(avg: AveragedHeatmap, threshold: float = 0.5) -> np.ndarray:
    """Pixel is set iff its averaged value >= threshold (ties included)."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    return avg.values >= threshold


def distance_map(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance to the nearest background pixel.

    Everything outside the image counts as background, so foreground pixels
    touching the border get distance 1.
    """
    padded = np.pad(mask, 1)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


@dataclass(frozen=True)
class FocusState:
    """Current radius of the center-anchored focus disc, in pixels."""

    r_focus: float
    r_min: float
    r_max: float
    lam: float = 0.1  # relaxation rate toward the target

    def __post_init__(self):
        if not self.r_min <= self.r_focus <= self.r_max:
            raise ValueError(f"need r_min <= r_focus <= r_max, got {self}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lam must be in (0, 1]")

    @classmethod
    def for_image(cls, width: int, height: int, lam: float = 0.1) -> "FocusState":
        """Starts fully open: the disc circumscribes the image."""
        r_max = math.hypot(width, height) / 2.0
        return cls(r_focus=r_max, r_min=0.0, r_max=r_max, lam=lam)


def focus_step(f: FocusState, target: float) -> FocusState:
    """One relaxation step of the radius toward ``target``, clamped."""
    if target < 0:
        raise ValueError("target must be >= 0")
    r = f.r_focus + (target - f.r_focus) * f.lam
    return replace(f, r_focus=min(max(r, f.r_min), f.r_max))


@lru_cache(maxsize=8)
def _center_distances(shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rr, cc = np.ogrid[:h, :w]
    d = np.sqrt((rr - cy) ** 2 + (cc - cx) ** 2)
    d.flags.writeable = False
    return d


def _circumscribes(r: float, shape: tuple[int, int]) -> bool:
    return r >= math.hypot(shape[1], shape[0]) / 2.0


def apply_focus(grid: np.ndarray, f: FocusState) -> np.ndarray:
    """Zeroes every pixel farther than r_focus from the image center."""
    if _circumscribes(f.r_focus, grid.shape):
        return grid.copy()
    keep = _center_distances(grid.shape) <= f.r_focus
    if grid.dtype == bool:
        return grid & keep
    return np.where(keep, grid, 0)


def safe_fraction_in_disc(mask: np.ndarray, f: FocusState) -> float:
    """Fraction of pixels inside the focus disc that are set in the mask."""
    if _circumscribes(f.r_focus, mask.shape):
        return float(mask.mean())
    disc = _center_distances(mask.shape) <= f.r_focus
    n = int(disc.sum())
    return float(mask[disc].mean()) if n else 0.0


@dataclass(frozen=True)
class PatchStats:
    """Area, boundary-pixel perimeter, and members of one 8-connected patch."""

    patch_id: int
    area: int
    perimeter: int
    pixels: np.ndarray  # (n, 2) row-major (row, col)


@dataclass(frozen=True)
class BestPixel:
    """Winning landing pixel: image coordinates, objective value, and its
    distance to the image center."""

    u: int  # column
    v: int  # row
    score: float
    c_dist: float


def label_and_stats(mask: np.ndarray) -> list[PatchStats]:
    """8-connected components with boundary-pixel perimeters.

    A patch pixel is boundary when at least one 4-neighbor is outside the
    patch, with the image border counting as outside; a lone pixel therefore
    has area == perimeter == 1.
    """
    mask = np.asarray(mask, dtype=bool)
    lab, n = ndimage.label(mask, structure=_STRUCTURE_8)
    if n == 0:
        return []
    interior = mask.copy()
    interior[0, :] = interior[-1, :] = False
    interior[:, 0] = interior[:, -1] = False
    interior[1:-1, 1:-1] &= mask[:-2, 1:-1] & mask[2:, 1:-1] & mask[1:-1, :-2] & mask[1:-1, 2:]
    boundary = mask & ~interior
    coords = np.argwhere(mask)  # row-major
    ids = lab[coords[:, 0], coords[:, 1]]
    order = np.argsort(ids, kind="stable")  # keeps row-major order within a patch
    coords = coords[order]
    splits = np.flatnonzero(np.diff(ids[order])) + 1
    groups = np.split(coords, splits)
    areas = np.bincount(ids, minlength=n + 1)
    perims = np.bincount(lab[boundary], minlength=n + 1)
    return [
        PatchStats(
            patch_id=pid,
            area=int(areas[pid]),
            perimeter=int(perims[pid]),
            pixels=groups[pid - 1],
        )
        for pid in range(1, n + 1)
    ]


def select_best_pixel(mask_after_focus: np.ndarray, stats: list[PatchStats]) -> BestPixel | None:
    """Argmax of (area/perimeter)/(c_dist+1) over the candidate pixels.

    Within a patch the score is maximized by the member nearest the image
    center, so only that pixel is scored per patch. Ties break toward smaller
    c_dist, then row-major order. Returns None for an empty mask.
    """
    if not stats:
        return None
    dgrid = _center_distances(mask_after_focus.shape)
    best: BestPixel | None = None
    for s in stats:
        d = dgrid[s.pixels[:, 0], s.pixels[:, 1]]
        k = int(np.argmin(d))  # first minimum in row-major order
        c_dist = float(d[k])
        score = (s.area / s.perimeter) / (c_dist + 1.0)
        v, u = int(s.pixels[k, 0]), int(s.pixels[k, 1])
        if (
            best is None
            or score > best.score
            or (score == best.score and c_dist < best.c_dist)
            or (score == best.score and c_dist == best.c_dist and (v, u) < (best.v, best.u))
        ):
            best = BestPixel(u=u, v=v, score=score, c_dist=c_dist)
    return best


def safe_interior(mask: np.ndarray, s_px: float) -> np.ndarray:
    """Pixels with clearance: distance to background >= max(s_px, 1).

    This is the candidate set fed to the scorer; at s_px == 0 it degenerates
    to the mask itself.
    """
    if s_px < 0:
        raise ValueError("s_px must be >= 0")
    threshold = max(s_px, 1.0)
    if threshold <= 1.0:
        # dist >= 1 is exactly foreground membership; skip the transform
        return np.asarray(mask, dtype=bool).copy()
    return distance_map(mask) >= threshold


@dataclass(frozen=True)
class PipelineResult:
    """Per-frame outputs: the winning pixel, the mask fraction seen inside
    the focus disc, the radius that produced them, and intermediates for
    debug dumps."""

    best: BestPixel | None
    safe_fraction: float
    r_focus: float
    avg: np.ndarray
    mask: np.ndarray
    candidates: np.ndarray
    focused: np.ndarray


class LandingPipeline:
    """Owns the carried state (EMA values, focus radius) of one episode."""

    def __init__(
        self,
        cam: CameraModel,
        alpha: float = 0.2,
        threshold: float = 0.5,
        lam: float = 0.1,
    ):
        self.avg: AveragedHeatmap | None = None  # seeded from the first frame
        self.alpha = alpha
        self.focus = FocusState.for_image(cam.image_width, cam.image_height, lam)
        self.threshold = threshold

    @property
    def r_max(self) -> float:
        return self.focus.r_max

    def process(self, raw: RawHeatmap, s_px: float) -> PipelineResult:
        """Runs one frame through the full pipeline with the current radius."""
        if self.avg is None:
            self.avg = AveragedHeatmap(values=raw.mask.astype(float), alpha=self.alpha)
        else:
            self.avg = ema_update(self.avg, raw)
        mask = binarize(self.avg, self.threshold)
        candidates = safe_interior(mask, s_px)
        focused = apply_focus(candidates, self.focus)
        stats = label_and_stats(focused)
        best = select_best_pixel(focused, stats)
        frac = safe_fraction_in_disc(mask, self.focus)
        return PipelineResult(
            best=best,
            safe_fraction=frac,
            r_focus=self.focus.r_focus,
            avg=self.avg.values,
            mask=mask,
            candidates=candidates,
            focused=focused,
        )

    def update_focus(self, target_px: float):
        self.focus = focus_step(self.focus, target_px)
