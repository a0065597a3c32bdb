"""Labeled terrain worlds and the nadir camera that views them.

A world is a rectangular raster of terrain classes with a uniform, square
metric cell size. Worlds are generated procedurally from a seed, written as
an 8-bit class-index PNG plus a JSON sidecar, and sampled by a pinhole nadir
camera to produce label images for the segmentation stage.

Conventions: world x runs along raster columns, world y along raster rows,
origin at the top-left corner of the raster. Cell (i, j) covers the square
[j*mpc, (j+1)*mpc) x [i*mpc, (i+1)*mpc) in meters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from enum import IntEnum
from pathlib import Path

import numpy as np
from PIL import Image


class TerrainClass(IntEnum):
    """Terrain label for a single world cell."""

    GRASS = 0
    FIELD = 1
    WATER = 2
    BUILDING = 3
    ROAD = 4
    TREE = 5
    VEHICLE = 6
    PERSON = 7

    @property
    def is_safe(self) -> bool:
        return self in _SAFE_CLASSES


_SAFE_CLASSES = frozenset({TerrainClass.GRASS, TerrainClass.FIELD})

# Lookup table: class index -> landable. Safety is a pure function of the tag.
SAFE_LOOKUP = np.zeros(len(TerrainClass), dtype=bool)
SAFE_LOOKUP[[TerrainClass.GRASS, TerrainClass.FIELD]] = True

# RGB rendering of class indices, used for debug dumps and the wire protocol.
PALETTE = np.array(
    [
        (96, 160, 64),    # GRASS
        (190, 180, 90),   # FIELD
        (52, 104, 192),   # WATER
        (120, 120, 128),  # BUILDING
        (64, 64, 64),     # ROAD
        (24, 96, 32),     # TREE
        (200, 40, 40),    # VEHICLE
        (255, 128, 160),  # PERSON
    ],
    dtype=np.uint8,
)


def safe_mask(labels: np.ndarray) -> np.ndarray:
    """Boolean grid of landable cells for a class-index grid."""
    return SAFE_LOOKUP[labels]


@dataclass(frozen=True)
class CameraModel:
    """Nadir pinhole camera, axis-aligned with the world (no yaw or tilt)."""

    horizontal_fov: float  # radians
    image_width: int
    image_height: int

    def __post_init__(self):
        if not 0.0 < self.horizontal_fov < math.pi:
            raise ValueError(f"horizontal_fov must be in (0, pi), got {self.horizontal_fov}")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")

    def footprint_width_m(self, z: float) -> float:
        """Ground width covered by the image at altitude z."""
        return 2.0 * z * math.tan(self.horizontal_fov / 2.0)

    def ground_sample_distance(self, z: float) -> float:
        """Meters per pixel at altitude z (square pixels)."""
        return self.footprint_width_m(z) / self.image_width

    @property
    def half_diagonal_px(self) -> float:
        """Radius of the circle that circumscribes the image."""
        return math.hypot(self.image_width, self.image_height) / 2.0


@dataclass(frozen=True)
class GeneratorParams:
    """Per-family clutter densities in [0, 1], scaling feature counts."""

    fields: float = 1.0
    water: float = 1.0
    roads: float = 1.0
    buildings: float = 1.0
    trees: float = 1.0
    vehicles: float = 1.0
    persons: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"density {f.name} must be in [0, 1], got {v}")

    @classmethod
    def none(cls) -> "GeneratorParams":
        return cls(0, 0, 0, 0, 0, 0, 0)

    @classmethod
    def scaled(cls, clutter: float) -> "GeneratorParams":
        """All default densities multiplied by a single scalar in [0, 1]."""
        return cls(*([clutter] * 7))


@dataclass
class WorldModel:
    """Immutable georeferenced terrain-class raster."""

    labels: np.ndarray  # uint8 class indices, shape (rows, cols)
    meters_per_cell: float
    seed: int
    safe_fraction: float = field(default=0.0)

    def __post_init__(self):
        if self.labels.ndim != 2 or self.labels.size == 0:
            raise ValueError("labels grid must be 2-D and non-empty")
        if self.meters_per_cell <= 0:
            raise ValueError("meters_per_cell must be positive")
        if self.labels.max(initial=0) >= len(TerrainClass):
            raise ValueError("labels contain unknown class indices")
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        self.labels.flags.writeable = False  # shared read-only across episodes
        self.safe_fraction = float(safe_mask(self.labels).mean())

    @property
    def rows(self) -> int:
        return self.labels.shape[0]

    @property
    def cols(self) -> int:
        return self.labels.shape[1]

    @property
    def width_m(self) -> float:
        return self.cols * self.meters_per_cell

    @property
    def height_m(self) -> float:
        return self.rows * self.meters_per_cell

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width_m and 0.0 <= y <= self.height_m


# ---------------------------------------------------------------------------
# Procedural generation

# Feature counts per family at density 1.0 on a 512 m square; counts scale
# linearly with world area. Calibrated so default worlds come out roughly
# half safe, which keeps whole-view trust rare while leaving plenty of
# clear pockets between features.
BASE_FEATURE_COUNTS = {
    "fields": 6,
    "water": 6,
    "roads": 11,
    "buildings": 135,
    "trees": 120,
    "vehicles": 40,
    "persons": 50,
}


def _stamp_ellipse(labels, rng, value, cx, cy, rx, ry):
    r0 = max(int(cy - ry), 0)
    r1 = min(int(cy + ry) + 2, labels.shape[0])
    c0 = max(int(cx - rx), 0)
    c1 = min(int(cx + rx) + 2, labels.shape[1])
    if r0 >= r1 or c0 >= c1:
        return
    rr, cc = np.ogrid[r0:r1, c0:c1]
    inside = ((cc + 0.5 - cx) / rx) ** 2 + ((rr + 0.5 - cy) / ry) ** 2 <= 1.0
    labels[r0:r1, c0:c1][inside] = value


def _stamp_rect(labels, value, r0, c0, r1, c1):
    r0 = max(int(r0), 0)
    c0 = max(int(c0), 0)
    r1 = min(int(r1), labels.shape[0])
    c1 = min(int(c1), labels.shape[1])
    if r0 < r1 and c0 < c1:
        labels[r0:r1, c0:c1] = value


def _stamp_segment(labels, value, p0, p1, half_w):
    """Fills every cell within half_w (cells) of the segment p0-p1 (row, col)."""
    rmin = max(int(min(p0[0], p1[0]) - half_w) - 1, 0)
    rmax = min(int(max(p0[0], p1[0]) + half_w) + 2, labels.shape[0])
    cmin = max(int(min(p0[1], p1[1]) - half_w) - 1, 0)
    cmax = min(int(max(p0[1], p1[1]) + half_w) + 2, labels.shape[1])
    if rmin >= rmax or cmin >= cmax:
        return
    rr, cc = np.ogrid[rmin:rmax, cmin:cmax]
    pr = rr + 0.5 - p0[0]
    pc = cc + 0.5 - p0[1]
    dr = p1[0] - p0[0]
    dc = p1[1] - p0[1]
    l2 = dr * dr + dc * dc
    if l2 == 0:
        d2 = pr**2 + pc**2
    else:
        t = np.clip((pr * dr + pc * dc) / l2, 0.0, 1.0)
        d2 = (pr - t * dr) ** 2 + (pc - t * dc) ** 2
    labels[rmin:rmax, cmin:cmax][d2 <= half_w**2] = value


def _road_waypoints(rng, rows, cols):
    # Crosses the full extent edge to edge with two jittered interior knees.
    if rng.random() < 0.5:  # west -> east
        ys = rng.uniform(0, rows, size=4)
        xs = np.array([0.0, cols / 3.0, 2.0 * cols / 3.0, float(cols)])
        xs[1:3] += rng.uniform(-cols / 8, cols / 8, size=2)
        return list(zip(ys, xs))
    xs = rng.uniform(0, cols, size=4)
    ys = np.array([0.0, rows / 3.0, 2.0 * rows / 3.0, float(rows)])
    ys[1:3] += rng.uniform(-rows / 8, rows / 8, size=2)
    return list(zip(ys, xs))


def generate_world(
    seed: int,
    width_m: float,
    height_m: float,
    meters_per_cell: float,
    clutter: GeneratorParams | None = None,
) -> WorldModel:
    """Builds a seeded world: safe grass/field base with unsafe features.

    Feature counts scale with clutter densities and world area; all stamping
    happens in a fixed order so a given (seed, params) pair is bit-stable.
    """
    if width_m <= 0 or height_m <= 0 or meters_per_cell <= 0:
        raise ValueError("world dimensions and cell size must be positive")
    clutter = GeneratorParams() if clutter is None else clutter

    rng = np.random.default_rng(seed)
    rows = int(round(height_m / meters_per_cell))
    cols = int(round(width_m / meters_per_cell))
    if rows <= 0 or cols <= 0:
        raise ValueError("world must contain at least one cell")
    labels = np.full((rows, cols), TerrainClass.GRASS, dtype=np.uint8)

    mpc = meters_per_cell
    unit = (width_m * height_m) / (512.0 * 512.0)  # counts tuned at 512 m square

    def count(family, density):
        return int(round(BASE_FEATURE_COUNTS[family] * density * unit))

    # Safe texture: large field patches over the grass base.
    for _ in range(count("fields", clutter.fields)):
        cx, cy = rng.uniform(0, cols), rng.uniform(0, rows)
        rx, ry = rng.uniform(30, 90, size=2) / mpc
        _stamp_ellipse(labels, rng, TerrainClass.FIELD, cx, cy, rx, ry)

    for _ in range(count("water", clutter.water)):
        cx, cy = rng.uniform(0, cols), rng.uniform(0, rows)
        rx, ry = rng.uniform(22, 50, size=2) / mpc
        _stamp_ellipse(labels, rng, TerrainClass.WATER, cx, cy, rx, ry)

    for _ in range(count("roads", clutter.roads)):
        pts = _road_waypoints(rng, rows, cols)
        half_w = rng.uniform(2.5, 4.0) / mpc
        for p0, p1 in zip(pts[:-1], pts[1:]):
            _stamp_segment(labels, TerrainClass.ROAD, p0, p1, half_w)

    for _ in range(count("buildings", clutter.buildings)):
        h, w = rng.uniform(15, 45, size=2) / mpc
        r0 = rng.uniform(0, rows - h)
        c0 = rng.uniform(0, cols - w)
        _stamp_rect(labels, TerrainClass.BUILDING, r0, c0, r0 + h, c0 + w)

    for _ in range(count("trees", clutter.trees)):
        cx, cy = rng.uniform(0, cols), rng.uniform(0, rows)
        r = rng.uniform(2.0, 6.0) / mpc
        _stamp_ellipse(labels, rng, TerrainClass.TREE, cx, cy, r, r)

    for _ in range(count("vehicles", clutter.vehicles)):
        h, w = (2.0, 4.5) if rng.random() < 0.5 else (4.5, 2.0)
        r0 = rng.uniform(0, rows - h / mpc)
        c0 = rng.uniform(0, cols - w / mpc)
        _stamp_rect(labels, TerrainClass.VEHICLE, r0, c0, r0 + h / mpc, c0 + w / mpc)

    for _ in range(count("persons", clutter.persons)):
        side = max(0.5 / mpc, 1.0)
        r0 = rng.uniform(0, rows - side)
        c0 = rng.uniform(0, cols - side)
        _stamp_rect(labels, TerrainClass.PERSON, r0, c0, r0 + side, c0 + side)

    return WorldModel(labels=labels, meters_per_cell=mpc, seed=int(seed))


# ---------------------------------------------------------------------------
# Camera


def render_view(world: WorldModel, cam: CameraModel, x: float, y: float, z: float) -> np.ndarray:
    """Nearest-neighbor label image of the ground footprint centered at (x, y).

    The footprint spans ``2*z*tan(fov/2)`` meters horizontally; pixels are
    square. Footprint cells outside the world raster render as WATER so the
    controller treats world edges as unsafe.
    """
    if z <= 0:
        raise ValueError(f"altitude must be positive, got {z}")
    mpp = cam.ground_sample_distance(z)
    gx = x + (np.arange(cam.image_width) - (cam.image_width - 1) / 2.0) * mpp
    gy = y + (np.arange(cam.image_height) - (cam.image_height - 1) / 2.0) * mpp
    ci = np.floor(gx / world.meters_per_cell).astype(np.int64)
    ri = np.floor(gy / world.meters_per_cell).astype(np.int64)
    rv = (ri >= 0) & (ri < world.rows)
    cv = (ci >= 0) & (ci < world.cols)
    out = np.full((cam.image_height, cam.image_width), TerrainClass.WATER, dtype=np.uint8)
    if rv.any() and cv.any():
        out[np.ix_(rv, cv)] = world.labels[np.ix_(ri[rv], ci[cv])]
    return out


def ground_truth_safe_disc(world: WorldModel, x: float, y: float, radius: float) -> bool:
    """True iff the disc lies fully in bounds and every covered cell is safe.

    A cell counts as covered when its center lies within ``radius`` of (x, y).
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if x - radius < 0 or y - radius < 0 or x + radius > world.width_m or y + radius > world.height_m:
        return False
    mpc = world.meters_per_cell
    r0 = max(int((y - radius) / mpc) - 1, 0)
    r1 = min(int((y + radius) / mpc) + 2, world.rows)
    c0 = max(int((x - radius) / mpc) - 1, 0)
    c1 = min(int((x + radius) / mpc) + 2, world.cols)
    rr, cc = np.ogrid[r0:r1, c0:c1]
    covered = ((cc + 0.5) * mpc - x) ** 2 + ((rr + 0.5) * mpc - y) ** 2 <= radius**2
    return bool(safe_mask(world.labels[r0:r1, c0:c1])[covered].all())


# ---------------------------------------------------------------------------
# File pair I/O: <name>.png (class indices) + <name>.json (metadata)


def _base_path(path: str | Path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".png", ".json") else p


def save_world(world: WorldModel, path: str | Path) -> tuple[Path, Path]:
    """Writes the raster PNG and its JSON sidecar; returns both paths."""
    base = _base_path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    png = base.with_suffix(".png")
    meta = base.with_suffix(".json")
    Image.fromarray(world.labels, mode="L").save(png)
    doc = {
        "meters_per_cell": world.meters_per_cell,
        "classes": {str(int(t)): t.name for t in TerrainClass},
        "seed": world.seed,
        "safe_fraction": world.safe_fraction,
    }
    meta.write_text(json.dumps(doc, indent=2) + "\n")
    return png, meta


def load_world(path: str | Path) -> WorldModel:
    base = _base_path(path)
    labels = np.asarray(Image.open(base.with_suffix(".png")), dtype=np.uint8)
    doc = json.loads(base.with_suffix(".json").read_text())
    for idx, name in doc["classes"].items():
        if TerrainClass(int(idx)).name != name:
            raise ValueError(f"class table mismatch at index {idx}: {name}")
    return WorldModel(
        labels=labels.copy(),
        meters_per_cell=float(doc["meters_per_cell"]),
        seed=int(doc["seed"]),
    )
