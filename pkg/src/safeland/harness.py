"""Batch experiment harness.

Runs paired-arm episode batches (the A/B focus ablation), writes per-episode
metrics and trajectories, and aggregates success-only summary statistics.
Episode i uses seed base_seed + i, the same world, start position, and noise
stream in every arm, so cross-arm comparisons are paired.
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controller import ControllerParams
from .segmentation import NoiseParams
from .sim import EpisodeConfig, Outcome, OracleBackend, run_episode, write_trajectory_csv
from .world import CameraModel, GeneratorParams, WorldModel, generate_world, load_world

METRICS_HEADER = "arm,seed,start_x,start_y,outcome,time_s,horiz_dist_m,restarts"


@dataclass(frozen=True)
class ArmSpec:
    name: str
    focus_enabled: bool


def default_arms() -> list[ArmSpec]:
    return [ArmSpec("dynamic_focus", True), ArmSpec("no_focus", False)]


@dataclass(frozen=True)
class BatchConfig:
    episodes: int = 20
    base_seed: int = 0
    output_dir: str = "out/batch"
    jobs: int = 1
    arms: list[ArmSpec] = field(default_factory=default_arms)
    # world: either a file pair or generation parameters (fresh world per episode)
    world_path: str | None = None
    world_width_m: float = 512.0
    world_height_m: float = 512.0
    meters_per_cell: float = 0.25
    clutter: GeneratorParams = field(default_factory=GeneratorParams)
    # per-episode defaults
    camera: CameraModel = field(default_factory=lambda: CameraModel(math.pi / 2.0, 129, 129))
    noise_component_flip_prob: float = 0.0
    noise_salt_pepper_prob: float = 0.0
    noise_boundary_jitter_px: int = 0
    controller: ControllerParams = field(default_factory=ControllerParams)
    start_z: float = 100.0
    max_time: float = 1200.0
    dt: float = 0.1
    ema_alpha: float = 0.2
    bin_threshold: float = 0.5
    focus_lambda: float = 0.1

    def __post_init__(self):
        if self.episodes <= 0:
            raise ValueError("episodes must be positive")
        if self.jobs <= 0:
            raise ValueError("jobs must be positive")
        if not self.arms:
            raise ValueError("at least one arm is required")
        names = [a.name for a in self.arms]
        if len(set(names)) != len(names):
            raise ValueError("arm names must be unique")

    # -- JSON config round-trip ------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "BatchConfig":
        kwargs: dict = {}
        for key in ("episodes", "base_seed", "output_dir", "jobs"):
            if key in doc:
                kwargs[key] = doc[key]
        if "arms" in doc:
            kwargs["arms"] = [ArmSpec(a["name"], bool(a["focus_enabled"])) for a in doc["arms"]]
        world = doc.get("world", {})
        if "path" in world:
            kwargs["world_path"] = world["path"]
        for src, dst in (
            ("width_m", "world_width_m"),
            ("height_m", "world_height_m"),
            ("meters_per_cell", "meters_per_cell"),
        ):
            if src in world:
                kwargs[dst] = float(world[src])
        if "clutter" in world:
            c = world["clutter"]
            kwargs["clutter"] = GeneratorParams.scaled(float(c)) if isinstance(c, (int, float)) else GeneratorParams(**c)
        cam = doc.get("camera", {})
        if cam:
            kwargs["camera"] = CameraModel(
                horizontal_fov=math.radians(float(cam.get("horizontal_fov_deg", 90.0))),
                image_width=int(cam.get("image_width", 129)),
                image_height=int(cam.get("image_height", 129)),
            )
        noise = doc.get("noise", {})
        for src, dst in (
            ("component_flip_prob", "noise_component_flip_prob"),
            ("salt_pepper_prob", "noise_salt_pepper_prob"),
            ("boundary_jitter_px", "noise_boundary_jitter_px"),
        ):
            if src in noise:
                kwargs[dst] = noise[src]
        if "controller" in doc:
            kwargs["controller"] = ControllerParams(**doc["controller"])
        sim = doc.get("sim", {})
        for key in ("start_z", "max_time", "dt", "ema_alpha", "bin_threshold", "focus_lambda"):
            if key in sim:
                kwargs[key] = sim[key]
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "base_seed": self.base_seed,
            "output_dir": self.output_dir,
            "jobs": self.jobs,
            "arms": [{"name": a.name, "focus_enabled": a.focus_enabled} for a in self.arms],
            "world": {
                "path": self.world_path,
                "width_m": self.world_width_m,
                "height_m": self.world_height_m,
                "meters_per_cell": self.meters_per_cell,
                "clutter": dataclasses.asdict(self.clutter),
            },
            "camera": {
                "horizontal_fov_deg": math.degrees(self.camera.horizontal_fov),
                "image_width": self.camera.image_width,
                "image_height": self.camera.image_height,
            },
            "noise": {
                "component_flip_prob": self.noise_component_flip_prob,
                "salt_pepper_prob": self.noise_salt_pepper_prob,
                "boundary_jitter_px": self.noise_boundary_jitter_px,
            },
            "controller": dataclasses.asdict(self.controller),
            "sim": {
                "start_z": self.start_z,
                "max_time": self.max_time,
                "dt": self.dt,
                "ema_alpha": self.ema_alpha,
                "bin_threshold": self.bin_threshold,
                "focus_lambda": self.focus_lambda,
            },
        }

    @classmethod
    def from_json(cls, path: str | Path) -> "BatchConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class MetricsRow:
    arm: str
    seed: int
    start_x: float
    start_y: float
    outcome: str
    time_s: float
    horiz_dist_m: float
    restarts: int


@dataclass(frozen=True)
class ArmSummary:
    name: str
    episodes: int
    successes: int
    success_rate: float
    mean_time_s: float | None       # over successes only
    mean_horiz_dist_m: float | None # over successes only


@dataclass(frozen=True)
class SummaryStats:
    arms: list[ArmSummary]


def episode_world(cfg: BatchConfig, seed: int) -> WorldModel:
    if cfg.world_path is not None:
        return load_world(cfg.world_path)
    return generate_world(
        seed=seed,
        width_m=cfg.world_width_m,
        height_m=cfg.world_height_m,
        meters_per_cell=cfg.meters_per_cell,
        clutter=cfg.clutter,
    )


def sample_start(cfg: BatchConfig, world: WorldModel, index: int) -> tuple[float, float]:
    """Uniform start inside the world inset by the start-altitude footprint
    half-width, so the initial view never leaves the raster."""
    inset = cfg.start_z * math.tan(cfg.camera.horizontal_fov / 2.0)
    if 2.0 * inset >= world.width_m or 2.0 * inset >= world.height_m:
        raise ValueError("world too small for the start-altitude footprint")
    rng = np.random.default_rng([cfg.base_seed, index, 17])
    x = rng.uniform(inset, world.width_m - inset)
    y = rng.uniform(inset, world.height_m - inset)
    return float(x), float(y)


def episode_config(cfg: BatchConfig, seed: int, start: tuple[float, float], arm: ArmSpec) -> EpisodeConfig:
    noise = NoiseParams(
        component_flip_prob=cfg.noise_component_flip_prob,
        salt_pepper_prob=cfg.noise_salt_pepper_prob,
        boundary_jitter_px=cfg.noise_boundary_jitter_px,
        seed=seed,
    )
    controller = dataclasses.replace(cfg.controller, rng_seed=seed)
    return EpisodeConfig(
        seed=seed,
        start_x=start[0],
        start_y=start[1],
        start_z=cfg.start_z,
        max_time=cfg.max_time,
        dt=cfg.dt,
        focus_enabled=arm.focus_enabled,
        noise=noise,
        controller=controller,
        camera=cfg.camera,
        ema_alpha=cfg.ema_alpha,
        bin_threshold=cfg.bin_threshold,
        focus_lambda=cfg.focus_lambda,
    )


def _run_one_index(cfg: BatchConfig, index: int) -> list[MetricsRow]:
    """All arms for one episode index; also writes the trajectory files."""
    seed = cfg.base_seed + index
    world = episode_world(cfg, seed)
    start = sample_start(cfg, world, index)
    out = Path(cfg.output_dir)
    rows = []
    for arm in cfg.arms:
        ecfg = episode_config(cfg, seed, start, arm)
        record = run_episode(world, ecfg, OracleBackend(ecfg.noise))
        write_trajectory_csv(record, out / "trajectories" / f"{arm.name}_{seed}.csv")
        rows.append(
            MetricsRow(
                arm=arm.name,
                seed=seed,
                start_x=start[0],
                start_y=start[1],
                outcome=record.outcome.value,
                time_s=record.time_s,
                horiz_dist_m=record.horiz_dist_m,
                restarts=record.restarts,
            )
        )
    return rows


def run_batch(cfg: BatchConfig) -> SummaryStats:
    """Runs episodes x arms, writes metrics.csv, summary.json and per-episode
    trajectories under output_dir; fully deterministic given cfg."""
    out = Path(cfg.output_dir)
    (out / "trajectories").mkdir(parents=True, exist_ok=True)  # fails before any episode runs

    if cfg.jobs == 1:
        per_index = [_run_one_index(cfg, i) for i in range(cfg.episodes)]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            per_index = list(pool.map(_run_one_index, [cfg] * cfg.episodes, range(cfg.episodes)))

    arm_order = {a.name: k for k, a in enumerate(cfg.arms)}
    rows = sorted(
        (row for group in per_index for row in group),
        key=lambda r: (arm_order[r.arm], r.seed),
    )
    write_metrics(rows, out / "metrics.csv")
    stats = aggregate(read_metrics(out / "metrics.csv"))
    write_summary(stats, out / "summary.json")
    return stats


# ---------------------------------------------------------------------------
# Metrics files and aggregation


def write_metrics(rows: list[MetricsRow], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [METRICS_HEADER]
    for r in rows:
        lines.append(
            f"{r.arm},{r.seed},{r.start_x:.6f},{r.start_y:.6f},"
            f"{r.outcome},{r.time_s:.3f},{r.horiz_dist_m:.6f},{r.restarts}"
        )
    path.write_text("\n".join(lines) + "\n")


def read_metrics(path: str | Path) -> list[MetricsRow]:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != METRICS_HEADER:
        raise ValueError(f"unrecognized metrics header in {path}")
    rows = []
    for line in lines[1:]:
        arm, seed, sx, sy, outcome, t, d, restarts = line.split(",")
        rows.append(
            MetricsRow(
                arm=arm, seed=int(seed), start_x=float(sx), start_y=float(sy),
                outcome=outcome, time_s=float(t), horiz_dist_m=float(d), restarts=int(restarts),
            )
        )
    return rows


def aggregate(rows: list[MetricsRow]) -> SummaryStats:
    """Counts, rates, and success-only means; no successes yields null means."""
    order: list[str] = []
    grouped: dict[str, list[MetricsRow]] = {}
    for r in rows:
        if r.arm not in grouped:
            order.append(r.arm)
            grouped[r.arm] = []
        grouped[r.arm].append(r)
    arms = []
    for name in order:
        group = grouped[name]
        wins = [r for r in group if r.outcome == Outcome.SUCCESS.value]
        n = len(group)
        arms.append(
            ArmSummary(
                name=name,
                episodes=n,
                successes=len(wins),
                success_rate=len(wins) / n,
                mean_time_s=sum(r.time_s for r in wins) / len(wins) if wins else None,
                mean_horiz_dist_m=sum(r.horiz_dist_m for r in wins) / len(wins) if wins else None,
            )
        )
    return SummaryStats(arms=arms)


def write_summary(stats: SummaryStats, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "arms": [
            {
                "name": a.name,
                "episodes": a.episodes,
                "successes": a.successes,
                "success_rate": a.success_rate,
                "mean_time_s": a.mean_time_s,
                "mean_horiz_dist_m": a.mean_horiz_dist_m,
            }
            for a in stats.arms
        ]
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")
