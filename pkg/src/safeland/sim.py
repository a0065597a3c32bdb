"""Fixed-step kinematic episode loop.

Each step renders the nadir view, segments it, post-processes the mask,
steps the state machine, and integrates the velocity command. Episodes are
pure functions of (world, config, backend): identical inputs replay to
bit-identical records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .controller import (
    ControllerParams,
    LandingState,
    StateTag,
    VelocityCommand,
    compute_velocity,
    projected_safe_radius_px,
    step_state_machine,
)
from .pipeline import BestPixel, LandingPipeline
from .segmentation import NoiseParams, RawHeatmap, SegmentationError, ServiceClient, label_image_to_rgb, oracle_segment, remote_segment
from .world import CameraModel, WorldModel, ground_truth_safe_disc, render_view


class Outcome(Enum):
    SUCCESS = "SUCCESS"  # reached the decision altitude in LANDING over a truly safe disc
    TIMEOUT = "TIMEOUT"  # exceeded the episode time budget
    UNSAFE = "UNSAFE"    # reached the decision altitude, but the ground truth disc is unsafe
    ERROR = "ERROR"      # segmentation backend failure; not counted as TIMEOUT


@dataclass(frozen=True)
class UavState:
    x: float
    y: float
    z: float
    t: float
    dt: float


class OracleBackend:
    """Segments views from ground truth, with the configured noise models."""

    def __init__(self, noise: NoiseParams):
        self.noise = noise

    def segment(self, view: np.ndarray, frame_index: int) -> RawHeatmap:
        return oracle_segment(view, self.noise, frame_index)


class RemoteBackend:
    """Segments views through the /v1/segment service."""

    def __init__(self, client: ServiceClient, prompts: list[str], threshold: float = 0.5):
        self.client = client
        self.prompts = prompts
        self.threshold = threshold

    def segment(self, view: np.ndarray, frame_index: int) -> RawHeatmap:
        rgb = label_image_to_rgb(view)
        return remote_segment(self.client, rgb, self.prompts, self.threshold, frame_index)


def default_camera() -> CameraModel:
    return CameraModel(horizontal_fov=math.pi / 2.0, image_width=129, image_height=129)


@dataclass(frozen=True)
class EpisodeConfig:
    seed: int
    start_x: float
    start_y: float
    start_z: float = 100.0
    max_time: float = 1200.0
    dt: float = 0.1
    focus_enabled: bool = True
    noise: NoiseParams = field(default_factory=NoiseParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    camera: CameraModel = field(default_factory=default_camera)
    ema_alpha: float = 0.2
    bin_threshold: float = 0.5
    focus_lambda: float = 0.1

    def __post_init__(self):
        if self.dt <= 0 or self.max_time <= 0 or self.start_z <= 0:
            raise ValueError("dt, max_time and start_z must be positive")


@dataclass(frozen=True)
class TrajectoryStep:
    t: float
    x: float
    y: float
    z: float
    vx: float
    vy: float
    vz: float
    state: str
    r_focus: float
    best: BestPixel | None


@dataclass
class EpisodeRecord:
    outcome: Outcome
    time_s: float
    horiz_dist_m: float
    restarts: int
    trajectory: list[TrajectoryStep]
    final: UavState
    final_state: StateTag
    error: str | None = None


def integrate(u: UavState, cmd: VelocityCommand, params: ControllerParams) -> UavState:
    """First-order step; altitude stays in [0.5, 1.05 * safe_altitude]."""
    if u.dt <= 0:
        raise ValueError("dt must be positive")
    z = u.z + cmd.vz * u.dt
    z = min(max(z, 0.5), 1.05 * params.safe_altitude)
    return replace(u, x=u.x + cmd.vx * u.dt, y=u.y + cmd.vy * u.dt, z=z, t=u.t + u.dt)


def evaluate_outcome(world: WorldModel, final: UavState, params: ControllerParams) -> Outcome:
    """Grades a terminal pose: success needs both the altitude gate and a
    ground-truth-safe disc of the configured radius under the UAV."""
    if final.z > params.success_altitude:
        return Outcome.TIMEOUT
    if ground_truth_safe_disc(world, final.x, final.y, params.safe_radius_s):
        return Outcome.SUCCESS
    return Outcome.UNSAFE


def _dump_debug_frames(debug_dir: Path, frame: int, result) -> None:
    debug_dir.mkdir(parents=True, exist_ok=True)
    grids = {
        "avg": np.rint(result.avg * 255).astype(np.uint8),
        "mask": (result.mask * 255).astype(np.uint8),
        "candidates": (result.candidates * 255).astype(np.uint8),
        "focused": (result.focused * 255).astype(np.uint8),
    }
    for name, grid in grids.items():
        Image.fromarray(grid, mode="L").save(debug_dir / f"{frame:06d}_{name}.png")


def run_episode(
    world: WorldModel,
    cfg: EpisodeConfig,
    backend,
    debug_dir: str | Path | None = None,
    debug_every: int = 50,
) -> EpisodeRecord:
    """Runs the closed loop until the landing decision point or the time cap.

    The loop ends as soon as the UAV is in LANDING at or below the success
    altitude; the recorded outcome then also checks the ground-truth disc.
    A backend failure aborts with Outcome.ERROR.
    """
    if not world.contains(cfg.start_x, cfg.start_y):
        raise ValueError(f"start ({cfg.start_x}, {cfg.start_y}) outside world bounds")
    params = cfg.controller
    cam = cfg.camera
    pipe = LandingPipeline(cam, alpha=cfg.ema_alpha, threshold=cfg.bin_threshold, lam=cfg.focus_lambda)
    u = UavState(x=cfg.start_x, y=cfg.start_y, z=cfg.start_z, t=0.0, dt=cfg.dt)
    state = LandingState.initial()
    trajectory: list[TrajectoryStep] = []
    dist = 0.0
    frame = 0
    outcome = Outcome.TIMEOUT
    error = None
    cmd = VelocityCommand(0.0, 0.0, 0.0)
    view = None
    view_pose = None

    while u.t < cfg.max_time - 1e-9:
        if view_pose != (u.x, u.y, u.z):  # hovering reuses the last render
            view = render_view(world, cam, u.x, u.y, u.z)
            view_pose = (u.x, u.y, u.z)
        try:
            raw = backend.segment(view, frame)
        except SegmentationError as exc:
            outcome, error = Outcome.ERROR, str(exc)
            break
        s_px = projected_safe_radius_px(params.safe_radius_s, u.z, cam)
        result = pipe.process(raw, s_px)
        if debug_dir is not None and frame % debug_every == 0:
            _dump_debug_frames(Path(debug_dir), frame, result)
        state, target = step_state_machine(
            state, result.best, result.safe_fraction, u.z, u.t, cam, params
        )
        cmd = compute_velocity(state, result.best, u.z, cam, params)
        trajectory.append(
            TrajectoryStep(
                t=u.t, x=u.x, y=u.y, z=u.z,
                vx=cmd.vx, vy=cmd.vy, vz=cmd.vz,
                state=state.tag.value, r_focus=pipe.focus.r_focus, best=result.best,
            )
        )
        # No-focus ablation: the radius is pinned fully open.
        resolved = pipe.r_max if not cfg.focus_enabled else target.resolve(s_px, pipe.r_max)
        pipe.update_focus(resolved)
        nxt = integrate(u, cmd, params)
        dist += math.hypot(nxt.x - u.x, nxt.y - u.y)
        u = nxt
        frame += 1
        if state.tag is StateTag.LANDING and u.z <= params.success_altitude:
            outcome = evaluate_outcome(world, u, params)
            break

    # Terminal snapshot so the trajectory is self-contained.
    trajectory.append(
        TrajectoryStep(
            t=u.t, x=u.x, y=u.y, z=u.z, vx=0.0, vy=0.0, vz=0.0,
            state=state.tag.value, r_focus=pipe.focus.r_focus, best=None,
        )
    )
    return EpisodeRecord(
        outcome=outcome,
        time_s=u.t,
        horiz_dist_m=dist,
        restarts=state.restarts,
        trajectory=trajectory,
        final=u,
        final_state=state.tag,
        error=error,
    )


TRAJECTORY_HEADER = "t,x,y,z,vx,vy,vz,state,r_focus,best_u,best_v,score"


def trajectory_csv_lines(record: EpisodeRecord) -> list[str]:
    lines = [TRAJECTORY_HEADER]
    for s in record.trajectory:
        if s.best is None:
            bu = bv = sc = ""
        else:
            bu, bv, sc = str(s.best.u), str(s.best.v), f"{s.best.score:.12g}"
        lines.append(
            f"{s.t:.3f},{s.x:.6f},{s.y:.6f},{s.z:.6f},"
            f"{s.vx:.6f},{s.vy:.6f},{s.vz:.6f},{s.state},{s.r_focus:.6f},{bu},{bv},{sc}"
        )
    return lines


def write_trajectory_csv(record: EpisodeRecord, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(trajectory_csv_lines(record)) + "\n")
