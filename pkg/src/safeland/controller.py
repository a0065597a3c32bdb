"""Six-state landing state machine and image-space velocity servoing.

The controller is a deterministic transducer: (state, frame inputs) ->
(state, focus target, velocity command). It never touches image grids; the
pipeline hands it the best pixel and the mask fraction inside the focus
disc, and it hands back a symbolic focus target the caller resolves against
the projected safe radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .pipeline import BestPixel
from .world import CameraModel


class StateTag(Enum):
    SEARCHING = "SEARCHING"    # coarse search from the safe altitude
    AIMING = "AIMING"          # refined alignment over a candidate spot
    LANDING = "LANDING"        # descend while monitoring the spot
    WAITING = "WAITING"        # hold position after losing the spot
    CLIMBING = "CLIMBING"      # return to the safe altitude
    RESTARTING = "RESTARTING"  # translate to a new search start


# The only legal edges; the model test asserts nothing else is reachable.
ALLOWED_TRANSITIONS = frozenset(
    {
        (StateTag.SEARCHING, StateTag.AIMING),
        (StateTag.AIMING, StateTag.LANDING),
        (StateTag.LANDING, StateTag.WAITING),
        (StateTag.WAITING, StateTag.LANDING),
        (StateTag.WAITING, StateTag.CLIMBING),
        (StateTag.CLIMBING, StateTag.RESTARTING),
        (StateTag.RESTARTING, StateTag.SEARCHING),
    }
)


@dataclass(frozen=True)
class LandingState:
    tag: StateTag = StateTag.SEARCHING
    entered_at: float = 0.0
    consecutive_aligned_frames: int = 0
    restarts: int = 0

    @classmethod
    def initial(cls, t: float = 0.0) -> "LandingState":
        return cls(tag=StateTag.SEARCHING, entered_at=t)


@dataclass(frozen=True)
class FocusTarget:
    """Symbolic focus-radius target: either fully open or a multiple of the
    projected safe radius."""

    scale: float | None  # None -> r_max

    @classmethod
    def full(cls) -> "FocusTarget":
        return cls(scale=None)

    @classmethod
    def scaled(cls, factor: float) -> "FocusTarget":
        return cls(scale=factor)

    def resolve(self, s_px: float, r_max: float) -> float:
        return r_max if self.scale is None else self.scale * s_px


@dataclass(frozen=True)
class VelocityCommand:
    """World-frame velocity, camera axis-aligned."""

    vx: float
    vy: float
    vz: float


@dataclass(frozen=True)
class ControllerParams:
    safe_radius_s: float = 1.5     # meters of clearance the UAV must keep
    v_xy_max: float = 3.0          # m/s, models the bank-angle speed limit
    v_z_down: float = 1.0          # m/s, slow enough to keep re-centering during descent
    v_z_up: float = 1.5            # m/s
    k_p: float = 0.5               # 1/s proportional gain on ground offset
    eps_search: float = 0.05       # coarse alignment gate, fraction of width
    eps_aim: float = 0.02          # fine alignment gate, fraction of width
    k_frames: int = 10             # consecutive aligned frames per gate
    t_wait_max: float = 5.0        # seconds before a lost spot is abandoned
    tau_safe: float = 0.6          # min mask fraction inside the focus disc
    safe_altitude: float = 100.0   # meters
    success_altitude: float = 20.0 # meters, the landing decision point
    restart_distance: float = 40.0 # meters translated per restart
    focus_factor_aiming: float = 6.0
    focus_factor_landing: float = 2.0
    rng_seed: int = 0              # drives sweep and restart headings

    def __post_init__(self):
        positive = (
            "safe_radius_s", "v_xy_max", "v_z_down", "v_z_up", "k_p",
            "eps_search", "eps_aim", "k_frames", "t_wait_max",
            "safe_altitude", "success_altitude", "restart_distance",
            "focus_factor_aiming", "focus_factor_landing",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.eps_aim > self.eps_search:
            raise ValueError("eps_aim must be <= eps_search")
        if not 0.0 < self.tau_safe <= 1.0:
            raise ValueError("tau_safe must be in (0, 1]")
        if self.success_altitude >= self.safe_altitude:
            raise ValueError("success_altitude must be < safe_altitude")


def projected_safe_radius_px(s_m: float, z: float, cam: CameraModel) -> float:
    """Safe radius projected into pixels at altitude z."""
    if z <= 0:
        raise ValueError(f"altitude must be positive, got {z}")
    return s_m / cam.ground_sample_distance(z)


def step_state_machine(
    state: LandingState,
    best: BestPixel | None,
    safe_fraction_in_focus: float,
    z: float,
    t: float,
    cam: CameraModel,
    params: ControllerParams,
) -> tuple[LandingState, FocusTarget]:
    """One transition step; returns the new state and its focus target.

    Restart traversal is inferred from time: the restart leg runs at
    v_xy_max, so it completes after restart_distance / v_xy_max seconds.
    """
    tag = state.tag
    entered = state.entered_at
    count = state.consecutive_aligned_frames
    restarts = state.restarts
    width = cam.image_width

    if tag is StateTag.SEARCHING:
        aligned = best is not None and best.c_dist <= params.eps_search * width
        count = count + 1 if aligned else 0
        if count >= params.k_frames:
            tag, entered, count = StateTag.AIMING, t, 0
    elif tag is StateTag.AIMING:
        aligned = best is not None and best.c_dist <= params.eps_aim * width
        count = count + 1 if aligned else 0
        if count >= params.k_frames:
            tag, entered, count = StateTag.LANDING, t, 0
    elif tag is StateTag.LANDING:
        if best is None or safe_fraction_in_focus < params.tau_safe:
            tag, entered = StateTag.WAITING, t
    elif tag is StateTag.WAITING:
        if t - entered >= params.t_wait_max:
            tag, entered = StateTag.CLIMBING, t
        elif best is not None and safe_fraction_in_focus >= params.tau_safe:
            tag, entered = StateTag.LANDING, t
    elif tag is StateTag.CLIMBING:
        if z >= params.safe_altitude:
            tag, entered = StateTag.RESTARTING, t
            restarts += 1
    elif tag is StateTag.RESTARTING:
        if t - entered >= params.restart_distance / params.v_xy_max:
            tag, entered, count = StateTag.SEARCHING, t, 0

    new_state = LandingState(
        tag=tag, entered_at=entered, consecutive_aligned_frames=count, restarts=restarts
    )
    if tag is StateTag.AIMING:
        target = FocusTarget.scaled(params.focus_factor_aiming)
    elif tag in (StateTag.LANDING, StateTag.WAITING):
        target = FocusTarget.scaled(params.focus_factor_landing)
    else:
        target = FocusTarget.full()
    return new_state, target


_SWEEP, _RESTART = 1, 2


def _heading_velocity(params: ControllerParams, restarts: int, purpose: int) -> tuple[float, float]:
    """Constant seeded heading at full speed; distinct per restart index."""
    rng = np.random.default_rng([params.rng_seed, restarts, purpose])
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return params.v_xy_max * math.cos(theta), params.v_xy_max * math.sin(theta)


def _servo_xy(best: BestPixel, z: float, cam: CameraModel, params: ControllerParams) -> tuple[float, float]:
    """Proportional command toward the best pixel's ground projection."""
    mpp = cam.ground_sample_distance(z)
    du = (best.u - (cam.image_width - 1) / 2.0) * mpp
    dv = (best.v - (cam.image_height - 1) / 2.0) * mpp
    vx, vy = params.k_p * du, params.k_p * dv
    speed = math.hypot(vx, vy)
    if speed > params.v_xy_max:
        scale = params.v_xy_max / speed
        vx, vy = vx * scale, vy * scale
    return vx, vy


def compute_velocity(
    state: LandingState,
    best: BestPixel | None,
    z: float,
    cam: CameraModel,
    params: ControllerParams,
) -> VelocityCommand:
    """Velocity for the current state and frame inputs.

    Descent in LANDING pauses whenever the best pixel drifts outside the fine
    alignment gate; re-centering then takes over so the UAV cannot spiral
    down diagonally.
    """
    tag = state.tag
    if tag is StateTag.WAITING:
        return VelocityCommand(0.0, 0.0, 0.0)
    if tag is StateTag.CLIMBING:
        return VelocityCommand(0.0, 0.0, params.v_z_up)
    if tag is StateTag.RESTARTING:
        vx, vy = _heading_velocity(params, state.restarts, _RESTART)
        return VelocityCommand(vx, vy, 0.0)
    if tag is StateTag.SEARCHING:
        if best is None:
            vx, vy = _heading_velocity(params, state.restarts, _SWEEP)
            return VelocityCommand(vx, vy, 0.0)
        vx, vy = _servo_xy(best, z, cam, params)
        return VelocityCommand(vx, vy, 0.0)
    if tag is StateTag.AIMING:
        if best is None:
            return VelocityCommand(0.0, 0.0, 0.0)
        vx, vy = _servo_xy(best, z, cam, params)
        return VelocityCommand(vx, vy, 0.0)
    # LANDING
    if best is None:
        return VelocityCommand(0.0, 0.0, 0.0)
    if best.c_dist > params.eps_aim * cam.image_width:
        vx, vy = _servo_xy(best, z, cam, params)
        return VelocityCommand(vx, vy, 0.0)
    return VelocityCommand(0.0, 0.0, -params.v_z_down)
