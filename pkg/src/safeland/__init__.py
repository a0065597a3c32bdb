"""Deterministic UAV safe-landing simulator.

Segmentation-driven visual servoing from 100 m down to the 20 m landing
decision point, with a state-dependent dynamic focus mask, a six-state
landing controller, and a paired-arm experiment harness.
"""

from .controller import (
    ControllerParams,
    FocusTarget,
    LandingState,
    StateTag,
    VelocityCommand,
    compute_velocity,
    projected_safe_radius_px,
    step_state_machine,
)
from .harness import ArmSpec, BatchConfig, SummaryStats, aggregate, run_batch
from .pipeline import (
    AveragedHeatmap,
    BestPixel,
    FocusState,
    LandingPipeline,
    PatchStats,
    apply_focus,
    binarize,
    distance_map,
    ema_update,
    focus_step,
    label_and_stats,
    safe_fraction_in_disc,
    safe_interior,
    select_best_pixel,
)
from .segmentation import (
    NoiseParams,
    RawHeatmap,
    SegmentationError,
    ServiceClient,
    oracle_segment,
    remote_segment,
)
from .sim import (
    EpisodeConfig,
    EpisodeRecord,
    OracleBackend,
    Outcome,
    RemoteBackend,
    UavState,
    evaluate_outcome,
    integrate,
    run_episode,
    write_trajectory_csv,
)
from .world import (
    CameraModel,
    GeneratorParams,
    TerrainClass,
    WorldModel,
    generate_world,
    ground_truth_safe_disc,
    load_world,
    render_view,
    save_world,
)

__version__ = "0.1.0"
