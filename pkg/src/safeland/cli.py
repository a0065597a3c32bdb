"""Command-line front end: world generation, episode runs, A/B batches,
and metric re-aggregation.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .controller import ControllerParams
from .harness import BatchConfig, aggregate, read_metrics, run_batch, write_summary
from .segmentation import NoiseParams, SegmentationError, ServiceClient
from .sim import EpisodeConfig, OracleBackend, Outcome, RemoteBackend, run_episode, write_trajectory_csv
from .world import CameraModel, GeneratorParams, generate_world, load_world, save_world

DEFAULT_PROMPTS = ["grass", "open field", "park"]
DEMO_WORLD_SEED = 7


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="safeland", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-world", help="generate and save a labeled world")
    g.add_argument("--seed", type=int, default=DEMO_WORLD_SEED)
    g.add_argument("--width-m", type=float, default=512.0)
    g.add_argument("--height-m", type=float, default=512.0)
    g.add_argument("--meters-per-cell", type=float, default=0.25)
    g.add_argument("--clutter", type=float, default=1.0, help="scales all feature densities, 0..1")
    g.add_argument("--out", required=True, help="output path base (writes .png and .json)")

    r = sub.add_parser("run", help="run a single episode")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--focus", choices=["on", "off"], default="on")
    r.add_argument("--world", default=None, help="world file base; default: demo world from seed 7")
    r.add_argument("--out", default="out/run")
    r.add_argument("--backend", choices=["oracle", "remote"], default="oracle")
    r.add_argument("--backend-url", default="http://127.0.0.1:8400")
    r.add_argument("--flip-prob", type=float, default=0.0)
    r.add_argument("--salt-prob", type=float, default=0.0)
    r.add_argument("--jitter-px", type=int, default=0)
    r.add_argument("--image-size", type=int, default=129)
    r.add_argument("--fov-deg", type=float, default=90.0)
    r.add_argument("--start-x", type=float, default=None)
    r.add_argument("--start-y", type=float, default=None)
    r.add_argument("--max-time", type=float, default=1200.0)
    r.add_argument("--dt", type=float, default=0.1)
    r.add_argument("--dump-debug-frames", action="store_true")

    b = sub.add_parser("batch", help="run a multi-episode, multi-arm experiment")
    b.add_argument("--config", default=None, help="JSON file mirroring BatchConfig")
    b.add_argument("--episodes", type=int, default=None)
    b.add_argument("--seed", type=int, default=None, help="base seed override")
    b.add_argument("--out", default=None, help="output directory override")
    b.add_argument("--jobs", type=int, default=None)

    p = sub.add_parser("report", help="re-aggregate an existing metrics.csv")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", default=None, help="summary path; default alongside metrics.csv")
    return parser


def _cmd_gen_world(args) -> int:
    world = generate_world(
        seed=args.seed,
        width_m=args.width_m,
        height_m=args.height_m,
        meters_per_cell=args.meters_per_cell,
        clutter=GeneratorParams.scaled(args.clutter),
    )
    png, meta = save_world(world, args.out)
    print(f"wrote {png} and {meta} (safe fraction {world.safe_fraction:.3f})")
    return 0


def _cmd_run(args) -> int:
    if args.world is not None:
        world = load_world(args.world)
    else:
        world = generate_world(DEMO_WORLD_SEED, 512.0, 512.0, 0.25, GeneratorParams())
    cam = CameraModel(math.radians(args.fov_deg), args.image_size, args.image_size)
    noise = NoiseParams(args.flip_prob, args.salt_prob, args.jitter_px, seed=args.seed)
    controller = ControllerParams(rng_seed=args.seed)
    if args.start_x is not None or args.start_y is not None:
        if args.start_x is None or args.start_y is None:
            raise ValueError("--start-x and --start-y must be given together")
        start = (args.start_x, args.start_y)
    else:
        inset = 100.0 * math.tan(cam.horizontal_fov / 2.0)
        rng = np.random.default_rng([args.seed, 0, 17])
        start = (
            float(rng.uniform(inset, world.width_m - inset)),
            float(rng.uniform(inset, world.height_m - inset)),
        )
    cfg = EpisodeConfig(
        seed=args.seed,
        start_x=start[0],
        start_y=start[1],
        max_time=args.max_time,
        dt=args.dt,
        focus_enabled=args.focus == "on",
        noise=noise,
        controller=controller,
        camera=cam,
    )
    if args.backend == "oracle":
        backend = OracleBackend(noise)
    else:
        backend = RemoteBackend(ServiceClient(args.backend_url), DEFAULT_PROMPTS)
    out = Path(args.out)
    debug_dir = out / "debug" if args.dump_debug_frames else None
    record = run_episode(world, cfg, backend, debug_dir=debug_dir)
    write_trajectory_csv(record, out / "trajectory.csv")
    print(
        f"outcome={record.outcome.value} time_s={record.time_s:.1f} "
        f"horiz_dist_m={record.horiz_dist_m:.2f} restarts={record.restarts}"
    )
    if record.outcome is Outcome.ERROR:
        print(f"backend error: {record.error}", file=sys.stderr)
        return 2
    return 0


def _cmd_batch(args) -> int:
    if args.config is not None:
        cfg = BatchConfig.from_json(args.config)
    else:
        cfg = BatchConfig()
    overrides = {}
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    stats = run_batch(cfg)
    for arm in stats.arms:
        print(
            f"{arm.name}: {arm.successes}/{arm.episodes} successes "
            f"(rate {arm.success_rate:.2f})"
        )
    return 0


def _cmd_report(args) -> int:
    rows = read_metrics(args.metrics)
    stats = aggregate(rows)
    out = Path(args.out) if args.out else Path(args.metrics).parent / "summary.json"
    write_summary(stats, out)
    print(f"wrote {out}")
    return 0


_COMMANDS = {
    "gen-world": _cmd_gen_world,
    "run": _cmd_run,
    "batch": _cmd_batch,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"safeland: config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, SegmentationError) as exc:
        print(f"safeland: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
