import json
import math

import pytest

from safeland.harness import (
    ArmSpec,
    BatchConfig,
    MetricsRow,
    aggregate,
    read_metrics,
    run_batch,
    write_metrics,
    write_summary,
)
from safeland.world import CameraModel, GeneratorParams


def tiny_batch(tmp_path, **overrides):
    """Small, fast, deterministic batch: clean worlds, quick successes."""
    base = dict(
        episodes=2,
        base_seed=50,
        output_dir=str(tmp_path / "out"),
        clutter=GeneratorParams.none(),
        world_width_m=384.0,
        world_height_m=384.0,
        meters_per_cell=0.5,
        camera=CameraModel(math.pi / 2.0, 65, 65),
        max_time=150.0,
    )
    base.update(overrides)
    return BatchConfig(**base)


def row(arm, seed, outcome, t, d=10.0):
    return MetricsRow(arm, seed, 1.0, 2.0, outcome, t, d, 0)


class TestAggregate:
    def test_success_only_means(self):
        rows = [
            row("a", 1, "SUCCESS", 100.0),
            row("a", 2, "SUCCESS", 200.0),
            row("a", 3, "TIMEOUT", 1200.0),
        ]
        (arm,) = aggregate(rows).arms
        assert arm.successes == 2
        assert arm.mean_time_s == pytest.approx(150.0)

    def test_all_timeout_yields_null_means(self):
        rows = [row("a", i, "TIMEOUT", 1200.0) for i in range(3)]
        (arm,) = aggregate(rows).arms
        assert arm.success_rate == 0.0
        assert arm.mean_time_s is None
        assert arm.mean_horiz_dist_m is None

    def test_published_style_rates(self):
        rows = [row("focus", i, "SUCCESS" if i < 29 else "TIMEOUT", 100.0) for i in range(50)]
        rows += [row("nofocus", i, "SUCCESS" if i < 3 else "TIMEOUT", 100.0) for i in range(50)]
        stats = aggregate(rows)
        assert stats.arms[0].success_rate == pytest.approx(0.58)
        assert stats.arms[1].success_rate == pytest.approx(0.06)

    def test_null_means_serialize_as_json_null(self, tmp_path):
        rows = [row("a", 0, "TIMEOUT", 1200.0)]
        out = tmp_path / "summary.json"
        write_summary(aggregate(rows), out)
        doc = json.loads(out.read_text())
        assert doc["arms"][0]["mean_time_s"] is None


class TestMetricsFile:
    def test_round_trip(self, tmp_path):
        rows = [row("a", 1, "SUCCESS", 12.345), row("b", 1, "UNSAFE", 99.9)]
        path = tmp_path / "metrics.csv"
        write_metrics(rows, path)
        back = read_metrics(path)
        assert [r.arm for r in back] == ["a", "b"]
        assert back[0].time_s == pytest.approx(12.345)

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("nope\n")
        with pytest.raises(ValueError):
            read_metrics(path)


class TestRunBatch:
    def test_paired_starts_and_outputs(self, tmp_path):
        cfg = tiny_batch(tmp_path)
        stats = run_batch(cfg)
        out = tmp_path / "out"
        rows = read_metrics(out / "metrics.csv")
        assert len(rows) == 4  # 2 episodes x 2 arms
        by_seed = {}
        for r in rows:
            by_seed.setdefault(r.seed, []).append((r.start_x, r.start_y))
        for starts in by_seed.values():
            assert starts[0] == starts[1]  # identical start per episode across arms
        names = [a.name for a in stats.arms]
        assert names == ["dynamic_focus", "no_focus"]
        assert (out / "summary.json").exists()
        for r in rows:
            assert (out / "trajectories" / f"{r.arm}_{r.seed}.csv").exists()

    def test_clean_world_single_arm_full_success(self, tmp_path):
        cfg = tiny_batch(tmp_path, episodes=1, arms=[ArmSpec("focus", True)])
        stats = run_batch(cfg)
        assert stats.arms[0].success_rate == 1.0

    def test_byte_identical_reruns(self, tmp_path):
        cfg1 = tiny_batch(tmp_path / "a")
        cfg2 = tiny_batch(tmp_path / "b")
        run_batch(cfg1)
        run_batch(cfg2)
        m1 = (tmp_path / "a" / "out" / "metrics.csv").read_bytes()
        m2 = (tmp_path / "b" / "out" / "metrics.csv").read_bytes()
        s1 = (tmp_path / "a" / "out" / "summary.json").read_bytes()
        s2 = (tmp_path / "b" / "out" / "summary.json").read_bytes()
        assert m1 == m2
        assert s1 == s2

    def test_parallel_jobs_match_serial(self, tmp_path):
        serial = tiny_batch(tmp_path / "s")
        parallel = tiny_batch(tmp_path / "p", jobs=2)
        run_batch(serial)
        run_batch(parallel)
        assert (tmp_path / "s" / "out" / "metrics.csv").read_bytes() == (
            tmp_path / "p" / "out" / "metrics.csv"
        ).read_bytes()

    def test_arms_share_noise_stream_and_world(self, tmp_path):
        from safeland.harness import episode_config, episode_world, sample_start

        cfg = tiny_batch(tmp_path, noise_component_flip_prob=0.1)
        seed = cfg.base_seed
        start = sample_start(cfg, episode_world(cfg, seed), 0)
        a = episode_config(cfg, seed, start, cfg.arms[0])
        b = episode_config(cfg, seed, start, cfg.arms[1])
        assert a.noise == b.noise  # identical noise stream across arms
        assert a.controller == b.controller
        assert a.focus_enabled != b.focus_enabled

    def test_unwritable_output_fails_before_running(self, tmp_path):
        blocker = tmp_path / "file.txt"
        blocker.write_text("x")
        cfg = tiny_batch(tmp_path, output_dir=str(blocker / "nested"))
        with pytest.raises(OSError):
            run_batch(cfg)


class TestBatchConfigJson:
    def test_round_trip_through_dict(self):
        cfg = BatchConfig(episodes=7, base_seed=3, noise_component_flip_prob=0.1)
        doc = cfg.to_dict()
        back = BatchConfig.from_dict(doc)
        assert back == cfg

    def test_from_json_file(self, tmp_path):
        doc = {
            "episodes": 3,
            "base_seed": 9,
            "world": {"width_m": 256.0, "clutter": 0.5},
            "camera": {"image_width": 65, "image_height": 65},
            "noise": {"component_flip_prob": 0.2},
            "sim": {"max_time": 60.0},
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        cfg = BatchConfig.from_json(path)
        assert cfg.episodes == 3
        assert cfg.world_width_m == 256.0
        assert cfg.clutter.buildings == 0.5
        assert cfg.camera.image_width == 65
        assert cfg.noise_component_flip_prob == 0.2
        assert cfg.max_time == 60.0

    def test_validation(self):
        with pytest.raises(ValueError):
            BatchConfig(episodes=0)
        with pytest.raises(ValueError):
            BatchConfig(arms=[ArmSpec("a", True), ArmSpec("a", False)])
