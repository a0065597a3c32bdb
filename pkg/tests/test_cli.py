import json

import pytest

from safeland.cli import main
from safeland.world import GeneratorParams, generate_world, save_world


@pytest.fixture()
def small_world(tmp_path):
    w = generate_world(5, 384.0, 384.0, 0.5, GeneratorParams.none())
    save_world(w, tmp_path / "w")
    return tmp_path / "w"


class TestGenWorld:
    def test_writes_file_pair(self, tmp_path):
        code = main([
            "gen-world", "--seed", "3", "--width-m", "128", "--height-m", "128",
            "--meters-per-cell", "0.5", "--out", str(tmp_path / "demo"),
        ])
        assert code == 0
        assert (tmp_path / "demo.png").exists()
        assert (tmp_path / "demo.json").exists()

    def test_bad_clutter_is_config_error(self, tmp_path):
        code = main(["gen-world", "--clutter", "2.0", "--out", str(tmp_path / "x")])
        assert code == 1


class TestRun:
    def test_run_writes_trajectory(self, small_world, tmp_path):
        out = tmp_path / "run"
        code = main([
            "run", "--seed", "1", "--focus", "on", "--world", str(small_world),
            "--out", str(out), "--image-size", "65", "--max-time", "150",
        ])
        assert code == 0
        assert (out / "trajectory.csv").exists()

    def test_focus_maybe_is_usage_error(self, small_world, capsys):
        code = main(["run", "--seed", "1", "--focus", "maybe", "--world", str(small_world)])
        assert code == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self, capsys):
        code = main(["run", "--definitely-not-a-flag"])
        assert code == 1
        assert "usage" in capsys.readouterr().err

    def test_debug_frames_dumped(self, small_world, tmp_path):
        out = tmp_path / "run"
        code = main([
            "run", "--seed", "1", "--world", str(small_world), "--out", str(out),
            "--image-size", "65", "--max-time", "5", "--dump-debug-frames",
        ])
        assert code == 0
        dumps = list((out / "debug").glob("*.png"))
        assert dumps  # intermediate grids saved behind the flag

    def test_missing_world_file_is_config_error(self, tmp_path):
        code = main(["run", "--world", str(tmp_path / "nope"), "--out", str(tmp_path / "o")])
        assert code == 1

    def test_bundled_demo_world_default(self, tmp_path):
        # no --world: the demo world is generated from its fixed seed; a
        # timeout outcome is still a successful run (exit 0)
        out = tmp_path / "demo-run"
        code = main(["run", "--seed", "1", "--focus", "on", "--out", str(out), "--max-time", "5"])
        assert code == 0
        assert (out / "trajectory.csv").exists()


class TestBatchAndReport:
    def make_config(self, tmp_path):
        doc = {
            "episodes": 2,
            "base_seed": 50,
            "output_dir": str(tmp_path / "out"),
            "world": {"width_m": 384.0, "height_m": 384.0, "meters_per_cell": 0.5, "clutter": 0.0},
            "camera": {"image_width": 65, "image_height": 65},
            "sim": {"max_time": 150.0},
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        return path

    def test_batch_then_report_reproduces_summary(self, tmp_path):
        cfg = self.make_config(tmp_path)
        assert main(["batch", "--config", str(cfg)]) == 0
        out = tmp_path / "out"
        summary = (out / "summary.json").read_bytes()
        assert main(["report", "--metrics", str(out / "metrics.csv"),
                     "--out", str(out / "summary2.json")]) == 0
        assert (out / "summary2.json").read_bytes() == summary

    def test_report_is_idempotent(self, tmp_path):
        cfg = self.make_config(tmp_path)
        main(["batch", "--config", str(cfg)])
        metrics = tmp_path / "out" / "metrics.csv"
        before = metrics.read_bytes()
        main(["report", "--metrics", str(metrics)])
        main(["report", "--metrics", str(metrics)])
        assert metrics.read_bytes() == before

    def test_missing_config_file_is_config_error(self, tmp_path):
        assert main(["batch", "--config", str(tmp_path / "nope.json")]) == 1

    def test_missing_subcommand_is_usage_error(self):
        assert main([]) == 1
