import csv
import json
import subprocess
import sys
from dataclasses import replace

import jsonschema
import numpy as np
import pytest

from plantnav import qnet
from plantnav.cli import main
from plantnav.config import RunConfig, load_run_config, parse_run_config, run_config_to_dict
from plantnav.evaluation import scripted_delta_net
from plantnav.scenarios import scaled_world
from plantnav.trainer import CurriculumStage, EpsilonSchedule, TrainConfig
from plantnav.world import default_world, load_world, save_world

SMALL_TRAIN = TrainConfig(
    episodes=12, max_steps=30, batch_size=16, replay_capacity=500, warmup_transitions=50, target_sync_interval=40,
    start=None, hidden_sizes=(8,), checkpoint_interval=5, curriculum=(CurriculumStage(None, False),),
    schedule=EpsilonSchedule(1.0, 0.05, 10),
)


@pytest.fixture
def small_setup(tmp_path):
    world = tmp_path / "world.json"
    save_world(scaled_world(), world)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(run_config_to_dict(RunConfig(str(world), None, SMALL_TRAIN))))
    return world, cfg


def read(path):
    return path.read_bytes()


class TestTrain:
    def test_deterministic_outputs(self, small_setup, tmp_path):
        _, cfg = small_setup
        for name in ("a", "b"):
            assert main(["train", "--config", str(cfg), "--out", str(tmp_path / name), "--seed", "42"]) == 0
        for f in ("episodes.csv", "ckpt_5.bin", "ckpt_10.bin", "ckpt_final.bin", "ckpt_final.json"):
            assert read(tmp_path / "a" / f) == read(tmp_path / "b" / f), f
        # manifests differ only in the echoed output directory
        a, b = (json.loads((tmp_path / n / "run_manifest.json").read_text()) for n in ("a", "b"))
        a["config"].pop("out"), b["config"].pop("out")
        assert a == b

    def test_manifest_reproduces_run(self, small_setup, tmp_path):
        _, cfg = small_setup
        main(["train", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "7"])
        manifest = json.loads((tmp_path / "a" / "run_manifest.json").read_text())
        assert manifest["config"]["seed"] == 7
        assert set(manifest["versions"]) == {"plantnav", "numpy", "python"}
        assert parse_run_config(manifest["config"]).train == replace(SMALL_TRAIN, seed=7)
        echo = tmp_path / "echo.json"
        echo.write_text(json.dumps(manifest["config"]))
        main(["train", "--config", str(echo), "--out", str(tmp_path / "b")])
        assert read(tmp_path / "a" / "episodes.csv") == read(tmp_path / "b" / "episodes.csv")

    def test_seed_changes_log(self, small_setup, tmp_path):
        _, cfg = small_setup
        main(["train", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1"])
        main(["train", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2"])
        assert read(tmp_path / "a" / "episodes.csv") != read(tmp_path / "b" / "episodes.csv")

    def test_missing_world_exit_3_without_output(self, small_setup, tmp_path):
        _, cfg = small_setup
        out = tmp_path / "run"
        assert main(["train", "--config", str(cfg), "--world", str(tmp_path / "nope.json"), "--out", str(out)]) == 3
        assert not out.exists()

    def test_resume_layout_mismatch_exit_2(self, small_setup, tmp_path, capsys):
        _, cfg = small_setup
        bad = tmp_path / "bad.bin"
        qnet.save_checkpoint(qnet.init((18, 8, 6), np.random.default_rng(0), layout_hash=99), bad)
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r"), "--resume", str(bad)]) == 2
        assert "layout" in capsys.readouterr().err

    def test_resume_continues_episode_numbering(self, small_setup, tmp_path):
        _, cfg = small_setup
        main(["train", "--config", str(cfg), "--out", str(tmp_path / "a")])
        ckpt = tmp_path / "a" / "ckpt_5.bin"
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "b"), "--resume", str(ckpt)]) == 0
        with open(tmp_path / "b" / "episodes.csv") as fh:
            eps = [int(r["episode"]) for r in csv.DictReader(fh)]
        assert eps == list(range(5, 12))

    def test_unknown_config_key_exit_2(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"train": {"episodez": 3}}))
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
        assert "episodez" in capsys.readouterr().err

    def test_numerical_abort_exit_4(self, small_setup, tmp_path, capsys):
        world, _ = small_setup
        doc = run_config_to_dict(RunConfig(str(world), None, SMALL_TRAIN))
        doc["train"]["lr"] = 1e6
        doc["train"]["episodes"] = 200
        cfg = tmp_path / "hot.json"
        cfg.write_text(json.dumps(doc))
        with np.errstate(all="ignore"):
            assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 4
        assert "parameter norms" in capsys.readouterr().err

    def test_bad_log_level_exit_2(self, small_setup, tmp_path, monkeypatch):
        _, cfg = small_setup
        monkeypatch.setenv("PLANTNAV_LOG_LEVEL", "loud")
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2


class TestEval:
    @pytest.fixture
    def tiny(self, tmp_path):
        world = tmp_path / "tiny.json"
        assert main(["gen-world", "--dims", "6", "6", "3", "--wind-speed", "0", "--height-gain", "0",
                     "--target-clearance", "1", "--out", str(world)]) == 0
        ckpt = tmp_path / "scripted.bin"
        qnet.save_checkpoint(scripted_delta_net(), ckpt)
        return world, ckpt

    def test_scripted_checkpoint_always_succeeds(self, tiny, tmp_path, repo_root):
        world, ckpt = tiny
        out = tmp_path / "ev"
        assert main(["eval", "--world", str(world), "--checkpoint", str(ckpt), "--out", str(out),
                     "--episodes", "20"]) == 0
        summary = json.loads((out / "eval_summary.json").read_text())
        assert summary["success_rate"] == 1.0
        schema = json.loads((repo_root / "schemas" / "eval_summary.schema.json").read_text())
        jsonschema.validate(summary, schema)
        assert len(list(out.glob("trajectory_*.csv"))) == 20

    def test_zero_episodes_exit_2(self, tiny, tmp_path):
        world, ckpt = tiny
        assert main(["eval", "--world", str(world), "--checkpoint", str(ckpt), "--out", str(tmp_path / "e"),
                     "--episodes", "0"]) == 2

    def test_corrupt_checkpoint_exit_3(self, tiny, tmp_path):
        world, ckpt = tiny
        bad = tmp_path / "bad.bin"
        bad.write_bytes(ckpt.read_bytes()[:50])
        assert main(["eval", "--world", str(world), "--checkpoint", str(bad), "--out", str(tmp_path / "e")]) == 3

    def test_deterministic(self, tiny, tmp_path):
        world, ckpt = tiny
        for name in ("a", "b"):
            main(["eval", "--world", str(world), "--checkpoint", str(ckpt), "--out", str(tmp_path / name),
                  "--episodes", "5", "--seed", "3"])
        for f in ["eval_summary.json"] + [f"trajectory_{i}.csv" for i in range(5)]:
            assert read(tmp_path / "a" / f) == read(tmp_path / "b" / f)


class TestExportScores:
    def write_log(self, path, scores):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode", "score", "steps"])
            for i, s in enumerate(scores):
                w.writerow([i, s, 1])

    def averages(self, path):
        with open(path / "scores_avg.csv") as fh:
            return [float(r["avg_score"]) for r in csv.DictReader(fh)]

    def test_constant_log(self, tmp_path):
        self.write_log(tmp_path / "episodes.csv", [4.0] * 7)
        assert main(["export-scores", "--out", str(tmp_path), "--window", "3"]) == 0
        assert self.averages(tmp_path) == [4.0] * 7

    def test_window_one(self, tmp_path):
        self.write_log(tmp_path / "episodes.csv", [1.5, -2.0, 7.25])
        main(["export-scores", "--out", str(tmp_path), "--window", "1"])
        assert self.averages(tmp_path) == [1.5, -2.0, 7.25]

    def test_partial_windows(self, tmp_path):
        self.write_log(tmp_path / "episodes.csv", [3.0, 6.0, 9.0])
        main(["export-scores", "--out", str(tmp_path), "--window", "3"])
        assert self.averages(tmp_path) == [3.0, 4.5, 6.0]

    def test_default_window_is_100(self, tmp_path):
        self.write_log(tmp_path / "episodes.csv", list(range(150)))
        main(["export-scores", "--out", str(tmp_path)])
        assert self.averages(tmp_path)[-1] == float(np.mean(range(50, 150)))

    def test_malformed_log_exit_2(self, tmp_path):
        (tmp_path / "episodes.csv").write_text("episode,score\n0,abc\n")
        assert main(["export-scores", "--out", str(tmp_path)]) == 2
        (tmp_path / "episodes.csv").write_text("foo,bar\n1,2\n")
        assert main(["export-scores", "--out", str(tmp_path)]) == 2

    def test_does_not_modify_input(self, tmp_path):
        self.write_log(tmp_path / "episodes.csv", [1.0, 2.0])
        before = read(tmp_path / "episodes.csv")
        main(["export-scores", "--out", str(tmp_path)])
        assert read(tmp_path / "episodes.csv") == before


class TestGenWorld:
    def test_default_is_byte_identical(self, tmp_path, repo_root):
        assert main(["gen-world", "--default", "--out", str(tmp_path / "w.json")]) == 0
        assert read(tmp_path / "w.json") == read(repo_root / "worlds" / "default.json")
        assert load_world(tmp_path / "w.json") == default_world()

    def test_out_of_bounds_obstacle_names_index(self, tmp_path, capsys):
        code = main(["gen-world", "--dims", "10", "10", "5", "--obstacle", "2", "2", "1", "2", "2", "2",
                     "--obstacle", "50", "5", "2", "2", "2", "2", "--out", str(tmp_path / "w.json")])
        assert code == 3
        assert "obstacle 1" in capsys.readouterr().err
        assert not (tmp_path / "w.json").exists()

    def test_round_trip(self, tmp_path):
        path = tmp_path / "w.json"
        main(["gen-world", "--dims", "12", "8", "6", "--obstacle", "4", "4", "2", "2", "2", "4", "red",
              "--wind-speed", "10", "--wind-dir", "0", "1", "--out", str(path)])
        w = load_world(path)
        assert tuple(w.dims) == (12, 8, 6)
        assert w.obstacles[0].color == "red"
        save_world(w, tmp_path / "again.json")
        assert read(tmp_path / "again.json") == read(path)

    def test_needs_dims_or_default(self, tmp_path):
        assert main(["gen-world", "--out", str(tmp_path / "w.json")]) == 2


class TestShippedConfigs:
    @pytest.mark.parametrize("name", ["default.json", "scaled.json"])
    def test_configs_parse_and_match_schema(self, repo_root, name):
        path = repo_root / "configs" / name
        schema = json.loads((repo_root / "schemas" / "run_config.schema.json").read_text())
        doc = json.loads(path.read_text())
        jsonschema.validate(doc, schema)
        cfg = load_run_config(path)
        assert run_config_to_dict(cfg) == doc
        assert (repo_root / cfg.world).exists()

    def test_schema_rejects_typo(self, repo_root):
        schema = json.loads((repo_root / "schemas" / "run_config.schema.json").read_text())
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate({"train": {"gama": 0.9}}, schema)


def test_module_entry_point_usage_error():
    proc = subprocess.run([sys.executable, "-m", "plantnav", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2
