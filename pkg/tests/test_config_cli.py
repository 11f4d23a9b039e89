import json

import numpy as np
import pytest

from mergesim.cli import main
from mergesim.config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
    save_config,
)
from mergesim.mappo import init_policy, save_checkpoint


class TestRunConfig:
    def test_empty_file_gives_published_defaults(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        config = load_config(path)
        assert (config.reward.w_collision, config.reward.w_speed,
                config.reward.w_headway, config.reward.w_merge) == (200.0, 1.0, 4.0, 4.0)
        assert (config.safety.alpha_merge, config.safety.alpha_end,
                config.safety.alpha_headway) == (1.0, 1.0, 0.5)
        assert config.safety.horizon == 8
        assert config.safety.t_h == 1.2
        assert config.train.seeds == [0, 1000, 2024]

    def test_unknown_key_rejected_with_path(self):
        with pytest.raises(ConfigError, match="reward"):
            config_from_dict({"reward": {"w_colision": 100.0}})
        with pytest.raises(ConfigError, match="top level"):
            config_from_dict({"rward": {}})

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError, match="positive"):
            config_from_dict({"reward": {"w_collision": -1.0}})

    def test_horizon_override_propagates(self):
        from mergesim.intent import generate_intent

        config = config_from_dict({"safety": {"horizon": 4}})
        env = config.build_env()
        env.reset(seed=0)
        assert env.safety.horizon == 4
        ego = env._state_of(env.agent_ids[0])
        intent = generate_intent(ego, 2, env.layout, env.gains, env.safety.horizon)
        assert intent.horizon == 4
        out = env.step({aid: 2 for aid in env.live_cav_ids})
        for c in out.info["conflicts"]:
            assert 1 <= c.step <= 4

    def test_round_trip_lossless(self):
        config = config_from_dict({"env": {"mode": "hard"}, "train": {"lr": 1e-3}})
        data = config_to_dict(config)
        again = config_from_dict(json.loads(json.dumps(data)))
        assert config_to_dict(again) == data

    def test_hash_stable_and_sensitive(self):
        a = RunConfig()
        b = RunConfig()
        assert config_hash(a) == config_hash(b)
        b.reward.w_merge = 5.0
        assert config_hash(a) != config_hash(b)

    def test_save_load_round_trip(self, tmp_path):
        config = config_from_dict({"env": {"mode": "hard", "heterogeneous": True}})
        save_config(config, tmp_path / "c.json")
        loaded = load_config(tmp_path / "c.json")
        assert config_to_dict(loaded) == config_to_dict(config)

    def test_style_table_override(self):
        config = config_from_dict({"hv": {"timid": {"v0": 15.0}}})
        from mergesim.dynamics import DrivingStyle

        table = config.hv.build("hv")
        assert table[DrivingStyle.TIMID][0].v0 == 15.0
        assert table[DrivingStyle.NORMAL][0].v0 == 25.0

    def test_invalid_mode_rejected(self):
        with pytest.raises(ConfigError, match="env.mode"):
            config_from_dict({"env": {"mode": "extreme"}})


def tiny_config(tmp_path, **extra):
    data = {
        "train": {
            "total_steps": 120,
            "rollout_steps": 60,
            "epochs": 2,
            "minibatch": 32,
            "hidden": 32,
            "eval_every_episodes": 1000000,
            "eval_episodes": 1,
            "seeds": [0],
        },
    }
    for key, value in extra.items():
        data.setdefault(key, {}).update(value)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


class TestCli:
    def test_train_writes_artifacts(self, tmp_path):
        cfg = tiny_config(tmp_path)
        rc = main(["train", "--config", str(cfg), "--mode", "easy", "--seed", "0",
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        run_dirs = list((tmp_path / "out").glob("train-easy-*"))
        assert len(run_dirs) == 1
        assert (run_dirs[0] / "checkpoints" / "seed0.npz").exists()
        assert (run_dirs[0] / "curves_seed0.csv").exists()
        assert (run_dirs[0] / "config.json").exists()

    def test_no_sem_run_tagged_and_disabled(self, tmp_path):
        cfg = tiny_config(tmp_path)
        rc = main(["train", "--config", str(cfg), "--seed", "0", "--no-sem",
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        run_dirs = list((tmp_path / "out").glob("train-easy-nosem-*"))
        assert len(run_dirs) == 1
        echoed = json.loads((run_dirs[0] / "config.json").read_text())
        assert echoed["toggles"]["sem_enabled"] is False

    def test_eval_and_replay_pipeline(self, tmp_path, capsys):
        cfg = tiny_config(tmp_path)
        out = str(tmp_path / "out")
        assert main(["train", "--config", str(cfg), "--seed", "0", "--out", out]) == 0
        ckpt = next((tmp_path / "out").glob("train-easy-*/checkpoints/seed0.npz"))
        rc = main(["eval", "--config", str(cfg), "--checkpoint", str(ckpt),
                   "--episodes", "2", "--seed", "0", "--out", out])
        assert rc == 0
        eval_dir = next((tmp_path / "out").glob("eval-easy-*-seed0"))
        replays = sorted((eval_dir / "replays").glob("*.jsonl"))
        assert len(replays) == 2
        assert (eval_dir / "metrics" / "summary.csv").exists()
        rc = main(["replay", "--config", str(cfg), "--log", str(eval_dir / "replays"),
                   "--out", out])
        assert rc == 0
        replay_dir = next((tmp_path / "out").glob("replay-easy-*"))
        live = (eval_dir / "metrics" / "summary.csv").read_bytes()
        recomputed = (replay_dir / "metrics" / "summary.csv").read_bytes()
        assert live == recomputed

    def test_eval_deterministic_outputs(self, tmp_path):
        cfg = tiny_config(tmp_path)
        out = str(tmp_path / "out")
        assert main(["train", "--config", str(cfg), "--seed", "0", "--out", out]) == 0
        ckpt = next((tmp_path / "out").glob("train-easy-*/checkpoints/seed0.npz"))
        for sub in ("a", "b"):
            assert main(["eval", "--config", str(cfg), "--checkpoint", str(ckpt),
                         "--episodes", "1", "--seed", "0", "--out", str(tmp_path / sub)]) == 0
        dir_a = next((tmp_path / "a").glob("eval-*"))
        dir_b = next((tmp_path / "b").glob("eval-*"))
        for rel in ["metrics/summary.csv", "metrics/pet.csv", "metrics/tms.csv",
                    "replays/ep0000.jsonl"]:
            assert (dir_a / rel).read_bytes() == (dir_b / rel).read_bytes()

    def test_eval_zero_episodes_rejected(self, tmp_path):
        cfg = tiny_config(tmp_path)
        ckpt = tmp_path / "ckpt.npz"
        save_checkpoint(ckpt, init_policy(25, 150, hidden=32, seed=0), seed=0, step=0,
                        config_hash="x")
        rc = main(["eval", "--config", str(cfg), "--checkpoint", str(ckpt),
                   "--episodes", "0", "--out", str(tmp_path / "out")])
        assert rc == 2

    def test_incompatible_checkpoint_rejected(self, tmp_path):
        cfg = tiny_config(tmp_path)  # hidden=32
        ckpt = tmp_path / "ckpt.npz"
        save_checkpoint(ckpt, init_policy(25, 150, hidden=16, seed=0), seed=0, step=0,
                        config_hash="x")
        rc = main(["eval", "--config", str(cfg), "--checkpoint", str(ckpt),
                   "--episodes", "1", "--out", str(tmp_path / "out")])
        assert rc == 2

    def test_curriculum_initialization(self, tmp_path):
        cfg = tiny_config(tmp_path)
        out = str(tmp_path / "out")
        assert main(["train", "--config", str(cfg), "--seed", "0", "--out", out]) == 0
        ckpt = next((tmp_path / "out").glob("train-easy-*/checkpoints/seed0.npz"))
        rc = main(["train", "--config", str(cfg), "--mode", "hard", "--seed", "0",
                   "--curriculum-from", str(ckpt), "--out", out])
        assert rc == 0
        assert list((tmp_path / "out").glob("train-hard-*/checkpoints/seed0.npz"))

    def test_truncated_replay_rejected(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"type":"meta","version":1,"dt":0.1,"substeps":10,"seed":0,'
                       '"mode":"easy","heterogeneous":false,"dropped_spawns":0,"vehicles":{}}\n')
        rc = main(["replay", "--log", str(bad), "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "truncated" in capsys.readouterr().err

    def test_config_error_surfaces(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"reward": {"w_collision": -5}}')
        rc = main(["train", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert rc == 2
