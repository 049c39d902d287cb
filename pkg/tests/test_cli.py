import csv
import json
import subprocess
import sys

import pytest

from pgdqn.cli import EXIT_ABORT, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, load_run_config, main

SMALL = ["embed_sizes=[8]", "head_hidden=[8]", "max_steps=300", "learning_start=50", "eval_every=100",
         "eval_episodes=2"]


def train(out, *extra, variants=("PGDQN",), seeds="0"):
    argv = ["train", "--env", "cartpole", "--seeds", seeds, "--out", str(out)]
    for v in variants:
        argv += ["--variant", v]
    return main(argv + list(extra) + SMALL)


def test_train_writes_runlog_and_sidecar(tmp_path):
    assert train(tmp_path) == EXIT_OK
    stem = tmp_path / "cartpole_PGDQN_seed0"
    with open(f"{stem}.csv", newline="") as fh:
        frames = [int(r["frames"]) for r in csv.DictReader(fh)]
    assert frames and frames == sorted(frames)
    side = json.loads((tmp_path / "cartpole_PGDQN_seed0.json").read_text())
    assert side["config"]["max_steps"] == 300 and side["config_hash"]
    assert (tmp_path / "cartpole_PGDQN_seed0.ckpt.json").exists()


def test_identical_invocations_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert train(a) == EXIT_OK and train(b) == EXIT_OK
    for name in ("cartpole_PGDQN_seed0.csv", "cartpole_PGDQN_seed0.eval.csv", "cartpole_PGDQN_seed0.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_rerun_refuses_then_overwrites(tmp_path):
    assert train(tmp_path, "--no-checkpoint") == EXIT_OK
    before = (tmp_path / "cartpole_PGDQN_seed0.csv").read_bytes()
    assert train(tmp_path, "--no-checkpoint") == EXIT_USAGE
    assert train(tmp_path, "--no-checkpoint", "--if-exists", "skip") == EXIT_OK
    assert train(tmp_path, "--no-checkpoint", "--if-exists", "overwrite") == EXIT_OK
    assert (tmp_path / "cartpole_PGDQN_seed0.csv").read_bytes() == before


def test_unknown_variant_is_usage_error_without_files(tmp_path):
    out = tmp_path / "o"
    assert train(out, variants=("dqn9",)) == EXIT_USAGE
    assert not out.exists() or not any(out.iterdir())


def test_unknown_env_and_bad_override(tmp_path):
    assert main(["train", "--env", "pong", "--variant", "DQN", "--out", str(tmp_path / "x")]) == EXIT_USAGE
    assert main(["train", "--env", "cartpole", "--variant", "DQN", "--out", str(tmp_path / "y"),
                 "no_such_field=3"]) == EXIT_USAGE
    assert main(["train", "--env", "cartpole", "--variant", "DQN", "--out", str(tmp_path / "z"),
                 "lr_q=-1"]) == EXIT_USAGE


def test_config_file(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"env": "cartpole", "variants": ["DQN"], "seeds": [1],
                               "profile": "control-default", "overrides": {"max_steps": 200, "embed_sizes": [8],
                                                                           "head_hidden": [8]},
                               "out_dir": str(tmp_path / "runs")}))
    rc = load_run_config(cfg)
    assert rc.resolve().max_steps == 200
    assert main(["train", "--config", str(cfg), "--no-checkpoint"]) == EXIT_OK
    assert (tmp_path / "runs" / "cartpole_DQN_seed1.csv").exists()


def test_aborted_run_exit_code(tmp_path, monkeypatch):
    import pgdqn.trainer as trainer
    from pgdqn.trainer import RunLog, TrainingAborted

    def boom(hp, env, seed, checkpoint_path=None, **kw):
        log = RunLog(seed, hp.variant, env, hp.to_dict(), hp.config_hash(), aborted="non-finite Q loss")
        raise TrainingAborted("run aborted at step 7: non-finite Q loss", log)

    monkeypatch.setattr(trainer, "train", boom)
    assert train(tmp_path, "--no-checkpoint") == EXIT_ABORT
    # the partial RunLog is still persisted
    side = json.loads((tmp_path / "cartpole_PGDQN_seed0.json").read_text())
    assert side["aborted"] == "non-finite Q loss"


def test_compare_and_ranking(tmp_path):
    runs = tmp_path / "runs"
    assert train(runs, "--no-checkpoint", variants=("PGDQN", "DQN")) == EXIT_OK
    out = tmp_path / "report"
    assert main(["compare", str(runs), "--out", str(out), "--tie-tolerance", "1"]) == EXIT_OK
    doc = json.loads((out / "summary.json").read_text())
    assert set(doc["envs"]["cartpole"]["ranking"]) == {"PGDQN", "DQN"}
    assert (out / "metrics.csv").exists() and (out / "ranking.csv").exists()
    assert (out / "cartpole_rank.svg").exists()


def test_compare_single_method_is_usage_error(tmp_path):
    assert train(tmp_path, "--no-checkpoint") == EXIT_OK
    assert main(["compare", str(tmp_path), "--out", str(tmp_path / "r")]) == EXIT_USAGE


def test_verify_exit_codes(tmp_path, monkeypatch, capsys):
    out = tmp_path / "v.json"
    assert main(["verify", "envs", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["passed"] is True
    capsys.readouterr()

    import pgdqn.evalkit as evalkit
    from pgdqn.evalkit.suites import SuiteReport

    def failing(name, **kw):
        rep = SuiteReport(name)
        rep.add("forced", False, 1.0, 0.0)
        return rep

    monkeypatch.setattr(evalkit, "run_suite", failing)
    assert main(["verify", "gradients"]) == EXIT_VERIFY


def test_heatmap_from_checkpoint_and_fixed_q(tmp_path):
    assert train(tmp_path / "runs") == EXIT_OK
    ck = tmp_path / "runs" / "cartpole_PGDQN_seed0.ckpt.json"
    out = tmp_path / "hm.csv"
    assert main(["heatmap", "--checkpoint", str(ck), "--env", "cartpole", "--max-steps", "30",
                 "--out", str(out), "--svg"]) == EXIT_OK
    assert out.read_text().startswith("step,action,eta_0,eta_1,q_norm_0,q_norm_1")
    assert out.with_suffix(".json").exists()
    out2 = tmp_path / "fq.csv"
    assert main(["heatmap", "--fixed-q", "0.1,0.9,-0.3", "--alpha", "0.3", "--max-steps", "10",
                 "--out", str(out2)]) == EXIT_OK
    assert len(out2.read_text().splitlines()) == 11


def test_heatmap_needs_a_source(tmp_path):
    assert main(["heatmap", "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE


def test_sweep_layout(tmp_path):
    rc = main(["sweep", "--env", "cartpole", "--seeds", "0", "--tau", "2,4", "--lr", "0.001",
               "--out", str(tmp_path), *SMALL[:4], "eval_every=0"])
    assert rc == EXIT_OK
    dirs = sorted(p.name for p in tmp_path.iterdir())
    assert dirs == ["tau2_lr0.001", "tau4_lr0.001"]
    side = json.loads((tmp_path / "tau2_lr0.001" / "cartpole_PGDQN_seed0.json").read_text())
    assert side["config"]["tau_pref"] == 2 and side["config"]["lr_pref"] == 0.001


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pgdqn", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for verb in ("train", "sweep", "compare", "verify", "heatmap"):
        assert verb in res.stdout
