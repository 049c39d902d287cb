"""Command line: ``pgdqn {train,compare,verify,heatmap,sweep}``.

Exit codes: 0 ok, 2 usage error, 3 aborted run, 4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .agents import get_variant, load_checkpoint
from .envkit import ENV_NAMES

EXIT_OK, EXIT_USAGE, EXIT_ABORT, EXIT_VERIFY = 0, 2, 3, 4

log = logging.getLogger("pgdqn")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    env: str = "cartpole"
    variants: list[str] = field(default_factory=lambda: ["PGDQN"])
    seeds: list[int] | None = None
    profile: str = "control-default"
    overrides: dict = field(default_factory=dict)
    out_dir: str = "runs"

    def resolve(self):
        from .trainer import profile
        try:
            hp = profile(self.profile, **self.overrides)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
        if self.seeds is not None:
            hp = hp.replace(seeds=tuple(self.seeds))
        return hp


def load_run_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    known = {"env", "variant", "variants", "seeds", "profile", "overrides", "out_dir"}
    extra = set(raw) - known
    if extra:
        raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")
    cfg = RunConfig()
    cfg.env = raw.get("env", cfg.env)
    v = raw.get("variants", raw.get("variant"))
    if v is not None:
        cfg.variants = [v] if isinstance(v, str) else list(v)
    cfg.seeds = raw.get("seeds")
    cfg.profile = raw.get("profile", cfg.profile)
    cfg.overrides = dict(raw.get("overrides", {}))
    cfg.out_dir = raw.get("out_dir", cfg.out_dir)
    return cfg


def _check_names(env: str, variants) -> list[str]:
    if env.lower() not in ENV_NAMES:
        raise UsageError(f"unknown env {env!r}; expected one of {', '.join(ENV_NAMES)}")
    out = []
    for v in variants:
        try:
            out.append(get_variant(v).name)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return out


def _run_one(job):
    """Worker body: returns (stem, status, message)."""
    from .trainer import TrainingAborted, train
    from .trainer.loop import run_stem

    hp, env, seed, out_dir, checkpoint = job
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    stem = run_stem(env, hp.variant, seed)
    ckpt = Path(out_dir) / f"{stem}.ckpt.json" if checkpoint else None
    try:
        runlog = train(hp, env, seed, checkpoint_path=ckpt)
    except TrainingAborted as exc:
        if exc.runlog is not None:
            exc.runlog.write(out_dir)
        return stem, "aborted", str(exc)
    runlog.write(out_dir)
    return stem, "ok", f"{runlog.frames} frames, {len(runlog.episodes)} episodes"


def _plan(cfg: RunConfig, if_exists: str, checkpoint: bool):
    variants = _check_names(cfg.env, cfg.variants)
    hp_base = cfg.resolve()
    out = Path(cfg.out_dir)
    jobs = []
    from .trainer.loop import run_stem
    for v in variants:
        hp = hp_base.replace(variant=v)
        for seed in hp.seeds:
            side = out / f"{run_stem(cfg.env, v, seed)}.json"
            if side.exists() and if_exists == "refuse":
                raise UsageError(f"{side} already exists; pass --if-exists overwrite to re-run "
                                 "(an unchanged config reproduces identical bytes)")
            if side.exists() and if_exists == "skip":
                try:
                    if json.loads(side.read_text()).get("config_hash") == hp.config_hash():
                        continue
                except json.JSONDecodeError:
                    pass
                raise UsageError(f"{side} exists with a different config; refusing to mix results")
            jobs.append((hp, cfg.env, seed, str(out), checkpoint))
    return jobs


def _execute(jobs, workers: int) -> int:
    if not jobs:
        print("nothing to do: all runs present with matching config hash")
        return EXIT_OK
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    status = EXIT_OK
    for stem, state, msg in results:
        print(f"{stem}: {state} ({msg})")
        if state != "ok":
            status = EXIT_ABORT
    return status


def _parse_overrides(items) -> dict:
    from .trainer import parse_override
    out = {}
    for it in items or []:
        try:
            k, v = parse_override(it)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        out[k] = v
    return out


def _config_from_args(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.env:
        cfg.env = args.env
    if args.variant:
        cfg.variants = list(args.variant)
    if args.seeds:
        cfg.seeds = [int(s) for s in args.seeds.split(",")]
    if args.profile:
        cfg.profile = args.profile
    if args.out:
        cfg.out_dir = args.out
    cfg.overrides.update(_parse_overrides(args.overrides))
    return cfg


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    jobs = _plan(cfg, args.if_exists, not args.no_checkpoint)
    return _execute(jobs, args.workers)


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    taus = [int(t) for t in args.tau.split(",")]
    lrs = [float(x) for x in args.lr.split(",")]
    root = Path(cfg.out_dir)
    jobs = []
    for tau in taus:
        for lr in lrs:
            sub = RunConfig(cfg.env, cfg.variants, cfg.seeds, cfg.profile,
                            {**cfg.overrides, "tau_pref": tau, "lr_pref": lr}, str(root / f"tau{tau}_lr{lr:g}"))
            jobs.extend(_plan(sub, args.if_exists, False))
    return _execute(jobs, args.workers)


def cmd_compare(args) -> int:
    from .evalkit import compare
    try:
        doc = compare(args.run_dir, args.out or args.run_dir, tie_tolerance=args.tie_tolerance,
                      svg=not args.no_svg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for env, s in doc["envs"].items():
        print(f"{env}: " + " > ".join(s["ranking"]))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .evalkit import SUITES, run_suite
    names = SUITES if args.suite == "all" else (args.suite,)
    reports = [run_suite(n) for n in names]
    doc = {"passed": all(r.passed for r in reports), "suites": [r.to_dict() for r in reports]}
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK if doc["passed"] else EXIT_VERIFY


def cmd_heatmap(args) -> int:
    from .evalkit import export_heatmap, fixed_q_bandit_network
    from .evalkit.plots import heatmap_svg, write_svg
    from .trainer.config import config_hash

    env_kwargs = {}
    if args.fixed_q:
        q = [float(x) for x in args.fixed_q.split(",")]
        net, _ = fixed_q_bandit_network(q, args.alpha, seed=args.seed)
        env, env_kwargs = "bandit", {"rewards": q}
        meta = {"source": "fixed-q-bandit", "q": q, "alpha": args.alpha}
    elif args.checkpoint:
        try:
            net, meta = load_checkpoint(args.checkpoint)
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot load checkpoint: {exc}") from exc
        env = args.env or meta.get("env")
        if not env:
            raise UsageError("checkpoint has no env recorded; pass --env")
    else:
        raise UsageError("heatmap needs --checkpoint or --fixed-q")
    try:
        rec = export_heatmap(net, env, seed=args.seed, max_steps=args.max_steps, path=args.out,
                             normalize=args.normalize, env_kwargs=env_kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    side = {"env": env, "seed": args.seed, "max_steps": args.max_steps, "normalize": args.normalize, **meta}
    side["config_hash"] = config_hash(side)
    Path(args.out).with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    if args.svg:
        write_svg(heatmap_svg(rec.eta, title="eta"), Path(args.out).with_suffix(".eta.svg"))
        write_svg(heatmap_svg(rec.q_norm, title="normalized Q"), Path(args.out).with_suffix(".q.svg"))
    print(f"wrote {len(rec.steps)} rows to {args.out}")
    return EXIT_OK


def _train_args(p):
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--env", help=f"one of {', '.join(ENV_NAMES)}")
    p.add_argument("--variant", action="append", help="agent variant (repeatable)")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--profile", choices=("control-default", "paper-atari"))
    p.add_argument("--out", help="output directory")
    p.add_argument("--if-exists", choices=("refuse", "overwrite", "skip"), default="refuse",
                   help="what to do when a run's outputs already exist")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("overrides", nargs="*", metavar="key=value", help="hyperparameter overrides (JSON values)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pgdqn", description="preference-guided DQN experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("train", help="train one or more (variant, seed) runs")
    _train_args(p)
    p.add_argument("--no-checkpoint", action="store_true", help="skip writing final weights")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sweep", help="train over a tau_pref x lr_pref grid")
    _train_args(p)
    p.add_argument("--tau", default="1,4,8", help="comma-separated tau_pref values")
    p.add_argument("--lr", default="0.0001,0.00025,0.001", help="comma-separated lr_pref values")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("compare", help="metrics and ranking from a RunLog directory")
    p.add_argument("run_dir")
    p.add_argument("--out", help="report directory (default: run_dir)")
    p.add_argument("--tie-tolerance", type=float, default=0.0, help="scores this close count as tied")
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("verify", help="run an oracle suite")
    p.add_argument("suite", choices=("gradients", "theorem1", "kl-fixed-point", "envs", "all"))
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("heatmap", help="export per-step eta / normalized Q for one greedy episode")
    p.add_argument("--checkpoint", help="checkpoint written by train")
    p.add_argument("--fixed-q", help="comma-separated Q values: train a fixed-Q bandit net instead")
    p.add_argument("--alpha", type=float, default=0.5, help="temperature for --fixed-q")
    p.add_argument("--env")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--normalize", choices=("step", "episode"), default="step")
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(fn=cmd_heatmap)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    t0 = time.perf_counter()
    try:
        code = args.fn(args)
    except UsageError as exc:
        print(f"pgdqn {args.cmd}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    log.info("done in %.1fs", time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
