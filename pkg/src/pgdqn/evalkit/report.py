"""Turn a directory of persisted RunLogs into metric tables and a ranking."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from pathlib import Path

from .metrics import SMOOTH_WINDOW, MethodResult, pairwise_table, rank_methods
from .plots import bar_chart, line_chart, write_svg


def _read_eval(path: Path):
    frames, rets = [], []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            if r.get("mean_return") in ("", None):
                continue
            frames.append(float(r["frames"]))
            rets.append(float(r["mean_return"]))
    return frames, rets


def _read_episodes(path: Path):
    frames, rets = [], []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            frames.append(float(r["frames"]))
            rets.append(float(r["return"]))
    return frames, rets


def load_runs(run_dir) -> dict[str, dict[str, list]]:
    """{env: {variant: [(frames, returns) per seed]}} from sidecar-tagged files.

    Greedy-eval curves are used when present, training-episode returns otherwise.
    """
    out: dict[str, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    for side in sorted(Path(run_dir).glob("*.json")):
        try:
            meta = json.loads(side.read_text())
        except json.JSONDecodeError:
            continue
        if not {"env", "variant", "seed"} <= set(meta):
            continue
        stem = side.with_suffix("")
        ev, ep = Path(f"{stem}.eval.csv"), Path(f"{stem}.csv")
        curve = _read_eval(ev) if ev.exists() else ([], [])
        if not curve[0] and ep.exists():
            curve = _read_episodes(ep)
        if curve[0]:
            out[meta["env"]][meta["variant"]].append(curve)
    return {e: dict(v) for e, v in out.items()}


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in columns])
    return buf.getvalue()


PAIR_COLUMNS = ("env", "method", "baseline", "sc_method", "sc_baseline", "perf_improvement",
                "frm_baseline", "frm_method", "efficiency_improvement")
RANK_COLUMNS = ("env", "rank", "method", "score", "efficiency")


def compare(run_dir, out_dir, tie_tolerance: float = 0.0, window: int = SMOOTH_WINDOW, svg: bool = True,
            reference: str = "PGDQN") -> dict:
    runs = load_runs(run_dir)
    if not runs:
        raise ValueError(f"no RunLogs found under {run_dir}")
    pair_rows, rank_rows, summary = [], [], {}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for env, by_variant in sorted(runs.items()):
        results = [MethodResult.from_curves(v, curves, window) for v, curves in sorted(by_variant.items())]
        if len(results) < 2:
            raise ValueError(f"{env}: only {len(results)} method present; comparison needs at least two "
                             "(train more variants into the same directory)")
        ref = reference if any(r.name == reference for r in results) else None
        for row in pairwise_table(results, ref):
            pair_rows.append({"env": env, **row})
        ranking = rank_methods(results, tie_tolerance)
        for e in ranking:
            rank_rows.append({"env": env, "rank": e.rank, "method": e.name, "score": e.score,
                              "efficiency": e.efficiency})
        summary[env] = {
            "methods": {r.name: {"score": r.score, "frames_to_best": r.frames, "seeds": len(r.best_scores)}
                        for r in results},
            "ranking": [e.name for e in ranking],
            "reference": ref,
        }
        if svg:
            write_svg(bar_chart([e.name for e in ranking], [e.rank for e in ranking],
                                title=f"{env}: rank (1 = best)", ylabel="rank"), out / f"{env}_rank.svg")
            series = {}
            for r in results:
                if r.curves:
                    fr, sm = r.curves[0]
                    series[r.name] = (fr, sm)
            write_svg(line_chart(series, title=f"{env}: smoothed eval return (first seed)"), out / f"{env}_curves.svg")
    (out / "metrics.csv").write_text(_csv(pair_rows, PAIR_COLUMNS))
    (out / "ranking.csv").write_text(_csv(rank_rows, RANK_COLUMNS))
    doc = {"tie_tolerance": tie_tolerance, "smooth_window": window, "envs": summary}
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return doc


def _json_default(o):
    if isinstance(o, float) and math.isnan(o):
        return None
    return str(o)
