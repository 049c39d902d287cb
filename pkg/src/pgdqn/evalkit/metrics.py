"""Improvement percentages, frames-to-best and the rank ordering."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SMOOTH_WINDOW = 10


class Unreached:
    """Marker for an efficiency comparison where the score was never reached."""

    def __repr__(self):
        return "UNREACHED"

    def __str__(self):
        return "unreached"

    def __bool__(self):
        return False


UNREACHED = Unreached()


def perf_improvement(sc_pgdqn: float, sc_baseline: float) -> float:
    """Percentage gain in average best score; |baseline| keeps the sign right for negative-reward tasks."""
    if sc_baseline == 0:
        raise ValueError("baseline score is 0, so a relative improvement is undefined; "
                         "report the absolute difference instead")
    return 100.0 * (sc_pgdqn - sc_baseline) / abs(sc_baseline)


def efficiency_improvement(frm_baseline: float, frm_pgdqn) -> float | Unreached:
    """Percentage of frames saved to reach the baseline's best score.

    ``frm_pgdqn`` may be ``None`` or :data:`UNREACHED` when that score was
    never reached, in which case :data:`UNREACHED` comes back.
    """
    if frm_pgdqn is None or frm_pgdqn is UNREACHED:
        return UNREACHED
    if frm_baseline <= 0 or frm_pgdqn <= 0:
        raise ValueError("frame counts must be positive")
    return 100.0 * (frm_baseline - frm_pgdqn) / frm_baseline


def smooth(values: Sequence[float], window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Trailing mean over up to ``window`` points (shorter at the start)."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        return x
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(0, idx - window)
    return (c[idx] - c[lo]) / (idx - lo)


def first_reach(frames: Sequence[float], curve: Sequence[float], score: float, atol: float = 1e-9):
    """First frame whose curve value is >= score, or None."""
    curve = np.asarray(curve, dtype=np.float64)
    hit = np.nonzero(curve >= score - atol)[0]
    return float(frames[hit[0]]) if hit.size else None


@dataclass
class MethodResult:
    name: str
    best_scores: list[float]
    frames_to_best: list[float]
    curves: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.best_scores:
            raise ValueError(f"{self.name}: need at least one seed")
        if not all(math.isfinite(s) for s in self.best_scores):
            raise ValueError(f"{self.name}: scores must be finite")
        if len(self.frames_to_best) != len(self.best_scores):
            raise ValueError(f"{self.name}: one frames-to-best value per seed")

    @property
    def score(self) -> float:
        return float(np.mean(self.best_scores))

    @property
    def frames(self) -> float:
        return float(np.mean(self.frames_to_best))

    @classmethod
    def from_summary(cls, name: str, score: float, frames: float) -> "MethodResult":
        """Single pseudo-seed built from summary numbers (no curves)."""
        return cls(name, [float(score)], [float(frames)])

    @classmethod
    def from_curves(cls, name: str, curves, window: int = SMOOTH_WINDOW) -> "MethodResult":
        """``curves`` is a list of (frames, eval returns) per seed."""
        best, frm, kept = [], [], []
        for frames, rets in curves:
            frames = np.asarray(frames, dtype=np.float64)
            sm = smooth(rets, window)
            if sm.size == 0:
                continue
            b = float(sm.max())
            best.append(b)
            frm.append(first_reach(frames, sm, b))
            kept.append((frames, sm))
        return cls(name, best, frm, kept)

    def frames_to_reach(self, score: float):
        """Mean over seeds of the first frame reaching ``score``.

        Seeds that never get there count with their final frame; if no seed
        gets there the result is :data:`UNREACHED`. Summary-only results
        (no curves) fall back to their own frames-to-best.
        """
        if not self.curves:
            return self.frames
        vals, any_hit = [], False
        for frames, sm in self.curves:
            f = first_reach(frames, sm, score)
            if f is None:
                vals.append(float(frames[-1]))
            else:
                any_hit = True
                vals.append(f)
        return float(np.mean(vals)) if any_hit else UNREACHED


def _efficiency_vs(m: MethodResult, other: MethodResult) -> float:
    f = m.frames_to_reach(other.score)
    if f is UNREACHED:
        final = [float(fr[-1]) for fr, _ in m.curves] or [m.frames]
        f = float(np.mean(final))
    return efficiency_improvement(other.frames, f)


def efficiency_score(m: MethodResult, others: Sequence[MethodResult]) -> float:
    """Mean efficiency improvement of ``m`` against every other method (the tie key)."""
    vals = [_efficiency_vs(m, o) for o in others if o is not m]
    return float(np.mean(vals)) if vals else 0.0


@dataclass
class RankEntry:
    rank: int
    name: str
    score: float
    efficiency: float


def rank_methods(results: Sequence[MethodResult], tie_tolerance: float = 0.0) -> list[RankEntry]:
    """Order by average best score, breaking ties by average data efficiency.

    Scores within ``tie_tolerance`` of a group's leader count as equal. The
    sort is stable, so full ties keep the input order.
    """
    if len(results) < 2:
        raise ValueError("ranking needs at least two methods")
    eff = {id(m): efficiency_score(m, results) for m in results}
    by_score = sorted(results, key=lambda m: -m.score)
    groups: list[list[MethodResult]] = []
    for m in by_score:
        if groups and groups[-1][0].score - m.score <= tie_tolerance:
            groups[-1].append(m)
        else:
            groups.append([m])
    order = []
    for g in groups:
        # restore input order inside a group before the stable efficiency sort
        g = sorted(g, key=lambda m: results.index(m))
        order.extend(sorted(g, key=lambda m: -eff[id(m)]))
    return [RankEntry(i + 1, m.name, m.score, eff[id(m)]) for i, m in enumerate(order)]


def pairwise_table(results: Sequence[MethodResult], reference: str | None = "PGDQN") -> list[dict]:
    """One row per (method, opponent) with both improvement percentages.

    With ``reference`` present only its rows are kept; otherwise every
    ordered pair is reported.
    """
    names = [m.name for m in results]
    subjects = [m for m in results if m.name == reference] if reference in names else list(results)
    rows = []
    for m in subjects:
        for o in results:
            if o is m:
                continue
            try:
                perf = perf_improvement(m.score, o.score)
            except ValueError:
                perf = math.nan
            frm = m.frames_to_reach(o.score)
            eff = efficiency_improvement(o.frames, frm) if o.frames > 0 else math.nan
            rows.append({
                "method": m.name, "baseline": o.name, "sc_method": m.score, "sc_baseline": o.score,
                "perf_improvement": perf, "frm_baseline": o.frames,
                "frm_method": None if frm is UNREACHED else frm,
                "efficiency_improvement": "unreached" if eff is UNREACHED else eff,
            })
    return rows
