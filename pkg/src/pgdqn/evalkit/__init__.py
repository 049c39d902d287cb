"""Metrics, ranking, theory verifiers and preference/Q exports."""
from .heatmap import HeatmapRecord, export_heatmap, fixed_q_bandit_network, minmax, read_heatmap_csv
from .metrics import (
    SMOOTH_WINDOW,
    UNREACHED,
    MethodResult,
    RankEntry,
    efficiency_improvement,
    efficiency_score,
    first_reach,
    pairwise_table,
    perf_improvement,
    rank_methods,
    smooth,
)
from .report import compare, load_runs
from .suites import SUITES, SuiteReport, acrobot_oracle_step, run_suite
from .theory import (
    FixedPointResult,
    ImprovementReport,
    guided_policy_table,
    kl_fixed_point,
    kl_fixed_point_suite,
    kl_to_boltzmann,
    improvement_fleet,
    verify_policy_improvement,
)

__all__ = [
    "FixedPointResult", "HeatmapRecord", "ImprovementReport", "MethodResult", "RankEntry", "SMOOTH_WINDOW",
    "SUITES", "SuiteReport", "UNREACHED", "acrobot_oracle_step", "compare", "efficiency_improvement",
    "efficiency_score", "export_heatmap", "first_reach", "fixed_q_bandit_network", "guided_policy_table",
    "kl_fixed_point", "kl_fixed_point_suite", "kl_to_boltzmann", "load_runs", "minmax", "pairwise_table",
    "perf_improvement", "rank_methods", "read_heatmap_csv", "run_suite", "smooth", "improvement_fleet",
    "verify_policy_improvement",
]
