"""Adaptive PC monitoring (APC) and PC signal recovery (PCSR) for high-dimensional streams."""

__version__ = "0.1.0"

from .pca import PCModel, ScoreVector, fit_pca, from_known, project, reconstruct, shift_magnitude_profile
from .monitoring import (
    CalibrationResult,
    ChartPoint,
    MonitorConfig,
    MonitorState,
    calibrate,
    control_limit_analytic,
    control_limit_montecarlo,
    monitor_step,
    run_chart,
    threshold_moments,
)
from .diagnosis import DiagnosisResult, PathConfig, check_sensing_pd, diagnose, diagnose_leb, solve_adaptive_lasso
from .benchmarks import PcaChartConfig, T2QLimits, calibrate_t2q, retained_components, t2_q_step

__all__ = [
    "PCModel", "ScoreVector", "fit_pca", "from_known", "project", "reconstruct", "shift_magnitude_profile",
    "CalibrationResult", "ChartPoint", "MonitorConfig", "MonitorState", "calibrate", "control_limit_analytic",
    "control_limit_montecarlo", "monitor_step", "run_chart", "threshold_moments",
    "DiagnosisResult", "PathConfig", "check_sensing_pd", "diagnose", "diagnose_leb", "solve_adaptive_lasso",
    "PcaChartConfig", "T2QLimits", "calibrate_t2q", "retained_components", "t2_q_step",
]
