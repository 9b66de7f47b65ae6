"""Adaptive PC (APC) control chart.

Each standardized PC score is smoothed by an EWMA, squared and normalized
to a chi-square(1) variable ``d``, soft-thresholded at ``nu`` and summed:

    R_t = sum_j max(0, d_tj - nu)

An alarm is raised when ``R_t > R0``. ``R0`` is either set from the normal
approximation of the thresholded-chi-square sum, or calibrated by Monte Carlo
to a target in-control average run length.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import special, stats
from scipy.signal import lfilter

from ._rng import rep_rng
from .pca import PCModel, project

log = logging.getLogger(__name__)

VarianceMode = Literal["paper", "asymptotic", "exact_time_varying"]
CalibrationMode = Literal["analytic", "monte_carlo", "auto"]

#: ``auto`` calibration switches to the analytic limit from this many streams on.
ANALYTIC_MIN_P = 5000


@dataclass(frozen=True)
class MonitorConfig:
    """APC parameters.

    Exactly one of ``alpha`` (per-step false-alarm rate) and ``target_arl``
    must be given; they are linked by ``alpha = 1 / ARL``, which treats the
    run length as geometric and ignores EWMA autocorrelation.
    """

    gamma: float = 0.4
    nu: float = 0.5
    alpha: float | None = None
    target_arl: float | None = None
    ewma_variance_mode: VarianceMode = "asymptotic"
    calibration_mode: CalibrationMode = "auto"

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not (self.nu >= 0 and math.isfinite(self.nu)):
            raise ValueError("nu must be a finite nonnegative number")
        if (self.alpha is None) == (self.target_arl is None):
            raise ValueError("set exactly one of alpha / target_arl")
        if self.alpha is not None and not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.target_arl is not None and not self.target_arl > 1:
            raise ValueError("target_arl must exceed 1")
        if self.ewma_variance_mode not in ("paper", "asymptotic", "exact_time_varying"):
            raise ValueError(f"unknown ewma_variance_mode {self.ewma_variance_mode!r}")
        if self.ewma_variance_mode == "paper" and self.gamma == 1:
            raise ValueError("the 'paper' variance gamma/(1-gamma) is undefined at gamma=1")
        if self.calibration_mode not in ("analytic", "monte_carlo", "auto"):
            raise ValueError(f"unknown calibration_mode {self.calibration_mode!r}")

    @property
    def alpha_level(self) -> float:
        return self.alpha if self.alpha is not None else 1.0 / self.target_arl

    @property
    def arl(self) -> float:
        return self.target_arl if self.target_arl is not None else 1.0 / self.alpha

    def resolved_calibration(self, p: int) -> Literal["analytic", "monte_carlo"]:
        if self.calibration_mode != "auto":
            return self.calibration_mode
        return "analytic" if p >= ANALYTIC_MIN_P else "monte_carlo"


@dataclass
class MonitorState:
    """Per-stream EWMA memory. ``first_alarm`` is the run length once tripped."""

    z: np.ndarray
    r0: float
    t: int = 0
    tripped: bool = False
    first_alarm: int | None = None

    @classmethod
    def initial(cls, p: int, r0: float) -> "MonitorState":
        return cls(z=np.zeros(p), r0=float(r0))


@dataclass(frozen=True)
class ChartPoint:
    t: int
    r: float
    alarm: bool
    d: np.ndarray
    contributions: np.ndarray


@dataclass(frozen=True)
class ThresholdMoments:
    """Moments of ``max(0, X - nu)`` for ``X ~ chi2(1)``."""

    mean: float
    second_moment: float
    variance: float


@dataclass(frozen=True)
class CalibrationResult:
    r0: float
    empirical_arl: float
    arl_se: float
    reps: int
    seed: int
    horizon: int
    converged: bool
    bracket: tuple[float, float]
    censored: int = 0
    method: str = "monte_carlo"

    def to_dict(self, cfg: MonitorConfig | None = None) -> dict:
        out = {
            "r0": self.r0,
            "mode": self.method,
            "reps": self.reps,
            "seed": self.seed,
            "empirical_arl": self.empirical_arl,
            "arl_se": self.arl_se,
            "horizon": self.horizon,
            "converged": self.converged,
            "bracket": list(self.bracket),
            "censored": self.censored,
        }
        if cfg is not None:
            out.update(
                gamma=cfg.gamma,
                nu=cfg.nu,
                alpha=cfg.alpha_level,
                target_arl=cfg.arl,
                ewma_variance_mode=cfg.ewma_variance_mode,
            )
        return out


def nu_from_significance(level: float) -> float:
    """Threshold ``nu`` as the upper ``level`` quantile of chi2(1)."""
    if not 0 < level < 1:
        raise ValueError("significance level must lie in (0, 1)")
    return float(stats.chi2.isf(level, 1))


def ewma_variance(gamma: float, mode: VarianceMode, t=None):
    """Variance used to normalize the EWMA of unit-variance scores.

    ``paper`` is gamma/(1-gamma); ``asymptotic`` is the steady-state
    gamma/(2-gamma); ``exact_time_varying`` adds the finite-t factor
    ``1 - (1-gamma)^(2t)`` for an EWMA started at zero.
    """
    if mode == "paper":
        return gamma / (1.0 - gamma)
    steady = gamma / (2.0 - gamma)
    if mode == "asymptotic":
        return steady
    if mode == "exact_time_varying":
        if t is None:
            raise ValueError("exact_time_varying needs the step index t")
        t = np.asarray(t, dtype=float)
        return steady * (1.0 - (1.0 - gamma) ** (2.0 * t))
    raise ValueError(f"unknown variance mode {mode!r}")


def ewma_step(state: MonitorState, ytilde, cfg: MonitorConfig) -> np.ndarray:
    """Return the next EWMA vector; ``state`` is not modified."""
    y = np.asarray(ytilde, dtype=float)
    if y.shape != state.z.shape:
        raise ValueError(f"expected {state.z.shape[0]} scores, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite standardized scores")
    return cfg.gamma * y + (1.0 - cfg.gamma) * state.z


def d_statistic(z, t: int, cfg: MonitorConfig) -> np.ndarray:
    if t < 1:
        raise ValueError("t must be >= 1")
    z = np.asarray(z, dtype=float)
    return z * z / ewma_variance(cfg.gamma, cfg.ewma_variance_mode, t)


def r_statistic(d, nu: float) -> float:
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    return float(np.maximum(np.asarray(d, dtype=float) - nu, 0.0).sum())


def threshold_moments(nu: float) -> ThresholdMoments:
    """Closed-form first and second moments of the soft-thresholded chi2(1)."""
    if not nu >= 0:
        raise ValueError("nu must be nonnegative")
    # Gamma(0.5, nu/2) / Gamma(0.5) is the regularized upper incomplete gamma,
    # which is also P(chi2_1 > nu); working with it keeps nu = 0 exact.
    tail = float(special.gammaincc(0.5, nu / 2.0))
    edge = math.exp(-nu / 2.0) * math.sqrt(2.0 * nu) / math.sqrt(math.pi)
    mean = tail + edge - nu * tail
    second = 3.0 * tail + edge * (3.0 + nu) - 2.0 * nu * mean - nu * nu * tail
    var = max(second - mean * mean, 0.0)
    return ThresholdMoments(mean=float(mean), second_moment=float(second), variance=float(var))


def control_limit_analytic(p: int, nu: float, alpha: float) -> float:
    """Normal-approximation limit ``p*mu + sqrt(p)*sigma*z_{1-alpha}``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    m = threshold_moments(nu)
    return p * m.mean + math.sqrt(p) * math.sqrt(m.variance) * float(stats.norm.isf(alpha))


def ewma_r_block(ytilde: np.ndarray, cfg: MonitorConfig, z0: np.ndarray, t0: int):
    """Vectorized chart over a block of standardized scores ``(T, p)``.

    ``z0`` is the EWMA state before the block and ``t0`` the index of the
    first row. Returns ``(R, z_last)``.
    """
    g = cfg.gamma
    zi = ((1.0 - g) * z0)[None, :]
    z, _ = lfilter([g], [1.0, g - 1.0], ytilde, axis=0, zi=zi)
    t = np.arange(t0, t0 + ytilde.shape[0])
    var = ewma_variance(g, cfg.ewma_variance_mode, t)
    if np.ndim(var):
        var = var[:, None]
    d = z * z / var
    r = np.maximum(d - cfg.nu, 0.0).sum(axis=1)
    return r, z[-1]


def _chunk_rows(p: int) -> int:
    return max(16, min(4096, 2_000_000 // max(p, 1)))


def in_control_r_path(p: int, cfg: MonitorConfig, horizon: int, rng: np.random.Generator) -> np.ndarray:
    """R_1..R_horizon for an in-control stream of i.i.d. N(0,1) standardized scores.

    Standardized scores of an in-control N(mean, Sigma) stream are
    uncorrelated with unit variance, so this does not depend on Sigma.
    """
    out = np.empty(horizon)
    z = np.zeros(p)
    step = _chunk_rows(p)
    for start in range(0, horizon, step):
        n = min(step, horizon - start)
        out[start:start + n], z = ewma_r_block(rng.standard_normal((n, p)), cfg, z, start + 1)
    return out


def run_lengths_from_cummax(cummax: np.ndarray, r0: float) -> np.ndarray:
    """First index with ``R > r0`` (1-based); censored runs get ``horizon + 1``."""
    return (cummax <= r0).sum(axis=1) + 1


def control_limit_montecarlo(
    model: PCModel | int,
    cfg: MonitorConfig,
    target_arl: float | None = None,
    reps: int = 1000,
    seed: int = 0,
    *,
    horizon: int | None = None,
    rel_tol: float = 0.05,
    max_iter: int = 200,
) -> CalibrationResult:
    """Bisect ``R0`` so the simulated in-control ARL matches ``target_arl``.

    All candidate limits are evaluated on the same simulated paths (common
    random numbers), which makes the empirical ARL monotone in ``R0`` and
    the result deterministic given ``seed``. Runs that never alarm within
    ``horizon`` (default ``10 * target``) are censored at ``horizon + 1``.
    """
    p = model if isinstance(model, int) else model.p
    target = float(target_arl if target_arl is not None else cfg.arl)
    if reps < 100:
        raise ValueError("reps must be >= 100")
    if not target > 1:
        raise ValueError("target ARL must exceed 1")
    horizon = int(horizon or max(100, math.ceil(10 * target)))
    cummax = np.empty((reps, horizon))
    for i in range(reps):
        cummax[i] = np.maximum.accumulate(in_control_r_path(p, cfg, horizon, rep_rng(seed, i)))

    def arl(r0):
        return run_lengths_from_cummax(cummax, r0).mean()

    lo, hi = 0.0, float(cummax[:, -1].max())
    if arl(lo) >= target:
        hi = lo
    for _ in range(max_iter):
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if arl(mid) < target:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda r: abs(arl(r) - target))
    rl = run_lengths_from_cummax(cummax, best)
    emp = float(rl.mean())
    converged = abs(emp - target) <= rel_tol * target
    if not converged:
        log.warning("MC calibration missed target ARL %.1f (got %.1f, bracket %.4g..%.4g)", target, emp, lo, hi)
    return CalibrationResult(
        r0=float(best),
        empirical_arl=emp,
        arl_se=float(rl.std(ddof=1) / math.sqrt(reps)),
        reps=reps,
        seed=seed,
        horizon=horizon,
        converged=converged,
        bracket=(float(lo), float(hi)),
        censored=int((rl > horizon).sum()),
    )


def simulate_in_control_arl(p: int, cfg: MonitorConfig, r0: float, reps: int, seed: int, horizon: int | None = None):
    """Empirical in-control ARL (mean, standard error) of a given limit."""
    horizon = int(horizon or max(100, math.ceil(10 * cfg.arl)))
    rl = np.empty(reps)
    for i in range(reps):
        path = in_control_r_path(p, cfg, horizon, rep_rng(seed, i))
        hits = np.flatnonzero(path > r0)
        rl[i] = hits[0] + 1 if hits.size else horizon + 1
    return float(rl.mean()), float(rl.std(ddof=1) / math.sqrt(reps))


def calibrate(model: PCModel | int, cfg: MonitorConfig, reps: int = 1000, seed: int = 0) -> CalibrationResult:
    """Dispatch on ``cfg.calibration_mode`` (``auto`` picks by dimension)."""
    p = model if isinstance(model, int) else model.p
    if cfg.resolved_calibration(p) == "analytic":
        r0 = control_limit_analytic(p, cfg.nu, cfg.alpha_level)
        return CalibrationResult(
            r0=r0, empirical_arl=float("nan"), arl_se=float("nan"), reps=0, seed=seed,
            horizon=0, converged=True, bracket=(r0, r0), method="analytic",
        )
    return control_limit_montecarlo(p, cfg, cfg.arl, reps=reps, seed=seed)


def monitor_step(state: MonitorState, model: PCModel, x, cfg: MonitorConfig) -> ChartPoint:
    """Advance the chart by one observation and mutate ``state``."""
    scores = project(model, x)
    z = ewma_step(state, scores.standardized, cfg)
    t = state.t + 1
    d = d_statistic(z, t, cfg)
    contrib = np.maximum(d - cfg.nu, 0.0)
    r = float(contrib.sum())
    alarm = r > state.r0
    state.z = z
    state.t = t
    if alarm and not state.tripped:
        state.tripped = True
        state.first_alarm = t
    return ChartPoint(t=t, r=r, alarm=alarm, d=d, contributions=contrib)


def run_chart(state: MonitorState, model: PCModel, rows, cfg: MonitorConfig) -> list[ChartPoint]:
    return [monitor_step(state, model, x, cfg) for x in np.asarray(rows, dtype=float)]
