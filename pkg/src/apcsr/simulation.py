"""Scenario generators and Monte-Carlo experiment drivers.

Every replication draws from its own generator derived from ``(seed, rep)``
(see :mod:`apcsr._rng`), so results do not depend on evaluation order.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.signal import lfilter
from scipy import stats

from ._rng import sub_rng
from .benchmarks import PcaChartConfig, calibrate_t2q, t2_q_from_standardized
from .diagnosis import PathConfig, diagnose, diagnose_leb
from .monitoring import (
    MonitorConfig,
    control_limit_analytic,
    control_limit_montecarlo,
    ewma_r_block,
    ewma_variance,
)
from .pca import from_known, shift_magnitude_profile

ScenarioKind = Literal["random_wishart", "block_diagonal", "ar1"]

#: Monitoring parameters used by the ARL experiments: gamma = 0.4 and nu at the
#: 5% point of chi2(1).
ARL_MONITOR = dict(gamma=0.4, nu=float(stats.chi2.isf(0.05, 1)))


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind
    p: int
    blocks: int = 12
    rho: float = 0.5
    shift_fraction: float = 0.2
    delta: float = 1.0
    seed: int = 0
    wishart_df: int | None = None

    def __post_init__(self):
        if self.kind not in ("random_wishart", "block_diagonal", "ar1"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not 0 < self.shift_fraction <= 1:
            raise ValueError("shift_fraction must lie in (0, 1]")
        if self.kind == "block_diagonal" and self.p < self.blocks:
            raise ValueError("block_diagonal needs p >= blocks")
        if self.blocks < 1:
            raise ValueError("blocks must be >= 1")
        if not -1 < self.rho < 1:
            raise ValueError("rho must lie in (-1, 1)")

    @property
    def df(self) -> int:
        return self.wishart_df if self.wishart_df is not None else self.p + 2


def block_bounds(p: int, blocks: int) -> list[tuple[int, int]]:
    """Half-open index ranges of ``blocks`` blocks of size ``p // blocks``; the last takes the remainder."""
    if p < blocks:
        raise ValueError("p must be >= blocks")
    size = p // blocks
    edges = [k * size for k in range(blocks)] + [p]
    return [(edges[k], edges[k + 1]) for k in range(blocks)]


def _wishart_correlation(p: int, df: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.standard_normal((df, p))
    w = x.T @ x
    s = np.sqrt(np.diag(w))
    c = w / np.outer(s, s)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return c


def gen_covariance(spec: ScenarioSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Unit-diagonal covariance for ``spec``; deterministic in ``spec.seed`` when ``rng`` is omitted."""
    if spec.kind == "ar1":
        i = np.arange(spec.p)
        return spec.rho ** np.abs(i[:, None] - i[None, :])
    rng = rng if rng is not None else sub_rng(spec.seed, 0)
    if spec.kind == "random_wishart":
        return _wishart_correlation(spec.p, spec.df, rng)
    cov = np.zeros((spec.p, spec.p))
    for lo, hi in block_bounds(spec.p, spec.blocks):
        size = hi - lo
        df = spec.wishart_df if spec.wishart_df is not None else size + 2
        cov[lo:hi, lo:hi] = _wishart_correlation(size, df, rng)
    return cov


def gen_shift(spec: ScenarioSpec, rng: np.random.Generator | None = None, delta: float | None = None) -> np.ndarray:
    """Sparse mean shift with ``ceil(PS * p)`` entries equal to ``delta``.

    For the block-diagonal scenario the shifted variables all come from one
    randomly chosen block; the count is capped at that block's size.
    """
    rng = rng if rng is not None else sub_rng(spec.seed, 1)
    delta = spec.delta if delta is None else delta
    mu = np.zeros(spec.p)
    k = math.ceil(spec.shift_fraction * spec.p - 1e-9)
    if spec.kind == "block_diagonal":
        bounds = block_bounds(spec.p, spec.blocks)
        lo, hi = bounds[rng.integers(len(bounds))]
        idx = lo + rng.choice(hi - lo, size=min(k, hi - lo), replace=False)
    else:
        idx = rng.choice(spec.p, size=k, replace=False)
    mu[idx] = delta
    return mu


# --------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    """Tabular result of an experiment plus raw per-replication values."""

    experiment: str
    columns: list[str]
    rows: list[dict]
    reps: int
    runtime: float
    config: dict
    raw: dict = field(default_factory=dict)

    def cell(self, **match) -> dict:
        hits = [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {match}")
        return hits[0]

    def table(self) -> tuple[list[str], list[dict]]:
        """Wide layout: one row per shift size with a column group per method.

        Reports without a ``method`` column are already wide.
        """
        if "method" not in self.columns:
            return self.columns, self.rows
        keys = [c for c in self.columns if c in ("ps", "delta")]
        values = [c for c in self.columns if c not in keys and c != "method"]
        methods = list(dict.fromkeys(r["method"] for r in self.rows))
        out: dict[tuple, dict] = {}
        for r in self.rows:
            k = tuple(r[c] for c in keys)
            row = out.setdefault(k, {c: r[c] for c in keys})
            for v in values:
                row[f"{r['method']}_{v}"] = r.get(v)
        cols = keys + [f"{m}_{v}" for m in methods for v in values]
        return cols, list(out.values())

    def to_csv(self, path: str | Path) -> None:
        cols, rows = self.table()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: _csv_value(row.get(k)) for k in cols})

    def to_json(self, path: str | Path) -> None:
        blob = {
            "experiment": self.experiment,
            "reps": self.reps,
            "runtime_seconds": self.runtime,
            "config": self.config,
            "rows": self.rows,
            "raw": self.raw,
        }
        Path(path).write_text(json.dumps(blob, indent=2, default=_jsonable) + "\n", encoding="utf-8")


def _csv_value(v):
    if isinstance(v, float):
        return format(v, ".6g")
    return v


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    raise TypeError(f"not serializable: {type(v)}")


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return float(v.mean()), se


# --------------------------------------------------------------------------
# type-I error


@dataclass(frozen=True)
class Type1Result:
    kind: str
    p: int
    nu: float
    alpha: float
    alpha_tilde: float
    se: float
    per_rep: np.ndarray


def _rows_per_chunk(p: int) -> int:
    return max(1, min(1000, 1_000_000 // p))


def _type1_counts(kind, p, nus, r0s, horizon, rng, cfg):
    """Exceedance counts per threshold for one replication."""
    counts = np.zeros(len(nus), dtype=np.int64)
    z = np.zeros(p)
    step = _rows_per_chunk(p)
    for start in range(0, horizon, step):
        n = min(step, horizon - start)
        block = rng.standard_normal((n, p))
        if kind == "iid_chisq":
            d = np.square(block, out=block)
        elif kind == "ewma_pipeline":
            g = cfg.gamma
            zs, _ = lfilter([g], [1.0, g - 1.0], block, axis=0, zi=((1.0 - g) * z)[None, :])
            z = zs[-1].copy()
            t = np.arange(start + 1, start + n + 1)
            var = ewma_variance(g, cfg.ewma_variance_mode, t)
            d = zs * zs / (var[:, None] if np.ndim(var) else var)
        else:
            raise ValueError(f"unknown type-I experiment kind {kind!r}")
        for i, (nu, r0) in enumerate(zip(nus, r0s)):
            r = np.maximum(d - nu, 0.0).sum(axis=1)
            counts[i] += int(np.count_nonzero(r > r0))
    return counts


def run_type1_table(
    kind: Literal["iid_chisq", "ewma_pipeline"],
    ps: Sequence[int],
    nus: Sequence[float],
    alpha: float = 0.005,
    reps: int = 200,
    seed: int = 0,
    *,
    horizon: int = 1000,
    gamma: float = 0.4,
    ewma_variance_mode: str = "paper",
) -> ExperimentReport:
    """Empirical false-alarm rate of the analytic limit on a ``(nu, p)`` grid.

    All thresholds in a replication reuse the same draws; the stream for
    dimension ``p`` and replication ``rep`` depends only on ``(seed, p, rep)``.
    """
    t0 = time.perf_counter()
    nus = [float(v) for v in nus]
    cfg = MonitorConfig(gamma=gamma, nu=nus[0], alpha=alpha, ewma_variance_mode=ewma_variance_mode)
    rates = {}
    for p in ps:
        r0s = [control_limit_analytic(p, nu, alpha) for nu in nus]
        per = np.empty((reps, len(nus)))
        for rep in range(reps):
            per[rep] = _type1_counts(kind, p, nus, r0s, horizon, sub_rng(seed, p, rep), cfg) / horizon
        for i, nu in enumerate(nus):
            rates[(nu, p)] = per[:, i]
    rows = []
    for nu in nus:
        row = {"nu": nu}
        for p in ps:
            row[f"p={p}"] = float(rates[(nu, p)].mean())
            row[f"se(p={p})"] = _mean_se(rates[(nu, p)])[1]
        rows.append(row)
    columns = ["nu"] + [f"p={p}" for p in ps] + [f"se(p={p})" for p in ps]
    return ExperimentReport(
        experiment=f"type1_{kind}",
        columns=columns,
        rows=rows,
        reps=reps,
        runtime=time.perf_counter() - t0,
        config=dict(kind=kind, ps=list(ps), nus=nus, alpha=alpha, seed=seed, horizon=horizon,
                    gamma=gamma, ewma_variance_mode=ewma_variance_mode),
        raw={f"nu={nu},p={p}": rates[(nu, p)] for nu in nus for p in ps},
    )


def run_type1_experiment(
    kind: Literal["iid_chisq", "ewma_pipeline"],
    p: int,
    nu: float,
    alpha: float = 0.005,
    reps: int = 200,
    seed: int = 0,
    *,
    horizon: int = 1000,
    gamma: float = 0.4,
    ewma_variance_mode: str = "paper",
) -> Type1Result:
    """Single ``(p, nu)`` cell of :func:`run_type1_table`."""
    rep = run_type1_table(kind, [p], [nu], alpha, reps, seed, horizon=horizon, gamma=gamma,
                          ewma_variance_mode=ewma_variance_mode)
    per = np.asarray(rep.raw[f"nu={float(nu)},p={p}"])
    mean, se = _mean_se(per)
    return Type1Result(kind=kind, p=p, nu=float(nu), alpha=alpha, alpha_tilde=mean, se=se, per_rep=per)


# --------------------------------------------------------------------------
# ARL


def _apc_run_length(profile, cfg, r0, change_time, horizon, rng, max_restarts=100):
    """Post-change run length of APC (1 = alarm at the change point)."""
    p = profile.shape[0]
    warm = change_time - 1
    for _ in range(max_restarts):
        z = np.zeros(p)
        if warm:
            r, z = ewma_r_block(rng.standard_normal((warm, p)), cfg, z, 1)
            if np.any(r > r0):
                continue  # false alarm before the change: redraw the in-control stretch
        t = change_time
        step = max(8, min(256, 400_000 // p))
        done = 0
        while done < horizon:
            n = min(step, horizon - done)
            r, z = ewma_r_block(rng.standard_normal((n, p)) + profile, cfg, z, t)
            hits = np.flatnonzero(r > r0)
            if hits.size:
                return done + int(hits[0]) + 1
            t += n
            done += n
        return horizon + 1
    raise RuntimeError("could not draw an alarm-free in-control stretch")


def _t2q_run_length(profile, lam, limits, horizon, rng):
    p = profile.shape[0]
    step = max(8, min(256, 400_000 // p))
    done = 0
    while done < horizon:
        n = min(step, horizon - done)
        t2, q = t2_q_from_standardized(rng.standard_normal((n, p)) + profile, lam, limits.k)
        alarm = t2 > limits.t2
        if not limits.q_degenerate:
            alarm |= q > limits.q
        hits = np.flatnonzero(alarm)
        if hits.size:
            return done + int(hits[0]) + 1
        done += n
    return horizon + 1


def run_arl_experiment(
    spec: ScenarioSpec,
    methods: Iterable[str] = ("apc", "pca_t2q"),
    target_arl: float = 200.0,
    reps: int = 1000,
    seed: int = 0,
    *,
    deltas: Sequence[float] | None = None,
    apc_cfg: MonitorConfig | None = None,
    chart_cfg: PcaChartConfig | None = None,
    calib_reps: int = 1000,
    change_time: int = 50,
    horizon: int | None = None,
    covariance_per_rep: bool = True,
    t2q_samples: int = 50_000,
) -> ExperimentReport:
    """Out-of-control ARL per method and shift size.

    Each replication draws a shift pattern and, for the random scenarios with
    ``covariance_per_rep``, a fresh covariance; otherwise one covariance is
    drawn from ``spec.seed``. Run lengths count from the change time (an alarm
    at the first shifted observation is 1). A false alarm before the change
    restarts the in-control stretch.

    The APC limit depends only on ``p`` (standardized scores are i.i.d.
    N(0, 1) whatever the covariance), so it is calibrated once. T^2/Q limits
    depend on the spectrum and are calibrated for every covariance drawn.
    Calibration failures are reported per cell and do not stop other cells.
    """
    t0 = time.perf_counter()
    methods = list(methods)
    unknown = set(methods) - {"apc", "pca_t2q"}
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    deltas = [spec.delta] if deltas is None else [float(d) for d in deltas]
    horizon = int(horizon or 10 * target_arl)
    apc_cfg = apc_cfg or MonitorConfig(target_arl=target_arl, **ARL_MONITOR)
    chart_cfg = chart_cfg or PcaChartConfig()
    per_rep = covariance_per_rep and spec.kind != "ar1"

    errors: dict[str, str] = {}
    apc_cal = None
    if "apc" in methods:
        try:
            apc_cal = control_limit_montecarlo(spec.p, apc_cfg, target_arl, reps=calib_reps, seed=seed)
        except Exception as exc:
            errors["apc"] = str(exc)

    def t2q_limits(model, key):
        try:
            return calibrate_t2q(model, chart_cfg, target_arl, n_samples=t2q_samples, seed=key)
        except Exception as exc:
            errors.setdefault("pca_t2q", str(exc))
            return None

    fixed = None
    if not per_rep:
        model = from_known(np.zeros(spec.p), gen_covariance(spec))
        fixed = (model, t2q_limits(model, seed) if "pca_t2q" in methods else None)

    rl = {(m, d): np.full(reps, np.nan) for m in methods for d in deltas}
    t2q_arl0 = []
    for rep in range(reps):
        if per_rep:
            model = from_known(np.zeros(spec.p), gen_covariance(spec, sub_rng(seed, 0, rep)))
            limits = t2q_limits(model, sub_rng(seed, 0, rep).integers(2**31)) if "pca_t2q" in methods else None
        else:
            model, limits = fixed
        if limits is not None:
            t2q_arl0.append(limits.empirical_arl)
        lam = model.floored_eigvals
        for di, delta in enumerate(deltas):
            for mi, m in enumerate(methods):
                rng = sub_rng(seed, 1, di, mi, rep)
                mu = gen_shift(spec, rng, delta=delta)
                profile = shift_magnitude_profile(model, mu)
                if m == "apc" and apc_cal is not None:
                    rl[(m, delta)][rep] = _apc_run_length(profile, apc_cfg, apc_cal.r0, change_time, horizon, rng)
                elif m == "pca_t2q" and limits is not None:
                    rl[(m, delta)][rep] = _t2q_run_length(profile, lam, limits, horizon, rng)

    rows, raw = [], {}
    for m in methods:
        ic = apc_cal.empirical_arl if m == "apc" and apc_cal is not None else (
            float(np.mean(t2q_arl0)) if m == "pca_t2q" and t2q_arl0 else float("nan"))
        for delta in deltas:
            row = {"method": m, "delta": delta}
            v = rl[(m, delta)]
            if m in errors or np.isnan(v).any():
                row.update(arl=float("nan"), se=float("nan"), censored=0, in_control_arl=ic,
                           error=errors.get(m, "calibration failed"))
            else:
                arl, se = _mean_se(v)
                row.update(arl=arl, se=se, censored=int((v > horizon).sum()), in_control_arl=ic, error="")
                raw[f"{m},delta={delta}"] = v
            rows.append(row)
    cal_echo = {}
    if apc_cal is not None:
        cal_echo["apc"] = apc_cal.to_dict(apc_cfg)
    if fixed is not None and fixed[1] is not None:
        cal_echo["pca_t2q"] = asdict(fixed[1])
    return ExperimentReport(
        experiment="arl",
        columns=["method", "delta", "arl", "se", "censored", "in_control_arl", "error"],
        rows=rows,
        reps=reps,
        runtime=time.perf_counter() - t0,
        config=dict(spec=asdict(spec), methods=methods, target_arl=target_arl, seed=seed, deltas=deltas,
                    calib_reps=calib_reps, change_time=change_time, horizon=horizon,
                    covariance_per_rep=per_rep, t2q_samples=t2q_samples, cpv=chart_cfg.cpv,
                    gamma=apc_cfg.gamma, nu=apc_cfg.nu, calibration=cal_echo, errors=errors),
        raw=raw,
    )


# --------------------------------------------------------------------------
# diagnosis


@dataclass(frozen=True)
class SelectionScore:
    fn_pct: float
    fp_pct: float
    pss: int
    f1: float
    f1_defined: bool


def selection_metrics(selected, truth, p: int) -> SelectionScore:
    """FN% over truly shifted variables, FP% over unshifted ones, PSS and F1.

    When there is nothing to find and nothing is selected, F1 is undefined;
    it is reported as 0 with ``f1_defined = False``.
    """
    sel = set(int(i) for i in selected)
    true = set(int(i) for i in truth)
    tp = len(sel & true)
    fp = len(sel - true)
    fn = len(true - sel)
    n_true, n_null = len(true), p - len(true)
    fn_pct = 100.0 * fn / n_true if n_true else 0.0
    fp_pct = 100.0 * fp / n_null if n_null else 0.0
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if tp else 0.0
    return SelectionScore(fn_pct=fn_pct, fp_pct=fp_pct, pss=fp + fn, f1=f1, f1_defined=n_true > 0)


def _sample_mvn(mean, eigvecs, eigvals, m, rng):
    root = eigvecs * np.sqrt(np.maximum(eigvals, 0.0))
    return mean + rng.standard_normal((m, eigvals.shape[0])) @ root.T


def run_diagnosis_experiment(
    spec: ScenarioSpec,
    methods: Iterable[str] = ("pcsr", "leb"),
    reps: int = 100,
    seed: int = 0,
    *,
    deltas: Sequence[float] | None = None,
    m: int = 25,
    path_cfg: PathConfig | None = None,
) -> ExperimentReport:
    """Average FN%, FP%, PSS and F1 of the diagnosis methods.

    Each replication draws a fresh covariance (for the random scenarios), a
    fresh shift pattern and ``m`` out-of-control samples; the covariance is
    treated as known.
    """
    t0 = time.perf_counter()
    methods = list(methods)
    fns = {"pcsr": diagnose, "leb": diagnose_leb}
    unknown = set(methods) - set(fns)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    deltas = [spec.delta] if deltas is None else [float(d) for d in deltas]
    per = {(mt, d): [] for mt in methods for d in deltas}
    for di, delta in enumerate(deltas):
        for rep in range(reps):
            rng = sub_rng(seed, 2, di, rep)
            cov = gen_covariance(spec, rng)
            model = from_known(np.zeros(spec.p), cov)
            mu = gen_shift(spec, rng, delta=delta)
            x = _sample_mvn(mu, model.eigvecs, model.eigvals, m, rng)
            truth = np.flatnonzero(mu)
            for mt in methods:
                res = fns[mt](model, x, path_cfg)
                per[(mt, delta)].append(selection_metrics(res.support, truth, spec.p))
    rows, raw = [], {}
    for mt in methods:
        for delta in deltas:
            s = per[(mt, delta)]
            rows.append({
                "method": mt,
                "delta": delta,
                "ps": spec.shift_fraction,
                "fn_pct": float(np.mean([v.fn_pct for v in s])),
                "fp_pct": float(np.mean([v.fp_pct for v in s])),
                "pss": float(np.mean([v.pss for v in s])),
                "f1": float(np.mean([v.f1 for v in s])),
                "f1_defined": all(v.f1_defined for v in s),
            })
            raw[f"{mt},delta={delta}"] = [asdict(v) for v in s]
    return ExperimentReport(
        experiment="diagnosis",
        columns=["method", "ps", "delta", "fn_pct", "fp_pct", "pss", "f1", "f1_defined"],
        rows=rows,
        reps=reps,
        runtime=time.perf_counter() - t0,
        config=dict(spec=asdict(spec), methods=methods, seed=seed, deltas=deltas, m=m,
                    path=asdict(path_cfg or PathConfig())),
        raw=raw,
    )


# --------------------------------------------------------------------------
# synthetic rolling image


@dataclass(frozen=True)
class RollingImageSpec:
    """Synthetic stand-in for a rolling-surface image (one row = one observation).

    Pixel intensities follow a row-wise AR(1) texture around a smooth
    background. From row ``change_row`` (0-based) on, the pixels in
    ``defect_cols`` darken by ``defect_depth`` noise standard deviations.
    """

    n_rows: int = 198
    n_cols: int = 300
    change_row: int = 126
    defect_cols: tuple[int, int] = (20, 50)
    defect_depth: float = 6.0
    rho: float = 0.6
    noise_sd: float = 8.0
    background: float = 160.0
    n_phase1: int = 20000

    def __post_init__(self):
        lo, hi = self.defect_cols
        if not 0 <= lo < hi <= self.n_cols:
            raise ValueError("defect_cols out of range")
        if not 0 < self.change_row < self.n_rows:
            raise ValueError("change_row out of range")


@dataclass(frozen=True)
class RollingImage:
    phase1: np.ndarray
    image: np.ndarray
    shifted_cols: np.ndarray
    change_row: int
    mean: np.ndarray
    covariance: np.ndarray


def _ar1_cov(n: int, rho: float, sd: float) -> np.ndarray:
    i = np.arange(n)
    return sd * sd * rho ** np.abs(i[:, None] - i[None, :])


def synthetic_rolling_image(spec: RollingImageSpec = RollingImageSpec(), seed: int = 0) -> RollingImage:
    """Phase-I rows plus one monitored image with a defect from ``change_row`` on."""
    rng = sub_rng(seed, 3)
    cols = np.arange(spec.n_cols)
    mean = spec.background + 10.0 * np.sin(2 * np.pi * cols / spec.n_cols)
    cov = _ar1_cov(spec.n_cols, spec.rho, spec.noise_sd)
    chol = np.linalg.cholesky(cov)
    phase1 = mean + rng.standard_normal((spec.n_phase1, spec.n_cols)) @ chol.T
    image = mean + rng.standard_normal((spec.n_rows, spec.n_cols)) @ chol.T
    lo, hi = spec.defect_cols
    image[spec.change_row:, lo:hi] -= spec.defect_depth * spec.noise_sd
    return RollingImage(
        phase1=phase1,
        image=image,
        shifted_cols=np.arange(lo, hi),
        change_row=spec.change_row,
        mean=mean,
        covariance=cov,
    )


# --------------------------------------------------------------------------
# top versus bottom PCs


def pc_sensitivity_demo(
    p: int = 500,
    n_in: int = 50,
    n_out: int = 50,
    shift_fraction: float = 0.1,
    delta: float = 0.05,
    n_pcs: int = 5,
    seed: int = 0,
) -> dict:
    """Standardized scores of the top and bottom ``n_pcs`` PCs around a small shift.

    A Wishart correlation matrix is used for the process; the shift of
    ``delta`` standard deviations hits a random ``shift_fraction`` of the
    variables from observation ``n_in + 1`` on. Returns the score series and,
    per PC, the expected standardized shift.
    """
    spec = ScenarioSpec("random_wishart", p, shift_fraction=shift_fraction, delta=delta, seed=seed)
    cov = gen_covariance(spec)
    model = from_known(np.zeros(p), cov)
    mu = gen_shift(spec)
    rng = sub_rng(seed, 4)
    x = _sample_mvn(np.zeros(p), model.eigvecs, model.eigvals, n_in + n_out, rng)
    x[n_in:] += mu
    ytilde = (x @ model.eigvecs) / np.sqrt(model.floored_eigvals)
    profile = shift_magnitude_profile(model, mu)
    return {
        "top": ytilde[:, :n_pcs],
        "bottom": ytilde[:, -n_pcs:],
        "top_shift": profile[:n_pcs],
        "bottom_shift": profile[-n_pcs:],
        "change_index": n_in,
    }


__all__ = [
    "ScenarioSpec", "block_bounds", "gen_covariance", "gen_shift", "ExperimentReport", "Type1Result",
    "run_type1_table", "run_type1_experiment", "run_arl_experiment", "SelectionScore", "selection_metrics",
    "run_diagnosis_experiment", "RollingImageSpec", "RollingImage", "synthetic_rolling_image",
    "pc_sensitivity_demo", "ARL_MONITOR",
]
