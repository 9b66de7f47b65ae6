"""Conventional PCA monitoring: Hotelling T^2 on retained PCs plus the Q (SPE) residual."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import sub_rng
from .pca import PCModel, project


@dataclass(frozen=True)
class PcaChartConfig:
    cpv: float = 0.90

    def __post_init__(self):
        if not 0 < self.cpv <= 1:
            raise ValueError("cpv must lie in (0, 1]")


@dataclass(frozen=True)
class T2QLimits:
    t2: float
    q: float
    k: int
    alpha_each: float
    empirical_arl: float
    n_samples: int
    seed: int
    q_degenerate: bool = False


def retained_components(eigvals, cpv: float) -> int:
    """Smallest ``k`` whose leading eigenvalues explain at least ``cpv`` of the variance."""
    lam = np.asarray(eigvals, dtype=float)
    frac = np.cumsum(lam) / lam.sum()
    # tolerate round-off at exact ratios such as 9/10
    return int(np.searchsorted(frac, cpv - 1e-12) + 1)


def t2_q_from_standardized(ytilde: np.ndarray, eigvals: np.ndarray, k: int):
    """T^2 and Q from standardized scores (rows = observations)."""
    t2 = np.sum(ytilde[..., :k] ** 2, axis=-1)
    q = np.sum(eigvals[k:] * ytilde[..., k:] ** 2, axis=-1)
    return t2, q


def t2_q_step(model: PCModel, x, cfg: PcaChartConfig, limits: T2QLimits):
    """One observation: ``(t2, q, alarm)``; the alarm is the union of both charts."""
    scores = project(model, x)
    k = limits.k
    y = scores.raw
    t2 = float(np.sum(y[:k] ** 2 / model.floored_eigvals[:k]))
    q = float(np.sum(y[k:] ** 2))
    alarm = t2 > limits.t2 or (not limits.q_degenerate and q > limits.q)
    return t2, q, alarm


def calibrate_t2q(
    model: PCModel,
    cfg: PcaChartConfig,
    target_arl: float = 200.0,
    n_samples: int = 200_000,
    seed: int = 0,
) -> T2QLimits:
    """Monte-Carlo limits with a Bonferroni split: each chart gets the same tail level.

    The charts are memoryless, so the in-control run length is geometric and
    its mean is ``1 / P(alarm)``; the common tail level is bisected until the
    simulated joint alarm rate gives ``target_arl``.
    """
    k = retained_components(model.eigvals, cfg.cpv)
    lam = model.floored_eigvals
    rng = sub_rng(seed, 0)
    t2 = np.empty(n_samples)
    q = np.empty(n_samples)
    step = max(1, 2_000_000 // model.p)
    for start in range(0, n_samples, step):
        n = min(step, n_samples - start)
        t2[start:start + n], q[start:start + n] = t2_q_from_standardized(rng.standard_normal((n, model.p)), lam, k)
    degenerate = k >= model.p
    t2s, qs = np.sort(t2), np.sort(q)
    target_rate = 1.0 / target_arl

    def limits_for(a):
        h_t = float(np.quantile(t2s, 1 - a))
        h_q = float(np.quantile(qs, 1 - a)) if not degenerate else math.inf
        return h_t, h_q

    def rate(a):
        h_t, h_q = limits_for(a)
        return float(np.mean((t2 > h_t) | (q > h_q)))

    lo, hi = 0.0, target_rate
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if rate(mid) < target_rate:
            lo = mid
        else:
            hi = mid
    a = lo if abs(rate(lo) - target_rate) <= abs(rate(hi) - target_rate) else hi
    h_t, h_q = limits_for(a)
    r = rate(a)
    return T2QLimits(
        t2=h_t, q=h_q, k=k, alpha_each=a,
        empirical_arl=1.0 / r if r > 0 else math.inf,
        n_samples=n_samples, seed=seed, q_degenerate=degenerate,
    )
