"""PC-based signal recovery (PCSR): locate the shifted variables after an alarm.

Out-of-control PC scores satisfy ``y = A^T mu + noise`` with noise covariance
``Lambda``. Whitening by ``Lambda^{-1/2}`` (and ``sqrt(m)`` when ``m`` samples
are averaged) gives a unit-variance sensing problem

    y* = A* mu + e*,   A* = sqrt(m) Lambda^{-1/2} A^T,

solved by the adaptive lasso

    min_mu ||y* - A* mu||^2 + r * sum_j w_j |mu_j|,   w_j = 1 / |mu_pilot_j|

over a geometric grid of ``r``; the grid point with the smallest BIC wins.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import linalg

from .pca import PCModel

log = logging.getLogger(__name__)

RSS_FLOOR = 1e-12
Solver = Literal["active_set", "ista"]
BicForm = Literal["known_variance", "estimated_variance"]


@dataclass(frozen=True, eq=False)
class SensingProblem:
    y_star: np.ndarray
    a_star: np.ndarray
    weights: np.ndarray
    n_averaged: int
    pilot: np.ndarray
    degenerate: bool = False

    @property
    def p(self) -> int:
        return self.y_star.shape[0]

    @property
    def gram(self) -> np.ndarray:
        g = self.__dict__.get("_gram")
        if g is None:
            g = self.a_star.T @ self.a_star
            g = 0.5 * (g + g.T)
            object.__setattr__(self, "_gram", g)
        return g

    @property
    def corr(self) -> np.ndarray:
        """``A*^T y*``."""
        c = self.__dict__.get("_corr")
        if c is None:
            c = self.a_star.T @ self.y_star
            object.__setattr__(self, "_corr", c)
        return c

    def rss(self, mu: np.ndarray) -> float:
        res = self.y_star - self.a_star @ mu
        return float(res @ res)

    def objective(self, mu: np.ndarray, r: float) -> float:
        return self.rss(mu) + r * float(self.weights @ np.abs(mu))

    def r_max(self) -> float:
        """Smallest ``r`` at which ``mu = 0`` satisfies the optimality conditions."""
        return float(np.max(np.abs(2.0 * self.corr) / self.weights)) if self.p else 0.0


@dataclass
class LassoSolution:
    mu_hat: np.ndarray
    r: float
    iterations: int
    converged: bool
    objective_trace: list[float] = field(default_factory=list, repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.mu_hat != 0)


@dataclass
class PathConfig:
    """Regularization path settings for :func:`diagnose`."""

    n_points: int = 50
    decades: float = 4.0
    tol: float = 1e-6
    max_iter: int = 10_000
    solver: Solver = "active_set"
    bic: BicForm = "known_variance"
    refit: bool = True
    w_floor: float | None = None


@dataclass
class DiagnosisResult:
    best: LassoSolution
    bic_trace: list[tuple[float, float, int]]
    pilot: np.ndarray
    problem: SensingProblem = field(repr=False)
    scale: np.ndarray | None = field(default=None, repr=False)
    estimate: np.ndarray | None = None

    @property
    def support(self) -> np.ndarray:
        return self.best.support

    @property
    def mu_hat_original(self) -> np.ndarray:
        """Estimated shift in original units (undoes any column scaling).

        This is the least-squares refit on the selected support when the path
        used refitted BIC, otherwise the lasso estimate itself.
        """
        mu = self.best.mu_hat if self.estimate is None else self.estimate
        return mu * self.scale if self.scale is not None else mu.copy()

    def to_dict(self, columns=None) -> dict:
        support = sorted(int(j) for j in self.support)
        out = {
            "support": support,
            "mu_hat": self.mu_hat_original.tolist(),
            "mu_lasso": (self.best.mu_hat * self.scale if self.scale is not None else self.best.mu_hat).tolist(),
            "r": self.best.r,
            "bic_trace": [{"r": r, "bic": b, "support_size": k} for r, b, k in self.bic_trace],
        }
        if columns is not None:
            out["support_names"] = [columns[j] for j in support]
        return out


def _weights(pilot: np.ndarray, w_floor: float | None) -> tuple[np.ndarray, bool]:
    top = float(np.max(np.abs(pilot))) if pilot.size else 0.0
    degenerate = top == 0.0
    if w_floor is None:
        w_floor = 1e-6 * top if top > 0 else 1e-300
    if degenerate:
        log.warning("all-zero pilot estimate; weights sit at the floor")
    return 1.0 / np.maximum(np.abs(pilot), w_floor), degenerate


def _window_mean(model: PCModel, ooc_samples) -> tuple[np.ndarray, int]:
    x = np.atleast_2d(np.asarray(ooc_samples, dtype=float))
    if x.shape[0] < 1:
        raise ValueError("need at least one out-of-control sample")
    if x.shape[1] != model.p:
        raise ValueError(f"expected {model.p} columns, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("out-of-control samples contain non-finite values")
    return model.center(x).mean(axis=0), x.shape[0]


def build_problem(model: PCModel, ooc_samples, w_floor: float | None = None) -> SensingProblem:
    """Whitened PC-domain sensing problem from an out-of-control window.

    The pilot (OLS) estimate is the centred window mean, since ``A*`` is
    square and invertible.
    """
    pilot, m = _window_mean(model, ooc_samples)
    root_m = math.sqrt(m)
    whiten = root_m / np.sqrt(model.floored_eigvals)
    a_star = whiten[:, None] * model.eigvecs.T
    y_star = a_star @ pilot
    w, degenerate = _weights(pilot, w_floor)
    return SensingProblem(y_star=y_star, a_star=a_star, weights=w, n_averaged=m, pilot=pilot, degenerate=degenerate)


def inverse_sqrt_covariance(model: PCModel) -> np.ndarray:
    return (model.eigvecs / np.sqrt(model.floored_eigvals)) @ model.eigvecs.T


def build_problem_leb(model: PCModel, ooc_samples, w_floor: float | None = None) -> SensingProblem:
    """Original-variable-domain problem with ``Sigma^{-1/2}`` as sensing matrix."""
    pilot, m = _window_mean(model, ooc_samples)
    a_star = math.sqrt(m) * inverse_sqrt_covariance(model)
    y_star = a_star @ pilot
    w, degenerate = _weights(pilot, w_floor)
    return SensingProblem(y_star=y_star, a_star=a_star, weights=w, n_averaged=m, pilot=pilot, degenerate=degenerate)


def kkt_residual(prob: SensingProblem, mu: np.ndarray, r: float) -> float:
    """Largest violation of the weighted-lasso optimality conditions."""
    g = 2.0 * (prob.gram @ mu - prob.corr)
    thr = r * prob.weights
    nz = mu != 0
    viol = np.zeros_like(mu)
    viol[nz] = np.abs(g[nz] + thr[nz] * np.sign(mu[nz]))
    viol[~nz] = np.maximum(np.abs(g[~nz]) - thr[~nz], 0.0)
    return float(viol.max(initial=0.0))


def _ista(prob, r, mu, tol, max_iter, trace):
    q, b = prob.gram, prob.corr
    lip = 2.0 * float(linalg.eigvalsh(q, subset_by_index=[prob.p - 1, prob.p - 1])[0])
    if lip <= 0:
        return np.zeros(prob.p), 0, True
    thr = r * prob.weights / lip
    f_old = prob.objective(mu, r)
    trace.append(f_old)
    for it in range(1, max_iter + 1):
        v = mu - 2.0 * (q @ mu - b) / lip
        mu = np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)
        f_new = prob.objective(mu, r)
        trace.append(f_new)
        if abs(f_old - f_new) <= tol * max(abs(f_old), 1e-300):
            return mu, it, True
        f_old = f_new
    return mu, max_iter, False


def _active_set(prob, r, mu, tol, max_iter, trace):
    """Feature-sign search (Lee et al., 2007) for the strictly convex weighted lasso.

    Each step solves the sign-constrained quadratic on the active set exactly
    and line-searches over zero crossings, so the objective never increases.
    A proximal-gradient step is the fallback whenever that move stalls.
    """
    q, b = prob.gram, prob.corr
    thr = r * prob.weights
    scale = max(float(np.max(np.abs(2.0 * b), initial=0.0)), float(np.max(thr, initial=0.0)), 1.0)
    eps = max(1e-9, 1e-14 * scale)
    lip = None
    f_cur = prob.objective(mu, r)
    trace.append(f_cur)
    for it in range(1, max_iter + 1):
        g = 2.0 * (q @ mu - b)
        on = mu != 0
        sgn = np.sign(mu)
        viol_on = np.where(on, np.abs(g + thr * sgn), 0.0)
        viol_off = np.where(on, 0.0, np.abs(g) - thr)
        if viol_on.max(initial=0.0) <= eps and viol_off.max(initial=0.0) <= eps:
            return mu, it - 1, True
        active, theta = on.copy(), sgn.copy()
        if viol_on.max(initial=0.0) <= eps:
            j = int(np.argmax(viol_off))
            active[j] = True
            theta[j] = -np.sign(g[j])
        idx = np.flatnonzero(active)
        target = np.zeros_like(mu)
        rhs = b[idx] - 0.5 * thr[idx] * theta[idx]
        sub = q[np.ix_(idx, idx)]
        try:
            target[idx] = linalg.solve(sub, rhs, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            target[idx] = linalg.lstsq(sub, rhs)[0]
        step = target - mu
        moves = [(1.0, None)]
        for k in idx[(mu[idx] != 0) & (np.sign(target[idx]) != np.sign(mu[idx]))]:
            t = mu[k] / (mu[k] - target[k])
            if 0.0 < t < 1.0:
                moves.append((float(t), int(k)))
        best, best_f = None, f_cur
        for t, k in moves:
            cand = mu + t * step
            if k is not None:
                cand[k] = 0.0
            f = prob.objective(cand, r)
            if f < best_f:
                best, best_f = cand, f
        if best is None:
            if lip is None:
                lip = 2.0 * float(linalg.eigvalsh(q, subset_by_index=[prob.p - 1, prob.p - 1])[0])
            v = mu - g / lip
            cand = np.sign(v) * np.maximum(np.abs(v) - thr / lip, 0.0)
            f = prob.objective(cand, r)
            if not f < f_cur:
                # no representable descent left
                return mu, it, True
            best, best_f = cand, f
        mu, f_cur = best, best_f
        trace.append(f_cur)
    return mu, max_iter, False


def solve_adaptive_lasso(
    prob: SensingProblem,
    r: float,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    *,
    init: np.ndarray | None = None,
    solver: Solver = "active_set",
) -> LassoSolution:
    """Minimize ``||y* - A* mu||^2 + r * sum_j w_j |mu_j|``.

    ``solver="ista"`` runs proximal gradient with step ``1/L``,
    ``L = 2 * lambda_max(A*^T A*)``, stopping on relative objective change
    below ``tol``. ``solver="active_set"`` (default) solves the problem
    exactly; ``tol`` is unused there. Both are monotone in the objective.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    mu0 = np.zeros(prob.p) if init is None else np.array(init, dtype=float)
    trace: list[float] = []
    if solver == "ista":
        mu, it, ok = _ista(prob, r, mu0, tol, max_iter, trace)
    elif solver == "active_set":
        mu, it, ok = _active_set(prob, r, mu0, tol, max_iter, trace)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    if not ok:
        log.warning("adaptive lasso did not converge at r=%.4g after %d iterations", r, it)
    return LassoSolution(mu_hat=mu, r=float(r), iterations=it, converged=ok, objective_trace=trace)


def refit_on_support(prob: SensingProblem, support) -> np.ndarray:
    """Unpenalized least squares restricted to ``support`` (zeros elsewhere)."""
    mu = np.zeros(prob.p)
    s = np.asarray(support, dtype=int)
    if s.size:
        try:
            mu[s] = linalg.solve(prob.gram[np.ix_(s, s)], prob.corr[s], assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            mu[s] = np.linalg.lstsq(prob.a_star[:, s], prob.y_star, rcond=None)[0]
    return mu


def bic_score(
    prob: SensingProblem,
    sol: LassoSolution | np.ndarray,
    form: BicForm = "known_variance",
    refit: bool = False,
) -> float:
    """BIC of a solution; ``df`` is the support size.

    ``known_variance`` (default): ``RSS + df * ln p``, valid because the
    whitened noise has unit variance. ``estimated_variance``:
    ``p * ln(RSS / p) + df * ln p`` with RSS floored at ``1e-12``; this form
    rewards near-saturated fits in a square system, so it is not the default.
    With ``refit`` the RSS is that of least squares on the solution's
    support, so the score ranks supports exactly as best-subset BIC would.
    """
    mu = sol.mu_hat if isinstance(sol, LassoSolution) else np.asarray(sol, dtype=float)
    p = prob.p
    support = np.flatnonzero(mu)
    rss = prob.rss(refit_on_support(prob, support) if refit else mu)
    df = int(support.size)
    if form == "known_variance":
        return rss + df * math.log(p)
    if form == "estimated_variance":
        return p * math.log(max(rss, RSS_FLOOR) / p) + df * math.log(p)
    raise ValueError(f"unknown BIC form {form!r}")


def r_grid(r_max: float, n_points: int = 50, decades: float = 4.0) -> np.ndarray:
    if r_max <= 0:
        return np.array([0.0])
    return r_max * np.logspace(0.0, -decades, n_points)


def solve_path(prob: SensingProblem, cfg: PathConfig | None = None) -> DiagnosisResult:
    """Warm-started path from ``r_max`` down, keeping the BIC-minimizing point."""
    cfg = cfg or PathConfig()
    mu = np.zeros(prob.p)
    best, best_bic = None, math.inf
    trace = []
    for r in r_grid(prob.r_max(), cfg.n_points, cfg.decades):
        sol = solve_adaptive_lasso(prob, r, cfg.tol, cfg.max_iter, init=mu, solver=cfg.solver)
        mu = sol.mu_hat
        bic = bic_score(prob, sol, cfg.bic, cfg.refit)
        trace.append((float(r), float(bic), int(sol.support.size)))
        if bic < best_bic:
            best, best_bic = sol, bic
    estimate = refit_on_support(prob, best.support) if cfg.refit else None
    return DiagnosisResult(best=best, bic_trace=trace, pilot=prob.pilot, problem=prob, estimate=estimate)


def diagnose(model: PCModel, ooc_samples, path_cfg: PathConfig | None = None) -> DiagnosisResult:
    """PCSR diagnosis of an out-of-control window (rows = observations)."""
    cfg = path_cfg or PathConfig()
    res = solve_path(build_problem(model, ooc_samples, cfg.w_floor), cfg)
    res.scale = model.scale
    return res


def diagnose_leb(model: PCModel, ooc_samples, path_cfg: PathConfig | None = None) -> DiagnosisResult:
    """Lasso/BIC baseline in the original-variable domain (``Sigma^{-1/2}`` sensing)."""
    cfg = path_cfg or PathConfig()
    res = solve_path(build_problem_leb(model, ooc_samples, cfg.w_floor), cfg)
    res.scale = model.scale
    return res


def sensing_gram(model: PCModel) -> np.ndarray:
    """``A Lambda^{-1} A^T`` (the per-sample whitened Gram matrix, equal to ``Sigma^{-1}``)."""
    return (model.eigvecs / model.floored_eigvals) @ model.eigvecs.T


def check_sensing_pd(model: PCModel) -> float:
    """Smallest eigenvalue of the whitened Gram matrix; positive for any floored model."""
    c = sensing_gram(model)
    return float(linalg.eigvalsh(0.5 * (c + c.T), subset_by_index=[0, 0])[0])
