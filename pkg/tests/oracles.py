"""Independent reference implementations used as test oracles.

These are deliberately naive (quadrature, explicit loops, exhaustive search)
and share no code with the package beyond the problem containers.
"""
import itertools
import math

import numpy as np
from scipy import integrate, stats


def thresholded_chi2_moment(nu: float, k: int) -> float:
    """E[max(0, X - nu)^k] for X ~ chi2(1) by adaptive quadrature."""
    f = stats.chi2(1).pdf
    # split at nu + 1 so the integrable singularity at 0 (nu = 0) sits on an endpoint
    head, _ = integrate.quad(lambda x: (x - nu) ** k * f(x), nu, nu + 1.0, epsabs=1e-13, epsrel=1e-13, limit=200)
    tail, _ = integrate.quad(lambda x: (x - nu) ** k * f(x), nu + 1.0, np.inf, epsabs=1e-13, epsrel=1e-13, limit=200)
    return head + tail


def ewma_loop(ytilde, gamma, z0=None):
    """Row-by-row EWMA, z_t = gamma*y_t + (1-gamma)*z_{t-1}."""
    y = np.asarray(ytilde, dtype=float)
    z = np.zeros(y.shape[1]) if z0 is None else np.array(z0, dtype=float)
    out = np.empty_like(y)
    for t in range(y.shape[0]):
        z = gamma * y[t] + (1 - gamma) * z
        out[t] = z
    return out


def best_subset_bic(a_star, y_star):
    """Exhaustive search over supports with exact least squares per support.

    Score is RSS + |S| ln p (unit-variance Gaussian likelihood). Returns the
    best support as a sorted tuple.
    """
    p = a_star.shape[1]
    best, best_score = (), float(y_star @ y_star)
    for k in range(1, p + 1):
        for s in itertools.combinations(range(p), k):
            cols = a_star[:, s]
            coef, *_ = np.linalg.lstsq(cols, y_star, rcond=None)
            res = y_star - cols @ coef
            score = float(res @ res) + k * math.log(p)
            if score < best_score - 1e-12:
                best, best_score = s, score
    return best


def wishart_correlation(p, df, rng):
    x = rng.standard_normal((df, p))
    w = x.T @ x
    s = np.sqrt(np.diag(w))
    return w / np.outer(s, s)


def mahalanobis_sq(x, cov):
    return float(x @ np.linalg.solve(cov, x))
