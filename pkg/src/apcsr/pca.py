"""Phase-I principal component reference model.

The model keeps the full eigendecomposition (no truncation): the monitoring
statistic needs every PC, and the low-variance ones most of all.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

#: Relative eigenvalue floor used when the caller does not supply one.
DEFAULT_RELATIVE_FLOOR = 1e-8


@dataclass(frozen=True)
class ScoreVector:
    """Raw PC scores ``y`` and their standardized version ``y / sqrt(lambda)``."""

    raw: np.ndarray
    standardized: np.ndarray


@dataclass(frozen=True, eq=False)
class PCModel:
    """In-control reference: mean, eigenvectors (columns) and eigenvalues.

    Eigenvalues are sorted in decreasing order and ``eigvecs[:, j]`` pairs
    with ``eigvals[j]``. ``scale`` is an optional per-column divisor applied
    after centring (column standardization); ``None`` means no scaling.
    """

    mean: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    eig_floor: float
    source: Literal["fitted", "known"] = "fitted"
    scale: np.ndarray | None = None
    columns: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        for name in ("mean", "eigvecs", "eigvals", "scale"):
            value = getattr(self, name)
            if value is not None:
                arr = np.array(value, dtype=float, order="C")
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        p = self.mean.shape[0]
        if self.eigvecs.shape != (p, p) or self.eigvals.shape != (p,):
            raise ValueError("inconsistent model dimensions")
        if not self.eig_floor > 0:
            raise ValueError("eig_floor must be positive")
        if self.scale is not None and self.scale.shape != (p,):
            raise ValueError("scale must have length p")
        if self.columns is not None and len(self.columns) != p:
            raise ValueError("columns must have length p")

    @property
    def p(self) -> int:
        return self.mean.shape[0]

    @property
    def floored_eigvals(self) -> np.ndarray:
        return np.maximum(self.eigvals, self.eig_floor)

    @property
    def covariance(self) -> np.ndarray:
        """Covariance in the (possibly scaled) working coordinates."""
        return (self.eigvecs * self.eigvals) @ self.eigvecs.T

    def center(self, x: np.ndarray) -> np.ndarray:
        """Map observations (``(p,)`` or ``(n, p)``) to working coordinates."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.p:
            raise ValueError(f"expected {self.p} values per observation, got {x.shape[-1]}")
        xc = x - self.mean
        if self.scale is not None:
            xc = xc / self.scale
        return xc

    def to_dict(self) -> dict:
        out = {
            "p": self.p,
            "mean": self.mean.tolist(),
            "eigvals": self.eigvals.tolist(),
            "eigvecs": self.eigvecs.tolist(),
            "eig_floor": self.eig_floor,
            "source": self.source,
        }
        if self.scale is not None:
            out["scale"] = self.scale.tolist()
        if self.columns is not None:
            out["columns"] = list(self.columns)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PCModel":
        p = int(d["p"])
        scale = d.get("scale")
        cols = d.get("columns")
        model = cls(
            mean=np.asarray(d["mean"], dtype=float),
            eigvecs=np.asarray(d["eigvecs"], dtype=float).reshape(p, p),
            eigvals=np.asarray(d["eigvals"], dtype=float),
            eig_floor=float(d["eig_floor"]),
            source=d.get("source", "fitted"),
            scale=None if scale is None else np.asarray(scale, dtype=float),
            columns=None if cols is None else tuple(cols),
        )
        if model.p != p:
            raise ValueError("model 'p' does not match array sizes")
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(dumps_model(self), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PCModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _fmt(v: float) -> str:
    # 17 significant digits round-trips every IEEE double exactly.
    return format(float(v), ".17g")


def _fmt_list(values: Sequence[float]) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def dumps_model(model: PCModel) -> str:
    """Serialize with fixed 17-significant-digit floats (bit-stable round-trip)."""
    parts = [
        f'"p": {model.p}',
        f'"source": {json.dumps(model.source)}',
        f'"eig_floor": {_fmt(model.eig_floor)}',
        f'"mean": {_fmt_list(model.mean)}',
        f'"eigvals": {_fmt_list(model.eigvals)}',
        '"eigvecs": [' + ", ".join(_fmt_list(row) for row in model.eigvecs) + "]",
    ]
    if model.scale is not None:
        parts.append(f'"scale": {_fmt_list(model.scale)}')
    if model.columns is not None:
        parts.append(f'"columns": {json.dumps(list(model.columns))}')
    return "{\n  " + ",\n  ".join(parts) + "\n}\n"


def _sorted_eigh(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")  # ties keep their original order
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    # Sign convention: largest-magnitude entry of each column is positive.
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vals, vecs * signs


def _resolve_floor(eigvals: np.ndarray, eig_floor: float | None) -> float:
    if eig_floor is None:
        top = eigvals[0] if eigvals.size else 0.0
        return DEFAULT_RELATIVE_FLOOR * top if top > 0 else 1e-12
    if not eig_floor > 0:
        raise ValueError("eig_floor must be positive")
    return float(eig_floor)


def fit_pca(
    samples,
    eig_floor: float | None = None,
    *,
    standardize: bool = False,
    columns: Sequence[str] | None = None,
) -> PCModel:
    """Estimate a :class:`PCModel` from in-control samples (rows = observations).

    The covariance uses the unbiased ``1/(n-1)`` normalization. When
    ``eig_floor`` is omitted it defaults to ``1e-8 * lambda_1``.
    With ``standardize=True`` every column is divided by its sample standard
    deviation before the eigendecomposition.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise ValueError("samples must be a 2-D array (n x p)")
    n, p = x.shape
    if n < 2:
        raise ValueError("need at least two samples to estimate a covariance")
    if p < 1:
        raise ValueError("need at least one column")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")
    mean = x.mean(axis=0)
    xc = x - mean
    scale = None
    if standardize:
        scale = xc.std(axis=0, ddof=1)
        if np.any(scale <= 0):
            raise ValueError("cannot standardize a constant column")
        xc = xc / scale
    cov = xc.T @ xc / (n - 1)
    vals, vecs = _sorted_eigh(cov)
    return PCModel(
        mean=mean,
        eigvecs=vecs,
        eigvals=vals,
        eig_floor=_resolve_floor(vals, eig_floor),
        source="fitted",
        scale=scale,
        columns=None if columns is None else tuple(columns),
    )


def from_known(mean, covariance, eig_floor: float | None = None) -> PCModel:
    """Build a model from an exactly known mean and covariance."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    p = mean.shape[0]
    if cov.shape != (p, p):
        raise ValueError("covariance must be p x p")
    if not (np.all(np.isfinite(cov)) and np.all(np.isfinite(mean))):
        raise ValueError("non-finite mean or covariance")
    if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-10:
        raise ValueError("covariance is not symmetric")
    vals, vecs = _sorted_eigh(0.5 * (cov + cov.T))
    return PCModel(
        mean=mean.copy(),
        eigvecs=vecs,
        eigvals=vals,
        eig_floor=_resolve_floor(vals, eig_floor),
        source="known",
    )


def project(model: PCModel, x) -> ScoreVector:
    """PC scores ``y = A^T (x - mean)`` and standardized scores.

    Accepts a single observation ``(p,)`` or a batch ``(n, p)``.
    """
    xc = model.center(x)
    if not np.all(np.isfinite(xc)):
        raise ValueError("observation contains non-finite values")
    y = xc @ model.eigvecs
    return ScoreVector(raw=y, standardized=y / np.sqrt(model.floored_eigvals))


def reconstruct(model: PCModel, y) -> np.ndarray:
    """Inverse of :func:`project` on raw scores."""
    xc = np.asarray(y, dtype=float) @ model.eigvecs.T
    if model.scale is not None:
        xc = xc * model.scale
    return xc + model.mean


def shift_magnitude_profile(model: PCModel, mu) -> np.ndarray:
    """Standardized shift seen by each PC: ``(A[:, j] . mu) / sqrt(lambda_j)``.

    ``mu`` is a mean shift in working coordinates (after any column scaling).
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape[-1] != model.p:
        raise ValueError(f"expected shift of length {model.p}")
    return (mu @ model.eigvecs) / np.sqrt(model.floored_eigvals)
