"""l1 Lewis weights and the row-sampling distributions built from them.

The Lewis weights of X are the unique ``tau`` with

    tau_i^2 = x_i^T (X^T diag(1/tau) X)^+ x_i,

and they sum to rank(X). They are computed with the contractive fixed-point
map ``tau_i <- sqrt(x_i^T (X^T diag(1/tau) X)^+ x_i)``, where each quadratic
form is read off the leverage scores of the reweighted matrix
``diag(tau)^(-1/2) X``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import LengthMismatch, ZeroMass
from .linalg import as_matrix, leverage_scores

LEWIS = "lewis"
SQRT_LEVERAGE = "l2s"
UNIFORM = "uniform"
SAMPLING_PROB = "sampling_prob"
KINDS = (LEWIS, SQRT_LEVERAGE, UNIFORM, SAMPLING_PROB)


@dataclass
class WeightVector:
    """Nonnegative per-row scores with a declared kind.

    ``normalization`` is the sum the values are expected to have: d for
    Lewis weights, the sample count m for sampling probabilities, and the
    plain sum for the unnormalized kinds.
    """

    values: np.ndarray
    kind: str
    normalization: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("weights must be finite and nonnegative")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class LewisConfig:
    max_iters: int = 20
    tol: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


class LewisResult(NamedTuple):
    weights: WeightVector
    iterations: int
    residual: float


def _quadratic_forms(A: np.ndarray, tau: np.ndarray) -> np.ndarray:
    # lev_i(diag(tau)^-1/2 A) = x_i^T (A^T diag(1/tau) A)^+ x_i / tau_i
    lev = leverage_scores(A / np.sqrt(tau)[:, None])
    return lev * tau


def lewis_defect(X, tau) -> float:
    """Relative fixed-point defect ``max_i |tau_i^2 - q_i| / max(tau_i^2, 1e-30)``.

    Zero rows (and their zero weights) are ignored.
    """
    A = as_matrix(X)
    tau = np.asarray(tau, dtype=np.float64)
    nz = np.any(A != 0, axis=1) & (tau > 0)
    if not np.any(nz):
        return 0.0
    t = tau[nz]
    q = _quadratic_forms(A[nz], t)
    return float(np.max(np.abs(t * t - q) / np.maximum(t * t, 1e-30)))


def lewis_weights(X, cfg: LewisConfig | None = None) -> LewisResult:
    """Compute the l1 Lewis weights of the rows of ``X``.

    Starts from the uniform vector d/n and stops after ``cfg.max_iters``
    updates or once ``max_i |tau_new_i / tau_old_i - 1| < cfg.tol``. Rows that
    are identically zero get weight 0 and are left out of the Gram matrix.
    Non-convergence is not an error; inspect ``residual``.
    """
    cfg = cfg or LewisConfig()
    A = as_matrix(X)
    n, d = A.shape
    nz = np.any(A != 0, axis=1)
    tau_full = np.zeros(n)
    if not np.any(nz):
        return LewisResult(WeightVector(tau_full, LEWIS, float(d)), 0, 0.0)

    Anz = A[nz]
    tau = np.full(Anz.shape[0], d / n)
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        new = np.sqrt(_quadratic_forms(Anz, tau))
        change = float(np.max(np.abs(new / tau - 1.0)))
        tau = new
        if change < cfg.tol:
            break

    tau_full[nz] = tau
    residual = lewis_defect(Anz, tau)
    wv = WeightVector(tau_full, LEWIS, float(d), meta={"iterations": iterations, "residual": residual})
    return LewisResult(wv, iterations, residual)


def sqrt_leverage_distribution(X) -> WeightVector:
    """Square roots of the leverage scores (unnormalized)."""
    s = np.sqrt(leverage_scores(X))
    return WeightVector(s, SQRT_LEVERAGE, float(s.sum()))


def uniform_distribution(n: int) -> WeightVector:
    return WeightVector(np.ones(n), UNIFORM, float(n))


def sampling_probabilities(
    w: WeightVector,
    m: int,
    uniform_mix: bool = True,
    mu_oversample: float = 1.0,
) -> WeightVector:
    """Turn row scores into sampling rates ``p`` with ``sum(p) == m``.

    With ``uniform_mix`` each score is first floored at 1/n, i.e. the rates
    are proportional to ``max(w_i, 1/n)``. ``mu_oversample`` does not change
    the shape of ``p`` at a fixed m; it is stored so that
    :func:`recommended_size` can report the matching sample count.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if mu_oversample < 1:
        raise ValueError("mu_oversample must be >= 1")
    vals = np.asarray(w.values if isinstance(w, WeightVector) else w, dtype=np.float64)
    n = vals.shape[0]
    base = np.maximum(vals, 1.0 / n) if uniform_mix else vals
    total = math.fsum(base)
    if not total > 0:
        raise ZeroMass("sampling scores sum to zero")
    p = base * (m / total)
    resid = m - math.fsum(p)
    if abs(resid) > 1e-12 * m:
        p[-1] += resid
    source = w.kind if isinstance(w, WeightVector) else "raw"
    return WeightVector(
        p,
        SAMPLING_PROB,
        float(m),
        meta={"source_kind": source, "uniform_mix": uniform_mix, "mu_oversample": mu_oversample},
    )


def recommended_size(w: WeightVector, eps: float, mu: float = 1.0, constant: float = 1.0) -> int:
    """Sample count ``constant * sum_i max(w_i, 1/n) * mu^2 / eps^2``.

    The leading constant of the theory is unspecified; ``constant`` lets a
    caller calibrate it.
    """
    vals = np.asarray(w.values, dtype=np.float64)
    mass = float(np.maximum(vals, 1.0 / vals.shape[0]).sum())
    return int(math.ceil(constant * mass * mu * mu / (eps * eps)))


class RatioHistogram(NamedTuple):
    counts: np.ndarray
    edges: np.ndarray
    ratios: np.ndarray


def distribution_ratio_histogram(p, q, bins: int = 20) -> RatioHistogram:
    """Histogram of ``max(p_i/q_i, q_i/p_i)`` after normalizing p and q to sum 1.

    Bin edges are log-spaced from 1 to the largest ratio.
    """
    pv = np.asarray(getattr(p, "values", p), dtype=np.float64)
    qv = np.asarray(getattr(q, "values", q), dtype=np.float64)
    if pv.shape != qv.shape:
        raise LengthMismatch(f"length {pv.shape[0]} vs {qv.shape[0]}")
    pv = pv / pv.sum() + 1e-300
    qv = qv / qv.sum() + 1e-300
    ratios = np.maximum(np.maximum(pv / qv, qv / pv), 1.0)
    top = float(ratios.max())
    if top <= 1.0 + 1e-12:
        top = 2.0
    edges = np.geomspace(1.0, top, bins + 1)
    counts, _ = np.histogram(ratios, bins=edges)
    return RatioHistogram(counts, edges, ratios)
