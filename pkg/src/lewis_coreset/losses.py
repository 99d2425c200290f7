"""Nice-hinge losses, regularizers, loss/gradient evaluation and the mu estimator.

Losses follow the sign convention ``f(<x_i, beta> * y_i)`` with labels already
folded into the rows, so ``L(beta) = sum_i f((Z beta)_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import expit

from .data import data_matrix
from .errors import DimMismatch, IndexOutOfRange, NonFinite

def relu(z):
    return np.maximum(z, 0.0)


def _relu_deriv(z):
    return (np.asarray(z) > 0).astype(np.float64)


def _hinge(z):
    return np.maximum(1.0 + np.asarray(z, dtype=np.float64), 0.0)


def _hinge_deriv(z):
    # one-sided subgradient: 0 at the kink z = -1
    return (np.asarray(z) > -1.0).astype(np.float64)


def _logistic(z):
    # max(z, 0) + log1p(exp(-|z|)): never overflows, equals log1p(exp(z))
    return np.logaddexp(0.0, np.asarray(z, dtype=np.float64))


def _logistic_deriv(z):
    return expit(np.asarray(z, dtype=np.float64))


@dataclass(frozen=True)
class NiceHinge:
    """Scalar loss with its nice-hinge constants.

    ``lipschitz`` bounds the slope, ``a1`` the sup-distance to relu, and ``a2``
    is a lower bound of the loss on z >= 0. Relative-error coresets need
    ``a2 > 0``.
    """

    name: str
    lipschitz: float
    a1: float
    a2: float
    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    smooth: bool
    smoothed: Callable[[float], tuple] | None = None

    def __call__(self, z):
        return self.value(z)

    @property
    def relative_ok(self) -> bool:
        return self.a2 > 0


def _softplus_family(shift: float):
    """Width-t softplus ``t * log(1 + exp((z + shift) / t))`` and its derivative;
    within ``t * ln 2`` of ``max(0, z + shift)``."""

    def make(t: float):
        def value(z):
            return t * np.logaddexp(0.0, (np.asarray(z, dtype=np.float64) + shift) / t)

        def deriv(z):
            return expit((np.asarray(z, dtype=np.float64) + shift) / t)

        return value, deriv

    return make


RELU = NiceHinge("relu", 1.0, 0.0, 0.0, relu, _relu_deriv, smooth=False, smoothed=_softplus_family(0.0))
HINGE = NiceHinge("hinge", 1.0, 1.0, 1.0, _hinge, _hinge_deriv, smooth=False, smoothed=_softplus_family(1.0))
LOGISTIC = NiceHinge("logistic", 1.0, math.log(2.0), math.log(2.0), _logistic, _logistic_deriv, smooth=True)

LOSSES = {f.name: f for f in (RELU, HINGE, LOGISTIC)}


def get_loss(name: str | NiceHinge) -> NiceHinge:
    if isinstance(name, NiceHinge):
        return name
    try:
        return LOSSES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; choose from {sorted(LOSSES)}") from None


REG_KINDS = ("none", "l2sq", "l2", "l1")


@dataclass(frozen=True)
class Regularizer:
    """``scale * R(beta)`` with R one of ||b||_2^2, ||b||_2, ||b||_1.

    The regularizer is never reweighted by a coreset.
    """

    kind: str = "none"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in REG_KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.scale < 0:
            raise ValueError("regularizer scale must be >= 0")

    @classmethod
    def parse(cls, spec: str | None) -> "Regularizer":
        """Parse ``"none"``, ``"l2sq:0.5"``, ``"l2:1"`` or ``"l1:2"``."""
        if spec is None or spec.strip().lower() in ("", "none", "0"):
            return cls()
        kind, _, scale = spec.strip().lower().partition(":")
        return cls(kind, float(scale) if scale else 1.0)

    def __str__(self) -> str:
        return f"{self.kind}:{self.scale:g}" if self.active else "none"

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.scale > 0

    def value(self, beta: np.ndarray) -> float:
        if not self.active:
            return 0.0
        if self.kind == "l2sq":
            return self.scale * float(beta @ beta)
        if self.kind == "l2":
            return self.scale * float(np.linalg.norm(beta))
        return self.scale * float(np.abs(beta).sum())

    def gradient(self, beta: np.ndarray) -> np.ndarray:
        if not self.active:
            return np.zeros_like(beta)
        if self.kind == "l2sq":
            return 2.0 * self.scale * beta
        if self.kind == "l2":
            nrm = np.linalg.norm(beta)
            return np.zeros_like(beta) if nrm == 0 else self.scale * beta / nrm
        return self.scale * np.sign(beta)


NO_REG = Regularizer()


def _check_beta(Z: np.ndarray, beta) -> np.ndarray:
    b = np.asarray(beta, dtype=np.float64).reshape(-1)
    if b.shape[0] != Z.shape[1]:
        raise DimMismatch(f"beta has dimension {b.shape[0]}, data has {Z.shape[1]} columns")
    if not np.all(np.isfinite(b)):
        raise NonFinite("beta contains NaN or Inf")
    return b


def total_loss(Z, beta, f=LOGISTIC, reg: Regularizer = NO_REG, sample_weight=None) -> float:
    """``sum_i w_i f((Z beta)_i) + reg(beta)`` with ``w = 1`` by default."""
    A = data_matrix(Z)
    f = get_loss(f)
    b = _check_beta(A, beta)
    vals = f.value(A @ b)
    s = float(vals.sum()) if sample_weight is None else float(np.dot(sample_weight, vals))
    return s + reg.value(b)


def weighted_loss(coreset, Z, beta, f=LOGISTIC, reg: Regularizer = NO_REG) -> float:
    """Coreset estimate ``sum_j w_j f((Z beta)_{i_j}) + reg(beta)``."""
    A = data_matrix(Z)
    idx = np.asarray(coreset.indices)
    if idx.size and (idx.min() < 0 or idx.max() >= A.shape[0]):
        raise IndexOutOfRange(f"coreset index outside [0, {A.shape[0]})")
    return total_loss(A[idx], beta, f, reg, sample_weight=coreset.weights)


def loss_gradient(Z, beta, f=LOGISTIC, reg: Regularizer = NO_REG, sample_weight=None) -> np.ndarray:
    """Gradient (subgradient for hinge/relu) ``Z^T (w * f'(Z beta)) + grad reg``."""
    A = data_matrix(Z)
    f = get_loss(f)
    b = _check_beta(A, beta)
    g = f.derivative(A @ b)
    if sample_weight is not None:
        g = g * sample_weight
    return A.T @ g + reg.gradient(b)


# --------------------------------------------------------------------------
# complexity measure mu


def mu_ratio(Z, beta) -> float:
    """``||(Z beta)^+||_1 / ||(Z beta)^-||_1``; inf when the negative part vanishes."""
    z = data_matrix(Z) @ np.asarray(beta, dtype=np.float64)
    return float(_ratios(z[:, None])[0])


def _ratios(ZB: np.ndarray) -> np.ndarray:
    pos = np.maximum(ZB, 0.0).sum(axis=0)
    neg = np.maximum(-ZB, 0.0).sum(axis=0)
    out = np.zeros_like(pos)
    sep = (neg < 1e-12 * pos) & (pos > 0)
    ok = ~sep & (neg > 0)
    out[ok] = pos[ok] / neg[ok]
    out[sep] = np.inf
    return out


def _ratio_grad(A: np.ndarray, beta: np.ndarray) -> tuple[float, np.ndarray]:
    z = A @ beta
    P = float(np.maximum(z, 0).sum())
    N = float(np.maximum(-z, 0).sum())
    gP = A.T @ (z > 0)
    gN = -(A.T @ (z < 0))
    return P / N, (gP * N - P * gN) / (N * N)


class MuEstimate(NamedTuple):
    mu: float
    beta: np.ndarray


def estimate_mu(Z, budget: int = 1000, seed=0, starts: int = 10, steps: int = 200) -> MuEstimate:
    """Certified lower bound on ``mu(Z) = sup_beta ||(Z b)^+||_1 / ||(Z b)^-||_1``.

    Takes the best of ``budget`` random unit directions and the signed
    coordinate axes, then refines the ``starts`` best candidates by ascent on
    the unit sphere with step halving. Returns ``inf`` when a separating
    direction is found.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    A = data_matrix(Z)
    n, d = A.shape
    rng = np.random.Generator(np.random.Philox(seed))

    cand = [np.eye(d), -np.eye(d)]
    dirs = rng.standard_normal((budget, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    cand.append(dirs)
    D = np.vstack(cand)

    ratios = np.empty(D.shape[0])
    chunk = max(1, 2_000_000 // max(n, 1))
    for lo in range(0, D.shape[0], chunk):
        ratios[lo:lo + chunk] = _ratios(A @ D[lo:lo + chunk].T)

    best = int(np.argmax(ratios))
    if np.isinf(ratios[best]):
        return MuEstimate(math.inf, D[best].copy())
    best_val, best_beta = float(ratios[best]), D[best].copy()

    order = np.argsort(-ratios, kind="stable")[:starts]
    for k in order:
        beta = D[k].copy()
        val = float(ratios[k])
        if val <= 0:
            continue
        step = 0.1
        for _ in range(steps):
            _, g = _ratio_grad(A, beta)
            g = g - (g @ beta) * beta
            gn = np.linalg.norm(g)
            if not np.isfinite(gn) or gn == 0:
                break
            trial = beta + step * g / gn
            trial /= np.linalg.norm(trial)
            tv = mu_ratio(A, trial)
            if tv > val:
                beta, val = trial, tv
                if np.isinf(val):
                    return MuEstimate(math.inf, beta)
                step = min(2 * step, 1.0)
            else:
                step *= 0.5
                if step < 1e-12:
                    break
        if val > best_val:
            best_val, best_beta = val, beta
    return MuEstimate(best_val, best_beta)
