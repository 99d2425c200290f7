"""Minimizers for the (weighted) regularized classification objective.

The same routine fits the full-data optimum and the coreset optimum; the
coreset only enters through the row subset and per-row weights.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .data import data_matrix
from .errors import DegenerateInstance, NonFinite
from .losses import NO_REG, Regularizer, get_loss, total_loss

RESOLUTION = 1e-12


@dataclass(frozen=True)
class SolveConfig:
    """Solver settings.

    ``grad_tol`` applies to ``||grad||_inf / (1 + |objective|)``. Backtracking
    starts at ``step_init`` and multiplies by ``shrink`` until the Armijo
    condition with constant ``armijo`` holds. ``history`` is the number of
    curvature pairs kept. Nonsmooth losses are first solved through smoothed
    surrogates whose width runs from ``smooth_start`` down to ``smooth_stop``
    by factors of ten.
    """

    max_iters: int = 500
    grad_tol: float = 1e-8
    step_init: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    history: int = 10
    max_backtracks: int = 60
    stall_window: int = 20
    stall_tol: float = 1e-10
    restarts: int = 3
    smooth_start: float = 1.0
    smooth_stop: float = 1e-6
    stage_tol: float = 1e-8

    def __post_init__(self):
        for name in ("max_iters", "grad_tol", "step_init", "shrink", "armijo", "history"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.shrink < 1:
            raise ValueError("shrink must be < 1")


@dataclass
class SolveResult:
    beta: np.ndarray
    objective: float
    grad_norm: float
    iterations: int
    converged: bool


class _Objective:
    def __init__(self, A, value, deriv, reg, w):
        self.A, self.f, self.df, self.reg, self.w = A, value, deriv, reg, w

    def value(self, beta):
        v = self.f(self.A @ beta)
        s = float(v.sum()) if self.w is None else float(self.w @ v)
        return s + self.reg.value(beta)

    def value_grad(self, beta):
        z = self.A @ beta
        v = self.f(z)
        g = self.df(z)
        if self.w is not None:
            s = float(self.w @ v)
            g = g * self.w
        else:
            s = float(v.sum())
        return s + self.reg.value(beta), self.A.T @ g + self.reg.gradient(beta)


def _two_loop(g, S, Y):
    q = g.copy()
    alphas = []
    for s, y in reversed(list(zip(S, Y))):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if S:
        s, y = S[-1], Y[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def minimize(Z, f, reg: Regularizer = NO_REG, weights=None, cfg: SolveConfig | None = None,
             beta0=None) -> SolveResult:
    """Minimize ``sum_i w_i f((Z beta)_i) + reg(beta)`` by limited-memory BFGS.

    ``weights`` is an optional coreset (anything with ``indices`` and
    ``weights``); without it every row has weight 1. Nonsmooth losses are
    warm-started from a sequence of smoothed surrogates and then polished on
    the exact loss, where the gradient is a subgradient; when backtracking fails the
    method takes a normalized subgradient step of length
    ``step_init / sqrt(k + 1)`` and resets its memory. The best iterate seen is
    returned.

    The run stops when the scaled gradient test passes or the best objective
    dropped by less than ``stall_tol * (1 + |obj|)`` over the last
    ``stall_window`` iterations; both count as converged. Smooth losses also
    stop, converged, when backtracking fails on a direction whose predicted
    decrease is below float resolution of the objective (badly scaled rows
    put a floor under the attainable gradient norm).
    """
    cfg = cfg or SolveConfig()
    f = get_loss(f)
    A = data_matrix(Z)
    w = None
    if weights is not None:
        A = A[np.asarray(weights.indices)]
        w = np.asarray(weights.weights, dtype=np.float64)
    d = A.shape[1]
    beta = np.zeros(d) if beta0 is None else np.array(beta0, dtype=np.float64).reshape(d)
    if not np.all(np.isfinite(beta)):
        raise NonFinite("beta0 contains NaN or Inf")

    smooth_reg = reg.kind in ("none", "l2sq")
    if f.smooth or not smooth_reg or f.smoothed is None:
        obj = _Objective(A, f.value, f.derivative, reg, w)
        return _lbfgs(obj, beta, cfg, smooth=f.smooth and smooth_reg)

    # nonsmooth loss: warm start through softplus smoothings of decreasing width
    total = 0
    temps = _temperatures(cfg)
    for k, t in enumerate(temps):
        fv, fd = f.smoothed(t)
        stage_cfg = cfg if k == len(temps) - 1 else replace(cfg, stall_tol=cfg.stage_tol)
        res = _lbfgs(_Objective(A, fv, fd, reg, w), beta, stage_cfg, smooth=True)
        beta, total = res.beta, total + res.iterations
    res = _lbfgs(_Objective(A, f.value, f.derivative, reg, w), beta, cfg, smooth=False)
    res.iterations += total
    return res


def _temperatures(cfg: SolveConfig) -> list[float]:
    if cfg.smooth_start <= 0:
        return []
    stages = int(round(math.log10(cfg.smooth_start / cfg.smooth_stop))) + 1
    return [cfg.smooth_start * 10.0**-k for k in range(max(stages, 0))]


def _lbfgs(obj: _Objective, beta: np.ndarray, cfg: SolveConfig, smooth: bool) -> SolveResult:
    d = beta.shape[0]
    val, g = obj.value_grad(beta)
    best = (val, beta.copy(), g.copy())
    S: deque = deque(maxlen=cfg.history)
    Y: deque = deque(maxlen=cfg.history)
    trace = [val]
    converged = False
    stalled = False
    restarts = 0
    k = 0
    for k in range(1, cfg.max_iters + 1):
        gnorm = float(np.max(np.abs(g))) if d else 0.0
        if gnorm <= cfg.grad_tol * (1.0 + abs(val)):
            converged = True
            k -= 1
            break
        if S:
            p = -_two_loop(g, list(S), list(Y))
            step = cfg.step_init
        else:
            p = -g
            step = min(cfg.step_init, 1.0 / float(np.linalg.norm(g)))
        slope = float(g @ p)
        if not slope < 0:
            S.clear(), Y.clear()
            p, slope = -g, -float(g @ g)
            step = min(cfg.step_init, 1.0 / float(np.linalg.norm(g)))

        accepted = False
        for _ in range(cfg.max_backtracks):
            trial = beta + step * p
            tval = obj.value(trial)
            if tval <= val + cfg.armijo * step * slope:
                accepted = True
                break
            step *= cfg.shrink
        if not accepted:
            if smooth:
                # no representable decrease left along a descent direction
                stalled = abs(slope) <= RESOLUTION * (1.0 + abs(val))
                break
            gn = float(np.linalg.norm(g))
            trial = beta - (cfg.step_init / math.sqrt(k + 1)) * g / gn
            S.clear(), Y.clear()

        tval, tg = obj.value_grad(trial)
        if not math.isfinite(tval):
            raise NonFinite("objective diverged")
        s, y = trial - beta, tg - g
        sy = float(s @ y)
        if accepted and sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            S.append(s)
            Y.append(y)
        beta, val, g = trial, tval, tg
        if val < best[0]:
            best = (val, beta.copy(), g.copy())
        trace.append(best[0])

        if len(trace) > cfg.stall_window:
            old = trace[-1 - cfg.stall_window]
            if old - best[0] < cfg.stall_tol * (1.0 + abs(best[0])):
                if smooth or restarts >= cfg.restarts:
                    stalled = True
                    break
                # nonsmooth: drop curvature memory and restart from the best point
                restarts += 1
                beta, val, g = best[1].copy(), best[0], best[2].copy()
                S.clear(), Y.clear()
                trace = [val]

    val, beta, g = best
    gnorm = float(np.max(np.abs(g))) if d else 0.0
    if smooth:
        converged = converged or stalled or gnorm <= cfg.grad_tol * (1.0 + abs(val))
    else:
        converged = converged or stalled
    return SolveResult(beta, val, gnorm, k, converged)


def relative_loss(beta_star_obj: float, beta_tilde, Z, f, reg: Regularizer = NO_REG) -> float:
    """``|L(beta_tilde) - L(beta*)| / L(beta*)`` with L the full-data objective."""
    if not beta_star_obj > 0:
        raise DegenerateInstance("L(beta*) = 0; relative loss undefined (separable data?)")
    return abs(total_loss(Z, beta_tilde, f, reg) - beta_star_obj) / beta_star_obj
