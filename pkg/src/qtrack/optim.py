"""Box-bounded minimizers used for the QAOA angle search.

Two methods are exposed: a limited-memory quasi-Newton method with gradient
projection (L-BFGS-B, driven by central finite differences) and a bounded
Nelder-Mead simplex as a derivative-free fallback. Both are backed by
``scipy.optimize``; this module owns the bound handling, evaluation budget,
the non-finite guard and the accepted-iterate trace.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize as _sciopt

Objective = Callable[[np.ndarray], float]

HISTORY_LENGTH = 10
DEFAULT_STEP = 1e-5


class Method(str, enum.Enum):
    QUASI_NEWTON = "lbfgsb"
    SIMPLEX = "simplex"


class OptimizationError(RuntimeError):
    """Objective returned a non-finite value; carries the last good iterate."""

    def __init__(self, message: str, x_last: np.ndarray | None, f_last: float | None):
        super().__init__(message)
        self.x_last = x_last
        self.f_last = f_last


@dataclass(frozen=True)
class BoxBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("bounds must be 1-D vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, lo: float, hi: float, dim: int) -> "BoxBounds":
        return cls(np.full(dim, lo), np.full(dim, hi))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return x.shape == self.lower.shape and bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


@dataclass(frozen=True)
class Tolerances:
    f_tol: float = 1e-9
    g_tol: float = 1e-6
    max_evals: int | None = None  # 200 * dim when unset

    def budget(self, dim: int) -> int:
        return self.max_evals if self.max_evals is not None else 200 * dim


@dataclass
class OptimResult:
    x: np.ndarray
    f: float
    evaluations: int
    converged: bool
    trace: list[tuple[int, float]] = field(default_factory=list)
    message: str = ""


class _BudgetExhausted(Exception):
    pass


class _Counted:
    """Objective wrapper enforcing bounds, finiteness and the evaluation budget."""

    def __init__(self, fun: Objective, bounds: BoxBounds, budget: int):
        self.fun = fun
        self.bounds = bounds
        self.budget = budget
        self.evaluations = 0
        self.best_x: np.ndarray | None = None
        self.best_f = math.inf
        self.last_x: np.ndarray | None = None
        self.last_f: float | None = None
        self._memo: dict[bytes, float] = {}

    def __call__(self, x) -> float:
        # clip only representation noise; the methods already stay feasible
        x = np.clip(np.asarray(x, dtype=float), self.bounds.lower, self.bounds.upper)
        key = x.tobytes()
        if key in self._memo:
            return self._memo[key]
        if self.evaluations >= self.budget:
            raise _BudgetExhausted
        self.evaluations += 1
        f = float(self.fun(x))
        if not math.isfinite(f):
            raise OptimizationError(f"objective returned {f} at {x}", self.last_x, self.last_f)
        self.last_x, self.last_f = x.copy(), f
        self._memo[key] = f
        if f < self.best_f:
            self.best_x, self.best_f = x.copy(), f
        return f

    def with_gradient(self, x, gradient) -> tuple[float, np.ndarray]:
        x = np.clip(np.asarray(x, dtype=float), self.bounds.lower, self.bounds.upper)
        if self.evaluations >= self.budget:
            raise _BudgetExhausted
        self.evaluations += 1
        f, g = gradient(x)
        f = float(f)
        g = np.asarray(g, dtype=float)
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            raise OptimizationError(f"objective returned {f} at {x}", self.last_x, self.last_f)
        self.last_x, self.last_f = x.copy(), f
        self._memo[x.tobytes()] = f
        if f < self.best_f:
            self.best_x, self.best_f = x.copy(), f
        return f, g

    def lookup(self, x) -> float | None:
        x = np.clip(np.asarray(x, dtype=float), self.bounds.lower, self.bounds.upper)
        return self._memo.get(x.tobytes())


def finite_diff_gradient(
    objective: Objective,
    x,
    step: float = DEFAULT_STEP,
    bounds: BoxBounds | None = None,
    f0: float | None = None,
) -> np.ndarray:
    """Central differences, one-sided where a bound is within ``step``.

    ``f0`` (the value at ``x``) is only evaluated when a one-sided stencil
    needs it.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    lo = bounds.lower if bounds is not None else np.full_like(x, -np.inf)
    hi = bounds.upper if bounds is not None else np.full_like(x, np.inf)

    def f_at(z) -> float:
        v = float(objective(z))
        if not math.isfinite(v):
            raise OptimizationError(f"objective returned {v} at {z}", x, f0)
        return v

    for k in range(len(x)):
        up_ok = x[k] + step <= hi[k]
        down_ok = x[k] - step >= lo[k]
        xp = x.copy()
        xm = x.copy()
        if up_ok and down_ok:
            xp[k] += step
            xm[k] -= step
            grad[k] = (f_at(xp) - f_at(xm)) / (2 * step)
            continue
        if f0 is None:
            f0 = f_at(x)
        if up_ok:
            xp[k] += step
            grad[k] = (f_at(xp) - f0) / step
        elif down_ok:
            xm[k] -= step
            grad[k] = (f0 - f_at(xm)) / step
        else:
            grad[k] = 0.0  # box thinner than the stencil
    return grad


def minimize(
    objective: Objective,
    x0,
    bounds: BoxBounds,
    method: Method | str = Method.QUASI_NEWTON,
    tolerances: Tolerances | None = None,
    step: float = DEFAULT_STEP,
    gradient: Callable[[np.ndarray], tuple[float, np.ndarray]] | None = None,
) -> OptimResult:
    """Minimize ``objective`` inside ``bounds`` starting from ``x0``.

    ``gradient``, when given, returns ``(f, grad)`` at a point and replaces
    the finite-difference stencil of the quasi-Newton method; each call
    counts as one evaluation.
    """
    method = Method(method)
    tol = tolerances or Tolerances()
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1 or len(x0) < 1:
        raise ValueError("x0 must be a non-empty vector")
    if not bounds.contains(x0):
        raise ValueError(f"x0 {x0} lies outside the bounds")
    counted = _Counted(objective, bounds, tol.budget(len(x0)))
    f_start = counted(x0)
    trace: list[tuple[int, float]] = [(0, f_start)]

    def record(xk, *_):
        f = counted.lookup(xk)
        if f is None:
            return
        # the simplex may report a vertex no better than the last one
        if f <= trace[-1][1]:
            trace.append((len(trace), f))

    converged = False
    message = ""
    try:
        if method is Method.QUASI_NEWTON:

            def fun_and_grad(x):
                if gradient is not None:
                    return counted.with_gradient(x, gradient)
                f = counted(x)
                g = finite_diff_gradient(counted, x, step, bounds, f0=f)
                return f, g

            res = _sciopt.minimize(
                fun_and_grad,
                x0,
                jac=True,
                method="L-BFGS-B",
                bounds=list(zip(bounds.lower, bounds.upper)),
                callback=record,
                options={
                    "maxcor": HISTORY_LENGTH,
                    "ftol": tol.f_tol,
                    "gtol": tol.g_tol,
                    "maxfun": counted.budget,
                    "maxiter": counted.budget,
                },
            )
        else:
            res = _sciopt.minimize(
                counted,
                x0,
                method="Nelder-Mead",
                bounds=list(zip(bounds.lower, bounds.upper)),
                callback=record,
                options={
                    "fatol": tol.f_tol,
                    "xatol": 1e-8,
                    "maxfev": counted.budget,
                    "adaptive": len(x0) > 4,
                },
            )
        converged = bool(res.success)
        message = str(res.message)
    except _BudgetExhausted:
        message = "evaluation budget exhausted"

    x_best = counted.best_x if counted.best_x is not None else x0
    f_best = counted.best_f
    if f_best < trace[-1][1]:
        trace.append((len(trace), f_best))
    return OptimResult(
        x=x_best,
        f=f_best,
        evaluations=counted.evaluations,
        converged=converged,
        trace=trace,
        message=message,
    )
