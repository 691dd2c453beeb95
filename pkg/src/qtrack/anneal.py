"""Simulated thermal annealing over sparse QUBO models.

Single-bit-flip Metropolis dynamics with a geometric temperature schedule.
Each sweep visits every variable once in a fresh random order and energy
changes are computed incrementally from the CSR adjacency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ._seeding import derive_seed
from .pool import SolutionPool
from .qubo import BitSolution, QuboModel


@dataclass(frozen=True)
class SaConfig:
    """Annealing schedule; ``None`` fields take model-scaled defaults.

    Defaults: ``t_start = 5 * max|coefficient|``, ``t_end = 0.01`` and
    ``sweeps = 1000 * (1 + n / 100)``.
    """

    sweeps: int | None = None
    t_start: float | None = None
    t_end: float | None = None
    schedule: str = "geometric"
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.sweeps is not None and self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        for name in ("t_start", "t_end"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if self.t_start is not None and self.t_end is not None and self.t_end > self.t_start:
            raise ValueError("t_end must not exceed t_start")
        if self.schedule != "geometric":
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    def resolved(self, model: QuboModel) -> tuple[int, float, float]:
        sweeps = self.sweeps if self.sweeps is not None else int(1000 * (1 + model.n / 100))
        t_end = self.t_end if self.t_end is not None else 0.01
        t_start = self.t_start
        if t_start is None:
            t_start = max(5.0 * model.max_abs_coefficient, t_end)
        if t_end > t_start:
            raise ValueError("t_end must not exceed t_start")
        return sweeps, t_start, t_end


def temperatures(sweeps: int, t_start: float, t_end: float) -> np.ndarray:
    if sweeps == 1:
        return np.array([t_start])
    return t_start * (t_end / t_start) ** (np.arange(sweeps) / (sweeps - 1))


@numba.njit(cache=True)
def _local_delta(x, i, lin, indptr, indices, weights):
    field = lin[i]
    for k in range(indptr[i], indptr[i + 1]):
        field += weights[k] * x[indices[k]]
    # flipping x_i changes the energy by (1 - 2 x_i) * field
    return (1.0 - 2.0 * x[i]) * field


@numba.njit(cache=True)
def _local_fields(x, lin, indptr, indices, weights):
    n = x.shape[0]
    fields = lin.copy()
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            fields[i] += weights[k] * x[indices[k]]
    return fields


@numba.njit(cache=True)
def _anneal_kernel(x, energy0, temps, lin, indptr, indices, weights, seed):
    np.random.seed(seed)
    n = x.shape[0]
    # fields[i] = dE/dx_i; a proposal costs O(1), an accepted flip O(degree)
    fields = _local_fields(x, lin, indptr, indices, weights)
    e = energy0
    best_e = e
    best_x = x.copy()
    order = np.arange(n)
    for t in temps:
        np.random.shuffle(order)
        for i in order:
            de = (1.0 - 2.0 * x[i]) * fields[i]
            if de <= 0.0 or np.random.random() < np.exp(-de / t):
                step = 1.0 - 2.0 * x[i]
                x[i] = 1.0 - x[i]
                for k in range(indptr[i], indptr[i + 1]):
                    fields[indices[k]] += step * weights[k]
                e += de
                if e < best_e:
                    best_e = e
                    best_x[:] = x
    return best_x, best_e, e


@numba.njit(cache=True)
def _apply_flips(x, energy0, flips, lin, indptr, indices, weights):
    e = energy0
    for i in flips:
        e += _local_delta(x, i, lin, indptr, indices, weights)
        x[i] = 1 - x[i]
    return e


def _arrays(model: QuboModel):
    indptr, indices, weights = model.adjacency
    return np.ascontiguousarray(model.linear_vector, dtype=np.float64), indptr, indices, weights


def track_flips(model: QuboModel, bits, flips) -> tuple[np.ndarray, float]:
    """Apply a flip sequence, tracking the energy incrementally."""
    x = np.array(bits, dtype=np.float64)
    e = _apply_flips(x, model.energy(x), np.asarray(flips, dtype=np.int64), *_arrays(model))
    return x.astype(np.uint8), float(e)


def anneal(model: QuboModel, config: SaConfig | None = None, start=None) -> BitSolution:
    """Best-ever solution over ``config.restarts`` independent runs."""
    config = config or SaConfig()
    if model.n == 0:
        return BitSolution(np.zeros(0, dtype=np.uint8), model.offset)
    sweeps, t_start, t_end = config.resolved(model)
    temps = temperatures(sweeps, t_start, t_end)
    arrays = _arrays(model)
    best: BitSolution | None = None
    for r in range(config.restarts):
        seed = derive_seed(config.seed, r)
        if start is not None:
            x = np.array(start, dtype=np.float64)
            if x.shape != (model.n,):
                raise ValueError(f"start must have {model.n} bits")
        else:
            x = np.random.default_rng(seed).integers(0, 2, model.n).astype(np.float64)
        bx, _, _ = _anneal_kernel(x, model.energy(x), temps, *arrays, seed)
        # re-evaluate instead of trusting the accumulated sum
        sol = BitSolution.evaluate(model, bx.astype(np.uint8))
        if best is None or sol.sort_key() < best.sort_key():
            best = sol
    return best


def build_pool(model: QuboModel, pool_size: int, config: SaConfig | None = None) -> SolutionPool:
    """``pool_size`` independent anneals sorted by (energy, bitstring)."""
    if pool_size < 2:
        raise ValueError("pool size must be >= 2")
    config = config or SaConfig()
    runs = []
    for k in range(pool_size):
        cfg = SaConfig(
            sweeps=config.sweeps,
            t_start=config.t_start,
            t_end=config.t_end,
            schedule=config.schedule,
            seed=derive_seed(config.seed, 1_000_003, k),
            restarts=config.restarts,
        )
        runs.append(anneal(model, cfg))
    return SolutionPool.from_solutions(runs, model)
