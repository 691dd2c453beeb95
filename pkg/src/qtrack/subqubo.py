"""Multiple-solution-instance sub-QUBO decomposition.

A pool of full solutions is seeded by simulated annealing. Each extraction
samples a few pool members, ranks the variables by how much they disagree
across that sample, frees the most variable ones, clamps the rest to the
clamp source (the pool best by default) and hands the small problem to a
subsolver. The improved full solution is offered back to the pool.
"""

from __future__ import annotations

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import anneal as _anneal
from . import qaoa as _qaoa
from ._seeding import derive_seed, rng_for
from .pool import SolutionPool
from .qubo import BitSolution, QuboModel, brute_force, energy, to_ising

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Exact:
    pass


Subsolver = Union[_qaoa.QaoaConfig, _anneal.SaConfig, Exact]


@dataclass(frozen=True)
class SubQuboParams:
    n_instances: int = 20  # pool capacity
    n_extractions: int = 10  # sub-problems per round
    n_samples: int = 5  # pool members compared per sub-problem
    sub_size: int = 6
    outer_rounds: int = 5
    subsolver: Subsolver = field(default_factory=_qaoa.QaoaConfig)
    pool_config: _anneal.SaConfig = field(default_factory=_anneal.SaConfig)
    clamp_source: str = "best"  # or "random"

    def __post_init__(self):
        if self.sub_size < 1:
            raise ValueError("sub_size must be >= 1")
        if self.n_instances < 2:
            raise ValueError("n_instances must be >= 2")
        if not 2 <= self.n_samples <= self.n_instances:
            raise ValueError("n_samples must satisfy 2 <= n_samples <= n_instances")
        if self.n_extractions < 1 or self.outer_rounds < 1:
            raise ValueError("n_extractions and outer_rounds must be >= 1")
        if self.clamp_source not in ("best", "random"):
            raise ValueError("clamp_source must be 'best' or 'random'")


@dataclass
class Diagnostics:
    round_best: list[float] = field(default_factory=list)
    best_history: list[float] = field(default_factory=list)
    sub_jobs: list[dict] = field(default_factory=list)
    skipped: int = 0

    def records(self) -> list[dict]:
        out = [dict(kind="sub_job", **job) for job in self.sub_jobs]
        out += [dict(kind="round", round=r, best_energy=e) for r, e in enumerate(self.round_best)]
        return out


def clamp(model: QuboModel, assignment, free) -> tuple[QuboModel, list[int]]:
    """Restrict ``model`` to the ``free`` variables with the others fixed.

    For any sub-assignment ``y``, the sub-model energy of ``y`` equals the full
    energy of ``assignment`` with ``y`` written onto the free positions.
    """
    free = [int(i) for i in free]
    x = np.asarray(assignment, dtype=float)
    if x.shape != (model.n,):
        raise ValueError(f"assignment must have {model.n} bits")
    if len(set(free)) != len(free):
        raise ValueError("free indices collide")
    if any(not 0 <= i < model.n for i in free):
        raise ValueError("free index out of range")

    base = x.copy()
    base[free] = 0.0
    offset = energy(model, base)
    position = {orig: k for k, orig in enumerate(free)}
    indptr, indices, weights = model.adjacency
    linear: dict[int, float] = {}
    quadratic: dict[tuple[int, int], float] = {}
    lin = model.linear_vector
    for k, i in enumerate(free):
        a = lin[i]
        for nb, w in zip(indices[indptr[i] : indptr[i + 1]], weights[indptr[i] : indptr[i + 1]]):
            other = position.get(int(nb))
            if other is None:
                a += w * base[nb]
            elif other < k:
                quadratic[(k, other)] = w
        linear[k] = a
    return QuboModel(len(free), linear, quadratic, offset), free


def rank_variability(entries: list[BitSolution], rng: np.random.Generator) -> list[int]:
    """Variables by descending Bernoulli variance ``p(1 - p)`` over ``entries``.

    Ties are ordered by a shuffle drawn from ``rng``.
    """
    if len(entries) < 2:
        raise ValueError("variability needs at least two instances")
    X = np.stack([e.bits for e in entries]).astype(np.int64)
    m = X.shape[0]
    ones = X.sum(axis=0)
    # integer numerator of p(1-p) * m^2 keeps ties exact
    score = ones * (m - ones)
    perm = rng.permutation(X.shape[1])
    order = perm[np.argsort(-score[perm], kind="stable")]
    return [int(i) for i in order]


def solve_subproblem(sub: QuboModel, subsolver: Subsolver, seed: int) -> np.ndarray:
    if isinstance(subsolver, Exact):
        return brute_force(sub, keep=1)[0].bits
    if isinstance(subsolver, _anneal.SaConfig):
        cfg = _anneal.SaConfig(
            sweeps=subsolver.sweeps,
            t_start=subsolver.t_start,
            t_end=subsolver.t_end,
            seed=seed,
            restarts=subsolver.restarts,
        )
        return _anneal.anneal(sub, cfg).bits
    if isinstance(subsolver, _qaoa.QaoaConfig):
        cfg = _qaoa.QaoaConfig(
            layers=subsolver.layers,
            shots=subsolver.shots,
            loss=subsolver.loss,
            optimizer=subsolver.optimizer,
            angle_bounds=subsolver.angle_bounds,
            restarts=subsolver.restarts,
            seed=seed,
            final_shots=subsolver.final_shots,
            tolerances=subsolver.tolerances,
        )
        return _qaoa.run_qaoa(to_ising(sub), cfg).modal_bits
    raise TypeError(f"unsupported subsolver {subsolver!r}")


@dataclass
class _Job:
    extraction: int
    free: list[int]
    source: np.ndarray
    sub: QuboModel
    subsolver: Subsolver
    seed: int


def _extract(model, snapshot: list[BitSolution], params: SubQuboParams, seed: int, rnd: int, ext: int) -> _Job:
    rng = rng_for(seed, 1, rnd, ext)
    picked = rng.choice(len(snapshot), size=params.n_samples, replace=False)
    ranking = rank_variability([snapshot[int(k)] for k in sorted(picked)], rng)
    source = snapshot[0] if params.clamp_source == "best" else snapshot[int(rng.integers(len(snapshot)))]
    sub, free = clamp(model, source.bits, ranking[: params.sub_size])
    return _Job(ext, free, source.bits.copy(), sub, params.subsolver, derive_seed(seed, 2, rnd, ext))


def _run_job(job: _Job) -> tuple[np.ndarray | None, str | None]:
    try:
        return solve_subproblem(job.sub, job.subsolver, job.seed), None
    except Exception as exc:  # noqa: BLE001 -- a failed sub-instance is skipped
        return None, f"{type(exc).__name__}: {exc}"


def solve(
    model: QuboModel,
    params: SubQuboParams,
    seed: int = 0,
    on_record: Callable[[dict], None] | None = None,
    executor: Executor | None = None,
) -> tuple[BitSolution, SolutionPool, Diagnostics]:
    """Run the decomposition and return ``(best, pool, diagnostics)``.

    Within a round the extractions are independent (they read a snapshot of
    the pool taken at round start), so ``executor`` may run them
    concurrently. Candidates are offered back in extraction order, which
    keeps the result identical to a sequential run.
    """
    if model.n < params.sub_size:
        raise ValueError(f"model has {model.n} variables, fewer than sub size {params.sub_size}")
    pool_cfg = params.pool_config
    pool_cfg = _anneal.SaConfig(
        sweeps=pool_cfg.sweeps,
        t_start=pool_cfg.t_start,
        t_end=pool_cfg.t_end,
        seed=derive_seed(seed, 0),
        restarts=pool_cfg.restarts,
    )
    pool = _anneal.build_pool(model, params.n_instances, pool_cfg)
    diag = Diagnostics(best_history=[pool.best.energy])

    for rnd in range(params.outer_rounds):
        # every extraction of a round sees the same pool snapshot
        snapshot = list(pool)
        jobs = [_extract(model, snapshot, params, seed, rnd, ext) for ext in range(params.n_extractions)]
        mapper = executor.map if executor is not None else map
        results = list(mapper(_run_job, jobs))
        for job, (y, error) in zip(jobs, results):
            record = dict(round=rnd, extraction=job.extraction, free=job.free)
            if error is not None:
                log.warning("sub-problem %d/%d failed: %s", rnd, job.extraction, error)
                diag.skipped += 1
                record.update(sub_energy=None, accepted=False, error=error)
            else:
                candidate_bits = job.source.copy()
                candidate_bits[job.free] = y
                sub_energy = job.sub.energy(y)
                accepted = pool.offer(BitSolution(candidate_bits, sub_energy))
                diag.best_history.append(pool.best.energy)
                record.update(sub_energy=sub_energy, accepted=accepted)
            diag.sub_jobs.append(record)
            if on_record is not None:
                on_record(dict(kind="sub_job", **record))
        diag.round_best.append(pool.best.energy)
        if on_record is not None:
            on_record(dict(kind="round", round=rnd, best_energy=pool.best.energy))
    return pool.best, pool, diag
