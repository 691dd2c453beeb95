"""Batch experiments shared by the CLI and the acceptance suite.

The layer sweep runs on a fixed 6-variable sub-problem cut out of a small
synthetic tracking QUBO. Its text form is frozen below so that the sweep does
not drift when annealer internals change; :func:`extract_reference_instance`
rebuilds it from scratch and a test checks that both agree.
"""

from __future__ import annotations

import math
import time
from collections import deque
from concurrent.futures import Executor
from dataclasses import dataclass, replace

import numpy as np

from . import anneal as _anneal
from . import qaoa as _qaoa
from . import subqubo as _subqubo
from . import tracking as _tracking
from ._seeding import derive_seed
from .event_io import DetectorGeometry, GeneratorConfig, generate_event
from .qubo import QuboModel, brute_force, parse_qubo, to_ising

REFERENCE_QUBO = """\
n 6 offset -132.27175167691405
lin 0 1.9607601038020093
lin 1 2.9661030802411812
lin 2 -2.1863694308226513
lin 3 0.646216894280083
lin 4 1.4859996156456561
lin 5 -2.6092208073636343
quad 1 0 1
quad 2 0 1
quad 2 1 1
quad 3 0 1
quad 3 1 1
quad 3 2 1
quad 4 0 -0.11106740778564531
quad 4 1 1
quad 4 3 1
quad 5 0 -0.24990077813382522
quad 5 1 1
quad 5 3 1
quad 5 4 1
"""


def reference_instance() -> QuboModel:
    return parse_qubo(REFERENCE_QUBO).model


def extract_reference_instance(size: int = 6) -> tuple[QuboModel, list[int]]:
    """Rebuild the reference sub-problem.

    A 10-particle event with 10% noise (seed 1) is turned into a QUBO, solved
    once by annealing, and the ``size`` triplets reached first by a
    breadth-first walk from the most connected triplet are freed; everything
    else is clamped to the annealed solution.
    """
    hits, _ = generate_event(DetectorGeometry(), GeneratorConfig(n_particles=10, noise_fraction=0.1, seed=1))
    model, _ = event_qubo(hits)
    solution = _anneal.anneal(model, _anneal.SaConfig(seed=0))
    indptr, indices, _ = model.adjacency
    start = int(np.argmax(np.diff(indptr)))
    chosen = [start]
    queue = deque([start])
    while queue and len(chosen) < size:
        i = queue.popleft()
        for j in indices[indptr[i] : indptr[i + 1]]:
            if int(j) not in chosen and len(chosen) < size:
                chosen.append(int(j))
                queue.append(int(j))
    return _subqubo.clamp(model, solution.bits, chosen)


def event_qubo(hits, config: _tracking.QuboBuildConfig | None = None):
    config = config or _tracking.QuboBuildConfig()
    doublets = _tracking.build_doublets(hits, config)
    triplets = _tracking.build_triplets(doublets, config)
    return _tracking.build_qubo(triplets, config)


def evaluate(hits, triplets, bits) -> _tracking.TrackingMetrics:
    selected = _tracking.selected_triplets(bits, triplets)
    return _tracking.score(_tracking.assemble_tracks(selected), hits)


# ---------------------------------------------------------------------------
# QAOA accuracy versus depth


@dataclass(frozen=True)
class LayerJob:
    layers: int
    job: int
    seed: int
    config: _qaoa.QaoaConfig
    model: QuboModel
    optimum: str


def _run_layer_job(job: LayerJob) -> dict:
    cfg = replace(job.config, layers=job.layers, seed=job.seed, angle_bounds=None)
    ising = to_ising(job.model)
    t0 = time.perf_counter()
    outcome = _qaoa.run_qaoa(ising, cfg)
    state = _qaoa.simulate(ising, outcome.best_params)
    return dict(
        layers=job.layers,
        job=job.job,
        hit=outcome.modal_bitstring == job.optimum,
        probability=_qaoa.probability_of(state, job.optimum),
        wall_time=time.perf_counter() - t0,
    )


def layer_sweep(
    model: QuboModel,
    max_layers: int,
    jobs: int,
    config: _qaoa.QaoaConfig | None = None,
    seed: int = 0,
    executor: Executor | None = None,
) -> list[dict]:
    """Per depth ``p = 1..max_layers``: accuracy and mean optimum probability.

    Uncertainties are binomial for the accuracy and the standard error of the
    mean for the probability.
    """
    if max_layers < 1 or jobs < 1:
        raise ValueError("max_layers and jobs must be >= 1")
    config = config or _qaoa.QaoaConfig()
    optimum = brute_force(model, keep=1)[0].bitstring
    work = [
        LayerJob(p, j, derive_seed(seed, p, j), config, model, optimum)
        for p in range(1, max_layers + 1)
        for j in range(jobs)
    ]
    results = list((executor.map if executor is not None else map)(_run_layer_job, work))
    loss = config.loss
    loss_tag = f"cvar:{loss.alpha:g}" if isinstance(loss, _qaoa.CVaR) else f"gibbs:{loss.eta:g}"
    records = []
    for p in range(1, max_layers + 1):
        rows = [r for r in results if r["layers"] == p]
        acc = sum(r["hit"] for r in rows) / jobs
        probs = np.array([r["probability"] for r in rows])
        records.append(
            dict(
                kind="layers",
                solver="qaoa",
                layers=p,
                loss=loss_tag,
                jobs=jobs,
                optimum=optimum,
                accuracy=acc,
                accuracy_err=math.sqrt(acc * (1 - acc) / jobs),
                mean_probability=float(probs.mean()),
                probability_err=float(probs.std(ddof=1) / math.sqrt(jobs)) if jobs > 1 else 0.0,
                wall_time=sum(r["wall_time"] for r in rows),
            )
        )
    return records


# ---------------------------------------------------------------------------
# tracking quality versus event size


@dataclass(frozen=True)
class EventJob:
    multiplicity: int
    event: int
    seed: int
    geometry: DetectorGeometry
    generator: GeneratorConfig
    build: _tracking.QuboBuildConfig
    subqubo: _subqubo.SubQuboParams
    anneal: _anneal.SaConfig


def _run_event_job(job: EventJob) -> list[dict]:
    gen = replace(job.generator, n_particles=job.multiplicity, seed=derive_seed(job.seed, 0))
    hits, _ = generate_event(job.geometry, gen)
    model, triplets = event_qubo(hits, job.build)
    common = dict(
        kind="event",
        multiplicity=job.multiplicity,
        event=job.event,
        n_variables=model.n,
        n_instances=job.subqubo.n_instances,
        n_extractions=job.subqubo.n_extractions,
        n_samples=job.subqubo.n_samples,
    )
    out = []

    t0 = time.perf_counter()
    if model.n >= job.subqubo.sub_size:
        best, _, diag = _subqubo.solve(model, job.subqubo, seed=derive_seed(job.seed, 1))
        history = diag.best_history
        skipped = diag.skipped
    else:
        best = brute_force(model, keep=1)[0]
        history, skipped = [best.energy], 0
    metrics = evaluate(hits, triplets, best.bits)
    out.append(
        dict(
            common,
            solver="subqubo",
            energy=best.energy,
            efficiency=metrics.efficiency,
            purity=metrics.purity,
            pool_best_history=history,
            skipped=skipped,
            wall_time=time.perf_counter() - t0,
        )
    )

    t0 = time.perf_counter()
    sa = _anneal.anneal(model, replace(job.anneal, seed=derive_seed(job.seed, 2)))
    metrics = evaluate(hits, triplets, sa.bits)
    out.append(
        dict(
            common,
            solver="sa",
            energy=sa.energy,
            efficiency=metrics.efficiency,
            purity=metrics.purity,
            wall_time=time.perf_counter() - t0,
        )
    )
    return out


def multiplicity_sweep(
    multiplicities,
    events: int = 1,
    seed: int = 0,
    geometry: DetectorGeometry | None = None,
    generator: GeneratorConfig | None = None,
    build: _tracking.QuboBuildConfig | None = None,
    subqubo: _subqubo.SubQuboParams | None = None,
    anneal: _anneal.SaConfig | None = None,
    executor: Executor | None = None,
) -> list[dict]:
    """Generate, build, solve (sub-QUBO and plain annealing) and score events.

    Two records per event, in (multiplicity, event, solver) order.
    """
    work = [
        EventJob(
            int(m),
            k,
            derive_seed(seed, int(m), k),
            geometry or DetectorGeometry(),
            generator or GeneratorConfig(noise_fraction=0.1),
            build or _tracking.QuboBuildConfig(),
            subqubo or _subqubo.SubQuboParams(),
            anneal or _anneal.SaConfig(),
        )
        for m in multiplicities
        for k in range(events)
    ]
    results = (executor.map if executor is not None else map)(_run_event_job, work)
    return [rec for pair in results for rec in pair]
