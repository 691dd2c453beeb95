from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qtrack.anneal import SaConfig
from qtrack.pool import SolutionPool
from qtrack.qaoa import QaoaConfig
from qtrack.qubo import BitSolution, QuboModel, brute_force
from qtrack.subqubo import Exact, SubQuboParams, clamp, rank_variability, solve

from conftest import double_loop_energy, models, random_model

FAST_POOL = SaConfig(sweeps=20)


def sol(bits, e=0.0):
    return BitSolution(np.array(bits, dtype=np.uint8), e)


class TestClamp:
    def test_all_free_is_identity(self, rng):
        m = random_model(rng, 5)
        sub, mapping = clamp(m, rng.integers(0, 2, 5), range(5))
        assert mapping == [0, 1, 2, 3, 4]
        assert sub.linear == {i: m.linear.get(i, 0.0) for i in range(5)}
        assert sub.quadratic == m.quadratic
        assert sub.offset == m.offset

    def test_two_variable_example(self):
        m = QuboModel(2, {0: -1.0, 1: 2.0}, {(1, 0): 3.0})
        sub, mapping = clamp(m, [0, 1], [0])
        assert mapping == [0]
        assert sub.linear == {0: 2.0}
        assert sub.offset == 2.0

    def test_exactness_random_split(self, rng):
        m = random_model(rng, 12, density=0.5)
        assignment = rng.integers(0, 2, 12)
        free = list(rng.choice(12, size=5, replace=False))
        sub, mapping = clamp(m, assignment, free)
        for _ in range(200):
            y = rng.integers(0, 2, 5)
            full = assignment.copy()
            full[mapping] = y
            assert sub.energy(y) == pytest.approx(double_loop_energy(m, full), abs=1e-9)

    @given(models(min_n=2, max_n=10), st.data())
    def test_exactness_property(self, m, data):
        assignment = data.draw(st.lists(st.integers(0, 1), min_size=m.n, max_size=m.n))
        free = data.draw(st.lists(st.integers(0, m.n - 1), min_size=1, max_size=m.n, unique=True))
        y = data.draw(st.lists(st.integers(0, 1), min_size=len(free), max_size=len(free)))
        sub, mapping = clamp(m, assignment, free)
        full = np.array(assignment)
        full[mapping] = y
        assert sub.energy(y) == pytest.approx(double_loop_energy(m, full), abs=1e-9)

    @pytest.mark.parametrize("free", [[0, 0], [3], [-1]])
    def test_bad_free_set(self, free):
        with pytest.raises(ValueError):
            clamp(QuboModel(3), [0, 0, 0], free)

    def test_bad_assignment_length(self):
        with pytest.raises(ValueError):
            clamp(QuboModel(3), [0, 0], [0])


class TestRankVariability:
    def test_identical_instances_follow_shuffle(self):
        entries = [sol([1, 0, 1, 1, 0])] * 4
        order = rank_variability(entries, np.random.default_rng(5))
        assert sorted(order) == list(range(5))
        assert order == list(np.random.default_rng(5).permutation(5))

    def test_single_varying_bit_first(self):
        entries = [sol([0, 1, 0, b, 1]) for b in (0, 1, 0, 1)]
        assert rank_variability(entries, np.random.default_rng(0))[0] == 3

    def test_needs_two_instances(self):
        with pytest.raises(ValueError):
            rank_variability([sol([0, 1])], np.random.default_rng(0))

    def test_matches_sample_variance_oracle(self, rng):
        for _ in range(50):
            X = rng.integers(0, 2, (int(rng.integers(2, 9)), 15))
            order = rank_variability([sol(row) for row in X], np.random.default_rng(1))
            # population variance of each column, computed independently
            var = X.var(axis=0)
            ranked = var[order]
            assert all(a >= b - 1e-12 for a, b in zip(ranked, ranked[1:]))
            assert sorted(order) == list(range(15))


class TestSolutionPool:
    def test_refuses_duplicates(self):
        pool = SolutionPool(2, [sol([0, 1], 1.0), sol([1, 1], 2.0)])
        assert not pool.offer(sol([0, 1], 1.0))

    def test_evicts_worst_only_when_strictly_better(self):
        pool = SolutionPool(2, [sol([0, 1], 1.0), sol([1, 1], 2.0)])
        assert not pool.offer(sol([0, 0], 2.0))
        assert pool.offer(sol([0, 0], 1.5))
        assert [s.bitstring for s in pool] == ["01", "00"]
        assert len(pool) == 2

    def test_sorted_by_energy_then_bits(self):
        pool = SolutionPool(3, [sol([1, 0], 0.0), sol([0, 1], 0.0), sol([1, 1], -1.0)])
        assert [s.bitstring for s in pool] == ["11", "01", "10"]


class TestSolve:
    def test_full_size_exact_hits_optimum(self, rng):
        m = random_model(rng, 6)
        params = SubQuboParams(n_instances=4, n_extractions=1, n_samples=2, outer_rounds=1, subsolver=Exact(), pool_config=FAST_POOL)
        best, _, _ = solve(m, params, seed=3)
        assert best.energy == pytest.approx(brute_force(m, keep=1)[0].energy)

    def test_all_zero_model(self):
        params = SubQuboParams(n_instances=4, n_samples=2, outer_rounds=2, subsolver=Exact(), pool_config=FAST_POOL)
        best, pool, diag = solve(QuboModel(8), params)
        assert best.energy == 0.0
        assert all(s.energy == 0.0 for s in pool)
        assert set(diag.best_history) == {0.0}

    def test_model_smaller_than_sub_size(self):
        with pytest.raises(ValueError):
            solve(QuboModel(4), SubQuboParams(subsolver=Exact()))

    @pytest.mark.parametrize(
        "kwargs",
        [dict(sub_size=0), dict(n_instances=1), dict(n_samples=1), dict(n_samples=30), dict(outer_rounds=0), dict(clamp_source="worst")],
    )
    def test_param_validation(self, kwargs):
        with pytest.raises(ValueError):
            SubQuboParams(**kwargs)

    def test_monotone_best_and_consistent_pool(self, rng):
        m = random_model(rng, 40, density=0.15)
        params = SubQuboParams(n_instances=6, n_extractions=4, n_samples=3, outer_rounds=3, subsolver=SaConfig(sweeps=50), pool_config=FAST_POOL)
        best, pool, diag = solve(m, params, seed=2)
        assert all(b <= a for a, b in zip(diag.best_history, diag.best_history[1:]))
        # clamped energies of every inserted candidate agree with full re-evaluation
        assert all(s.is_consistent(m) for s in pool)
        assert best.energy == diag.round_best[-1] == diag.best_history[-1]
        assert len(diag.sub_jobs) == 12

    def test_failed_subsolver_is_skipped(self, rng):
        m = random_model(rng, 10)
        params = SubQuboParams(n_instances=4, n_extractions=2, n_samples=2, outer_rounds=2, subsolver="broken", pool_config=FAST_POOL)
        records = []
        best, _, diag = solve(m, params, on_record=records.append)
        assert diag.skipped == 4
        assert all(r["error"].startswith("TypeError") for r in diag.sub_jobs)
        assert [r["kind"] for r in records].count("round") == 2
        assert best.is_consistent(m)

    def test_deterministic_and_schedule_independent(self, rng):
        m = random_model(rng, 20, density=0.3)
        params = SubQuboParams(n_instances=5, n_extractions=3, n_samples=3, sub_size=4, outer_rounds=2, subsolver=QaoaConfig(layers=1, restarts=1), pool_config=FAST_POOL)
        a = solve(m, params, seed=7)
        b = solve(m, params, seed=7)
        with ThreadPoolExecutor(2) as ex:
            c = solve(m, params, seed=7, executor=ex)
        for other in (b, c):
            assert [s.key for s in other[1]] == [s.key for s in a[1]]
            assert other[2].sub_jobs == a[2].sub_jobs

    def test_random_clamp_source(self, rng):
        m = random_model(rng, 12)
        params = SubQuboParams(n_instances=4, n_samples=2, outer_rounds=2, clamp_source="random", subsolver=Exact(), pool_config=FAST_POOL)
        best, pool, _ = solve(m, params, seed=1)
        assert all(s.is_consistent(m) for s in pool)

    def test_exact_subsolver_finds_optimum(self):
        hits = 0
        for trial in range(100):
            rng = np.random.default_rng(1000 + trial)
            n = int(rng.integers(7, 13))
            m = random_model(rng, n, density=0.4)
            params = SubQuboParams(n_instances=6, n_extractions=5, n_samples=3, outer_rounds=8, subsolver=Exact(), pool_config=SaConfig(sweeps=5))
            best, _, _ = solve(m, params, seed=trial)
            hits += best.energy <= brute_force(m, keep=1)[0].energy + 1e-9
        assert hits >= 95
