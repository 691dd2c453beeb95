import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from qtrack.qubo import QuboModel

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


def random_model(rng: np.random.Generator, n: int, density: float = 0.5, scale: float = 2.0) -> QuboModel:
    linear = {i: float(rng.uniform(-scale, scale)) for i in range(n) if rng.random() < 0.8}
    quadratic = {
        (i, j): float(rng.uniform(-scale, scale))
        for i in range(n)
        for j in range(i)
        if rng.random() < density
    }
    return QuboModel(n, linear, quadratic, float(rng.uniform(-scale, scale)))


def double_loop_energy(model: QuboModel, bits) -> float:
    """Independent energy oracle: explicit sums over a dense coefficient table."""
    n = model.n
    a = [0.0] * n
    b = [[0.0] * n for _ in range(n)]
    for i, v in model.linear.items():
        a[i] += v
    for (i, j), v in model.quadratic.items():
        b[i][j] += v
    total = model.offset
    for i in range(n):
        total += a[i] * bits[i]
        for j in range(i):
            total += b[i][j] * bits[i] * bits[j]
    return total


def all_assignments(n: int):
    return [list(bits) for bits in itertools.product((0, 1), repeat=n)]


@st.composite
def models(draw, min_n: int = 1, max_n: int = 8):
    n = draw(st.integers(min_n, max_n))
    coef = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)
    linear = draw(st.dictionaries(st.integers(0, n - 1), coef, max_size=n))
    pairs = [(i, j) for i in range(n) for j in range(i)]
    quadratic = {}
    if pairs:
        keys = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
        quadratic = {k: draw(coef) for k in keys}
    offset = draw(coef)
    return QuboModel(n, linear, quadratic, offset)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
