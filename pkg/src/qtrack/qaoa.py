"""Dense statevector QAOA.

Cost layers are diagonal phases ``exp(-i gamma E(x))`` built from the full
Ising energy (the offset only contributes a global phase). Mixer layers apply
``R_X(2 beta) = exp(-i beta X)`` to every qubit, computed as a Walsh-Hadamard
conjugated diagonal phase.

Basis index ``k`` corresponds to the bitstring with ``x_0`` as the most
significant bit, matching :mod:`qtrack.qubo`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Union

import numpy as np

from . import optim
from ._seeding import derive_seed
from .qubo import CapacityError, IsingModel, bits_to_str, str_to_bits

MAX_QUBITS = 20
_DENSE_WHT_MAX = 10


@dataclass
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 0 <= self.n_qubits <= MAX_QUBITS:
            raise CapacityError(f"simulator supports at most {MAX_QUBITS} qubits")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError("amplitude vector must have length 2**n")

    @classmethod
    def basis(cls, bits) -> "Statevector":
        bits = str_to_bits(bits) if isinstance(bits, str) else np.asarray(bits)
        n = len(bits)
        amps = np.zeros(1 << n, dtype=complex)
        amps[_index_of(bits)] = 1.0
        return cls(n, amps)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class CVaR:
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("CVaR alpha must lie in (0, 1]")


@dataclass(frozen=True)
class Gibbs:
    eta: float = 1.0

    def __post_init__(self):
        if not self.eta > 0.0:
            raise ValueError("Gibbs eta must be positive")


Loss = Union[CVaR, Gibbs]
EXACT = "exact"


def default_angle_bounds(layers: int) -> optim.BoxBounds:
    lo = np.zeros(2 * layers)
    hi = np.concatenate([np.full(layers, 2 * math.pi), np.full(layers, math.pi)])
    return optim.BoxBounds(lo, hi)


@dataclass(frozen=True)
class QaoaConfig:
    """Parameters are ordered ``(gamma_1..gamma_p, beta_1..beta_p)``."""

    layers: int = 7
    shots: int | str = EXACT
    loss: Loss = field(default_factory=CVaR)
    optimizer: optim.Method = optim.Method.QUASI_NEWTON
    angle_bounds: optim.BoxBounds | None = None
    restarts: int = 5
    seed: int = 0
    final_shots: int = 1024
    tolerances: optim.Tolerances = field(default_factory=optim.Tolerances)

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.shots != EXACT and (not isinstance(self.shots, int) or self.shots < 1):
            raise ValueError("shots must be a positive count or 'exact'")
        object.__setattr__(self, "optimizer", optim.Method(self.optimizer))
        if self.angle_bounds is None:
            object.__setattr__(self, "angle_bounds", default_angle_bounds(self.layers))
        elif self.angle_bounds.dim != 2 * self.layers:
            raise ValueError("angle bounds must have dimension 2 * layers")


@dataclass
class SampleDistribution:
    counts: dict[str, int]
    total: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.total:
            raise ValueError("counts do not sum to total")
        if len({len(b) for b in self.counts}) > 1:
            raise ValueError("bitstrings of mixed length")

    def modal(self) -> tuple[str, int]:
        """Highest count, ties to the lexicographically smallest bitstring."""
        return min(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass
class QaoaOutcome:
    modal_bits: np.ndarray
    modal_probability: float
    best_params: np.ndarray
    final_loss: float
    distribution: SampleDistribution
    loss_trace: list[tuple[int, float]]
    probabilities: np.ndarray | None = None
    converged: bool = True

    @property
    def modal_bitstring(self) -> str:
        return bits_to_str(self.modal_bits)


def _index_of(bits) -> int:
    k = 0
    for b in bits:
        k = (k << 1) | int(b)
    return k


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise CapacityError(f"qubit count must lie in [1, {MAX_QUBITS}], got {n}")


def prepare_plus_state(n: int) -> Statevector:
    _check_n(n)
    size = 1 << n
    return Statevector(n, np.full(size, 1.0 / math.sqrt(size), dtype=complex))


def cost_diagonal(ising: IsingModel) -> np.ndarray:
    return ising.energies_all()


def apply_cost_layer(state: Statevector, ising: IsingModel, gamma: float) -> Statevector:
    if ising.n != state.n_qubits:
        raise ValueError(f"Hamiltonian has {ising.n} spins, state has {state.n_qubits} qubits")
    phases = np.exp(-1j * gamma * cost_diagonal(ising))
    return Statevector(state.n_qubits, state.amplitudes * phases)


@lru_cache(maxsize=None)
def _hadamard_matrix(n: int) -> np.ndarray:
    h = np.array([[1.0]])
    h1 = np.array([[1.0, 1.0], [1.0, -1.0]])
    for _ in range(n):
        h = np.kron(h, h1)
    h /= math.sqrt(1 << n)
    h.setflags(write=False)
    return h


@lru_cache(maxsize=None)
def _mixer_weights(n: int) -> np.ndarray:
    """Eigenvalues of ``sum_q Z_q`` per basis state: ``n - 2 * popcount(k)``."""
    k = np.arange(1 << n, dtype=np.int64)
    pop = np.zeros_like(k)
    for q in range(n):
        pop += (k >> q) & 1
    w = (n - 2 * pop).astype(float)
    w.setflags(write=False)
    return w


def _fwht(vec: np.ndarray, n: int) -> np.ndarray:
    v = vec.reshape((2,) * n)
    for axis in range(n):
        a = np.take(v, 0, axis=axis)
        b = np.take(v, 1, axis=axis)
        v = np.stack([a + b, a - b], axis=axis)
    return v.reshape(-1) / math.sqrt(1 << n)


def _mix(amps: np.ndarray, n: int, beta: float) -> np.ndarray:
    phase = np.exp(-1j * beta * _mixer_weights(n))
    if n <= _DENSE_WHT_MAX:
        h = _hadamard_matrix(n)
        return h @ (phase * (h @ amps))
    return _fwht(phase * _fwht(amps, n), n)


def apply_mixer_layer(state: Statevector, beta: float) -> Statevector:
    return Statevector(state.n_qubits, _mix(state.amplitudes, state.n_qubits, beta))


def _evolve(diag: np.ndarray, n: int, params: np.ndarray) -> np.ndarray:
    p = len(params) // 2
    size = 1 << n
    amps = np.full(size, 1.0 / math.sqrt(size), dtype=complex)
    for gamma, beta in zip(params[:p], params[p:]):
        amps = amps * np.exp(-1j * gamma * diag)
        amps = _mix(amps, n, beta)
    return amps


def simulate(ising: IsingModel, params) -> Statevector:
    params = np.asarray(params, dtype=float)
    if params.ndim != 1 or len(params) % 2:
        raise ValueError("params must hold an even number of angles")
    _check_n(ising.n)
    return Statevector(ising.n, _evolve(cost_diagonal(ising), ising.n, params))


def sample(state: Statevector, shots: int, seed: int) -> SampleDistribution:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = state.probabilities
    probs = probs / probs.sum()
    counts = np.random.default_rng(seed).multinomial(shots, probs)
    n = state.n_qubits
    out = {format(int(k), f"0{n}b"): int(counts[k]) for k in np.nonzero(counts)[0]}
    return SampleDistribution(out, int(shots))


def probability_of(state: Statevector, bits) -> float:
    bits = str_to_bits(bits) if isinstance(bits, str) else np.asarray(bits)
    if len(bits) != state.n_qubits:
        raise ValueError(f"expected {state.n_qubits} bits, got {len(bits)}")
    return float(abs(state.amplitudes[_index_of(bits)]) ** 2)


# ---------------------------------------------------------------------------
# losses


def _as_weighted(samples: Iterable[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    pairs = list(samples)
    if not pairs:
        raise ValueError("empty sample set")
    e = np.array([p[0] for p in pairs], dtype=float)
    w = np.array([p[1] for p in pairs], dtype=float)
    if np.any(w < 0):
        raise ValueError("negative count")
    if w.sum() <= 0:
        raise ValueError("empty sample set")
    return e, w


def loss_cvar(samples: Iterable[tuple[float, int]], alpha: float) -> float:
    """Mean of the ``ceil(alpha * K)`` lowest energies among ``K`` samples.

    ``samples`` holds ``(energy, count)`` pairs.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    e, w = _as_weighted(samples)
    total = int(round(w.sum()))
    tail = math.ceil(alpha * total)
    order = np.argsort(e, kind="stable")
    acc = 0.0
    taken = 0
    for k in order:
        take = min(int(w[k]), tail - taken)
        acc += take * e[k]
        taken += take
        if taken >= tail:
            break
    return acc / tail


def loss_gibbs(samples: Iterable[tuple[float, int]], eta: float) -> float:
    """``-ln(mean(exp(-eta E)))`` over the samples."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    e, w = _as_weighted(samples)
    return _gibbs(e, w / w.sum(), eta)


def _gibbs(e: np.ndarray, p: np.ndarray, eta: float) -> float:
    z = -eta * e
    shift = z.max()
    return float(-(shift + math.log(float(p @ np.exp(z - shift)))))


def cvar_from_probabilities(energies: np.ndarray, probs: np.ndarray, alpha: float) -> float:
    """CVaR of an exact distribution: mean energy of the lowest ``alpha`` probability mass."""
    order = np.argsort(energies, kind="stable")
    return _cvar_sorted(energies[order], probs[order], alpha)


def _cvar_sorted(e_sorted: np.ndarray, p_sorted: np.ndarray, alpha: float) -> float:
    return _cvar_sorted_weights(e_sorted, p_sorted, alpha)[0]


def _cvar_sorted_weights(e_sorted: np.ndarray, p_sorted: np.ndarray, alpha: float):
    """CVaR and its derivative with respect to each (sorted) probability."""
    cum = np.cumsum(p_sorted)
    total = cum[-1]
    cut = min(int(np.searchsorted(cum, alpha * total)), len(cum) - 1)
    head = p_sorted[:cut] / total
    before = float(head.sum())
    value = (float(e_sorted[:cut] @ head) + (alpha - before) * e_sorted[cut]) / alpha
    weights = np.zeros_like(e_sorted)
    weights[:cut] = (e_sorted[:cut] - e_sorted[cut]) / alpha
    return value, weights


def gibbs_from_probabilities(energies: np.ndarray, probs: np.ndarray, eta: float) -> float:
    return _gibbs(np.asarray(energies, float), np.asarray(probs, float) / np.sum(probs), eta)


# ---------------------------------------------------------------------------
# driver


def _apply_sum_x(amps: np.ndarray, n: int) -> np.ndarray:
    """``sum_q X_q |amps>``, diagonal in the Hadamard basis."""
    if n <= _DENSE_WHT_MAX:
        h = _hadamard_matrix(n)
        return h @ (_mixer_weights(n) * (h @ amps))
    return _fwht(_mixer_weights(n) * _fwht(amps, n), n)


def _adjoint_gradient(diag: np.ndarray, n: int, params: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Gradient of ``sum_k weights_k |psi_k(params)|^2`` by reverse-mode sweep."""
    p = len(params) // 2
    gammas, betas = params[:p], params[p:]
    size = 1 << n
    amps = np.full(size, 1.0 / math.sqrt(size), dtype=complex)
    after_cost = []
    after_mix = []
    for gamma, beta in zip(gammas, betas):
        amps = amps * np.exp(-1j * gamma * diag)
        after_cost.append(amps)
        amps = _mix(amps, n, beta)
        after_mix.append(amps)
    lam = weights * amps
    grad = np.empty(2 * p)
    for layer in range(p - 1, -1, -1):
        grad[p + layer] = 2.0 * float(np.imag(np.vdot(lam, _apply_sum_x(after_mix[layer], n))))
        lam = _mix(lam, n, -betas[layer])
        grad[layer] = 2.0 * float(np.imag(np.vdot(lam, diag * after_cost[layer])))
        lam = lam * np.exp(1j * gammas[layer] * diag)
    return grad


class _Objective:
    """Loss as a function of the 2p angles for one restart."""

    def __init__(self, ising: IsingModel, config: QaoaConfig, sample_seed: int):
        self.n = ising.n
        self.diag = cost_diagonal(ising)
        self.order = np.argsort(self.diag, kind="stable")
        self.sorted_e = self.diag[self.order]
        self.config = config
        self.sample_seed = sample_seed

    def probabilities(self, params: np.ndarray) -> np.ndarray:
        return np.abs(_evolve(self.diag, self.n, params)) ** 2

    def loss_of(self, probs: np.ndarray) -> float:
        loss = self.config.loss
        if self.config.shots == EXACT:
            if isinstance(loss, CVaR):
                return _cvar_sorted(self.sorted_e, probs[self.order], loss.alpha)
            return gibbs_from_probabilities(self.diag, probs, loss.eta)
        # seed frozen for the whole optimization run
        counts = np.random.default_rng(self.sample_seed).multinomial(self.config.shots, probs / probs.sum())
        hit = np.nonzero(counts)[0]
        samples = list(zip(self.diag[hit], counts[hit]))
        if isinstance(loss, CVaR):
            return loss_cvar(samples, loss.alpha)
        return loss_gibbs(samples, loss.eta)

    def __call__(self, params: np.ndarray) -> float:
        return self.loss_of(self.probabilities(params))

    @property
    def has_gradient(self) -> bool:
        return self.config.shots == EXACT

    def value_and_grad(self, params: np.ndarray) -> tuple[float, np.ndarray]:
        """Exact-mode loss and its analytic gradient."""
        probs = self.probabilities(params)
        loss = self.config.loss
        if isinstance(loss, CVaR):
            value, w_sorted = _cvar_sorted_weights(self.sorted_e, probs[self.order], loss.alpha)
            weights = np.empty_like(w_sorted)
            weights[self.order] = w_sorted
        else:
            z = -loss.eta * self.diag
            boltz = np.exp(z - z.max())
            norm = float(probs @ boltz)
            value = float(-(z.max() + math.log(norm)))
            weights = -boltz / norm
        return value, _adjoint_gradient(self.diag, self.n, params, weights)


def run_qaoa(ising: IsingModel, config: QaoaConfig) -> QaoaOutcome:
    _check_n(ising.n)
    best: tuple[float, optim.OptimResult] | None = None
    any_converged = False
    for restart in range(config.restarts):
        rng = np.random.default_rng(derive_seed(config.seed, restart, 0))
        objective = _Objective(ising, config, derive_seed(config.seed, restart, 1))
        x0 = config.angle_bounds.sample(rng)
        try:
            res = optim.minimize(
                objective,
                x0,
                config.angle_bounds,
                config.optimizer,
                config.tolerances,
                gradient=objective.value_and_grad if objective.has_gradient else None,
            )
        except optim.OptimizationError as exc:
            if exc.x_last is None:
                continue
            res = optim.OptimResult(exc.x_last, exc.f_last, 0, False, [(0, exc.f_last)], str(exc))
        any_converged |= res.converged
        if best is None or res.f < best[0]:
            best = (res.f, res)
    if best is None:
        raise optim.OptimizationError("every QAOA restart failed", None, None)
    res = best[1]

    objective = _Objective(ising, config, derive_seed(config.seed, 0, 1))
    probs = objective.probabilities(res.x)
    state = Statevector(ising.n, _evolve(objective.diag, ising.n, res.x))
    distribution = sample(
        state,
        config.shots if config.shots != EXACT else config.final_shots,
        derive_seed(config.seed, config.restarts, 2),
    )
    if config.shots == EXACT:
        k = int(np.argmax(probs))  # first maximum is the smallest index
        modal_bits = np.array([int(c) for c in format(k, f"0{ising.n}b")], dtype=np.uint8)
        modal_probability = float(probs[k])
    else:
        bitstring, count = distribution.modal()
        modal_bits = str_to_bits(bitstring)
        modal_probability = count / distribution.total
    return QaoaOutcome(
        modal_bits=modal_bits,
        modal_probability=modal_probability,
        best_params=res.x,
        final_loss=res.f,
        distribution=distribution,
        loss_trace=res.trace,
        probabilities=probs,
        converged=any_converged,
    )
