"""QUBO and Ising models, exact energies, and the brute-force oracle.

A QUBO over binary variables ``x_i`` is

    E(x) = sum_i a_i x_i + sum_{j<i} b_ij x_i x_j + offset

and is stored sparsely: absent keys are zero. Quadratic keys are always the
ordered pair ``(i, j)`` with ``j < i``.

Bitstrings are written in index order, ``x_0 x_1 ... x_{n-1}``; basis index
``k`` of a register maps to ``x_i = (k >> (n - 1 - i)) & 1`` so that integer
order and lexicographic bitstring order agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

MAX_BRUTE_FORCE_VARS = 24


class CapacityError(ValueError):
    """Problem too large for an exhaustive or dense method."""


class QuboFormatError(ValueError):
    """Malformed QUBO text file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def _check_finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite coefficient for {what}: {value}")
    return value


def _normalize_terms(
    n: int,
    linear: Mapping[int, float],
    quadratic: Mapping[tuple[int, int], float],
) -> tuple[dict[int, float], dict[tuple[int, int], float]]:
    lin: dict[int, float] = {}
    for i, v in linear.items():
        i = int(i)
        if not 0 <= i < n:
            raise ValueError(f"linear index {i} out of range [0, {n})")
        lin[i] = lin.get(i, 0.0) + _check_finite(v, f"linear {i}")
    quad: dict[tuple[int, int], float] = {}
    for (i, j), v in quadratic.items():
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"quadratic index ({i}, {j}) out of range [0, {n})")
        v = _check_finite(v, f"quadratic ({i}, {j})")
        if i == j:
            # x^2 == x for binary variables
            lin[i] = lin.get(i, 0.0) + v
            continue
        key = (i, j) if i > j else (j, i)
        quad[key] = quad.get(key, 0.0) + v
    return lin, quad


def bits_to_str(bits: Iterable[int]) -> str:
    return "".join("1" if b else "0" for b in bits)


def str_to_bits(s: str) -> np.ndarray:
    if any(c not in "01" for c in s):
        raise ValueError(f"not a bitstring: {s!r}")
    return np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0")


def basis_bits(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Bit matrix of shape ``(stop - start, n)`` for basis indices in order."""
    if stop is None:
        stop = 1 << n
    k = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((k[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


@dataclass(frozen=True)
class QuboModel:
    """Sparse QUBO instance.

    Mirrored quadratic keys are summed into the ``(i, j), j < i`` slot and
    diagonal quadratic keys fold into the linear term.
    """

    n: int
    linear: Mapping[int, float] = field(default_factory=dict)
    quadratic: Mapping[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        if int(self.n) < 0:
            raise ValueError("n must be non-negative")
        lin, quad = _normalize_terms(int(self.n), self.linear, self.quadratic)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "quadratic", quad)
        object.__setattr__(self, "offset", _check_finite(self.offset, "offset"))

    @classmethod
    def from_matrix(cls, Q: np.ndarray, offset: float = 0.0) -> "QuboModel":
        """Build from a dense matrix; the diagonal is linear, ``Q_ij + Q_ji`` is coupling."""
        Q = np.asarray(Q, dtype=float)
        n = Q.shape[0]
        linear = {i: Q[i, i] for i in range(n) if Q[i, i] != 0.0}
        quadratic: dict[tuple[int, int], float] = {}
        for i, j in zip(*np.nonzero(Q)):
            if i != j:
                quadratic[(i, j)] = quadratic.get((i, j), 0.0) + Q[i, j]
        return cls(n, linear, quadratic, offset)

    # cached dense views, built on first use
    @cached_property
    def linear_vector(self) -> np.ndarray:
        a = np.zeros(self.n)
        for i, v in self.linear.items():
            a[i] = v
        a.setflags(write=False)
        return a

    @cached_property
    def quad_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Parallel ``(rows, cols, values)`` arrays in sorted key order."""
        keys = sorted(self.quadratic)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        vals = np.array([self.quadratic[k] for k in keys], dtype=float)
        for arr in (rows, cols, vals):
            arr.setflags(write=False)
        return rows, cols, vals

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric CSR adjacency ``(indptr, indices, weights)``."""
        rows, cols, vals = self.quad_arrays
        src = np.concatenate([rows, cols])
        dst = np.concatenate([cols, rows])
        w = np.concatenate([vals, vals])
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return indptr, dst.astype(np.int64), w

    @property
    def max_abs_coefficient(self) -> float:
        values = [abs(v) for v in self.linear.values()] + [abs(v) for v in self.quadratic.values()]
        return max(values, default=0.0)

    def energy(self, bits) -> float:
        return energy(self, bits)

    def energies(self, X: np.ndarray) -> np.ndarray:
        """Energies of the rows of a 0/1 matrix ``X``."""
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValueError(f"expected shape (m, {self.n}), got {X.shape}")
        Xf = X.astype(float)
        out = Xf @ self.linear_vector + self.offset
        rows, cols, vals = self.quad_arrays
        if len(vals):
            out += (Xf[:, rows] * Xf[:, cols]) @ vals
        return out


@dataclass(frozen=True)
class IsingModel:
    """Spin model ``sum h_i s_i + sum_{j<i} J_ij s_i s_j + offset`` with ``s = 1 - 2x``."""

    n: int
    h: Mapping[int, float] = field(default_factory=dict)
    J: Mapping[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        h, J = _normalize_terms(int(self.n), self.h, {})
        # J diagonal has no binary-style folding: s^2 == 1 goes to the offset
        offset = _check_finite(self.offset, "offset")
        Jn: dict[tuple[int, int], float] = {}
        for (i, j), v in self.J.items():
            i, j = int(i), int(j)
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"coupling index ({i}, {j}) out of range [0, {self.n})")
            v = _check_finite(v, f"coupling ({i}, {j})")
            if i == j:
                offset += v
                continue
            key = (i, j) if i > j else (j, i)
            Jn[key] = Jn.get(key, 0.0) + v
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "J", Jn)
        object.__setattr__(self, "offset", offset)

    def energies_all(self) -> np.ndarray:
        """Energy of every basis state, indexed like a statevector."""
        if self.n > 24:
            raise CapacityError(f"{self.n} spins is too many to enumerate")
        size = 1 << self.n
        k = np.arange(size, dtype=np.int64)
        spins = [1.0 - 2.0 * ((k >> (self.n - 1 - i)) & 1) for i in range(self.n)]
        out = np.full(size, self.offset)
        for i, v in self.h.items():
            out += v * spins[i]
        for (i, j), v in self.J.items():
            out += v * (spins[i] * spins[j])
        return out


@dataclass(frozen=True)
class BitSolution:
    """An assignment together with its cached energy."""

    bits: np.ndarray
    energy: float

    def __post_init__(self):
        bits = np.array(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or np.any(bits > 1):
            raise ValueError("bits must be a 1-D 0/1 vector")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "energy", float(self.energy))

    @classmethod
    def evaluate(cls, model: QuboModel, bits) -> "BitSolution":
        return cls(bits, energy(model, bits))

    @property
    def key(self) -> bytes:
        return self.bits.tobytes()

    @property
    def bitstring(self) -> str:
        return bits_to_str(self.bits)

    def sort_key(self) -> tuple[float, bytes]:
        return (self.energy, self.key)

    def is_consistent(self, model: QuboModel, rtol: float = 1e-9) -> bool:
        if len(self.bits) != model.n:
            return False
        e = energy(model, self.bits)
        return abs(e - self.energy) <= rtol * max(1.0, abs(e))


def _as_bits(bits, n: int) -> np.ndarray:
    x = np.asarray(bits)
    if x.ndim != 1 or len(x) != n:
        raise ValueError(f"expected {n} bits, got shape {x.shape}")
    if np.any((x != 0) & (x != 1)):
        raise ValueError("bits must be 0 or 1")
    return x.astype(float)


def energy(model: QuboModel, bits) -> float:
    x = _as_bits(bits, model.n)
    e = float(model.linear_vector @ x) + model.offset
    rows, cols, vals = model.quad_arrays
    if len(vals):
        e += float(vals @ (x[rows] * x[cols]))
    return e


def to_ising(model: QuboModel) -> IsingModel:
    """Map with ``x_i = (1 - s_i) / 2``."""
    h: dict[int, float] = {}
    J: dict[tuple[int, int], float] = {}
    offset = model.offset
    for i, a in model.linear.items():
        h[i] = h.get(i, 0.0) - a / 2.0
        offset += a / 2.0
    for (i, j), b in model.quadratic.items():
        J[(i, j)] = b / 4.0
        h[i] = h.get(i, 0.0) - b / 4.0
        h[j] = h.get(j, 0.0) - b / 4.0
        offset += b / 4.0
    return IsingModel(model.n, h, J, offset)


def ising_energy(model: IsingModel, spins) -> float:
    s = np.asarray(spins)
    if s.ndim != 1 or len(s) != model.n:
        raise ValueError(f"expected {model.n} spins, got shape {s.shape}")
    if np.any((s != 1) & (s != -1)):
        raise ValueError("spins must be +1 or -1")
    s = s.astype(float)
    e = model.offset
    for i, v in model.h.items():
        e += v * s[i]
    for (i, j), v in model.J.items():
        e += v * s[i] * s[j]
    return float(e)


def bits_to_spins(bits) -> np.ndarray:
    return 1 - 2 * np.asarray(bits, dtype=np.int64)


def brute_force(
    model: QuboModel, keep: int | None = 256, chunk: int = 1 << 16
) -> tuple[BitSolution, list[tuple[np.ndarray, float]]]:
    """Exhaustive minimization.

    Returns the optimum (lowest energy, then lexicographically smallest
    bitstring) and the ``keep`` lowest entries of the spectrum in the same
    order; ``keep=None`` returns the full spectrum.
    """
    n = model.n
    if n > MAX_BRUTE_FORCE_VARS:
        raise CapacityError(f"brute force limited to {MAX_BRUTE_FORCE_VARS} variables, got {n}")
    size = 1 << n
    energies = np.empty(size)
    for start in range(0, size, chunk):
        stop = min(size, start + chunk)
        energies[start:stop] = model.energies(basis_bits(n, start, stop))
    if keep is None or keep >= size:
        order = np.argsort(energies, kind="stable")
    else:
        part = np.argpartition(energies, keep - 1)[:keep] if keep > 0 else np.array([], dtype=np.int64)
        # argpartition may split a tie at the boundary; widen to include all tied indices
        if keep > 0:
            cutoff = energies[part].max()
            part = np.nonzero(energies <= cutoff)[0]
        order = part[np.lexsort((part, energies[part]))][:keep]
    best_k = int(np.argmin(energies))
    best = BitSolution(basis_bits(n, best_k, best_k + 1)[0], energies[best_k])
    spectrum = [(basis_bits(n, int(k), int(k) + 1)[0], float(energies[k])) for k in order]
    return best, spectrum


# ---------------------------------------------------------------------------
# text serialization


@dataclass
class QuboFile:
    model: QuboModel
    triplets: dict[int, tuple[int, int, int]] = field(default_factory=dict)


def format_qubo(model: QuboModel, triplets: Mapping[int, tuple[int, int, int]] | None = None) -> str:
    lines = [f"n {model.n} offset {model.offset:.17g}"]
    for i in sorted(model.linear):
        lines.append(f"lin {i} {model.linear[i]:.17g}")
    for i, j in sorted(model.quadratic):
        lines.append(f"quad {i} {j} {model.quadratic[(i, j)]:.17g}")
    for idx in sorted(triplets or {}):
        h = triplets[idx]
        lines.append(f"triplet {idx} {h[0]} {h[1]} {h[2]}")
    return "\n".join(lines) + "\n"


def _finite_field(text: str, lineno: int) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise QuboFormatError(f"non-finite value {text!r}", lineno)
    return value


def parse_qubo(text: str) -> QuboFile:
    n = None
    offset = 0.0
    linear: dict[int, float] = {}
    quadratic: dict[tuple[int, int], float] = {}
    triplets: dict[int, tuple[int, int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if n is None:
                if tag != "n" or len(parts) != 4 or parts[2] != "offset":
                    raise QuboFormatError("expected header 'n <count> offset <real>'", lineno)
                n = int(parts[1])
                offset = _finite_field(parts[3], lineno)
                if n < 0:
                    raise QuboFormatError("negative variable count", lineno)
            elif tag == "lin" and len(parts) == 3:
                i = int(parts[1])
                if i in linear:
                    raise QuboFormatError(f"duplicate linear key {i}", lineno)
                if not 0 <= i < n:
                    raise QuboFormatError(f"index {i} out of range", lineno)
                linear[i] = _finite_field(parts[2], lineno)
            elif tag == "quad" and len(parts) == 4:
                i, j = int(parts[1]), int(parts[2])
                if not j < i:
                    raise QuboFormatError(f"quadratic key must satisfy j < i, got ({i}, {j})", lineno)
                if (i, j) in quadratic:
                    raise QuboFormatError(f"duplicate quadratic key ({i}, {j})", lineno)
                if not 0 <= i < n:
                    raise QuboFormatError(f"index {i} out of range", lineno)
                quadratic[(i, j)] = _finite_field(parts[3], lineno)
            elif tag == "triplet" and len(parts) == 5:
                idx = int(parts[1])
                if not 0 <= idx < n:
                    raise QuboFormatError(f"triplet index {idx} out of range", lineno)
                triplets[idx] = (int(parts[2]), int(parts[3]), int(parts[4]))
            else:
                raise QuboFormatError(f"unrecognized record: {line!r}", lineno)
        except QuboFormatError:
            raise
        except ValueError as exc:
            raise QuboFormatError(str(exc), lineno) from None
    if n is None:
        raise QuboFormatError("missing header")
    try:
        model = QuboModel(n, linear, quadratic, offset)
    except ValueError as exc:
        raise QuboFormatError(str(exc)) from None
    return QuboFile(model, triplets)


def write_qubo(path, model: QuboModel, triplets=None) -> None:
    Path(path).write_text(format_qubo(model, triplets), encoding="utf-8")


def read_qubo(path) -> QuboFile:
    return parse_qubo(Path(path).read_text(encoding="utf-8"))
