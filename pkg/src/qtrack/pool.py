"""Ranked pool of full-QUBO solutions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .qubo import BitSolution


@dataclass
class SolutionPool:
    """Fixed-capacity pool kept sorted by ``(energy, bitstring)``.

    Insertion is steady-state elitist: a candidate replaces the worst entry
    only when it is strictly better, and exact duplicates are refused.
    """

    capacity: int
    entries: list[BitSolution] = field(default_factory=list)
    model_id: int | None = None

    def __post_init__(self):
        self.entries = sorted(self.entries, key=BitSolution.sort_key)
        if len(self.entries) > self.capacity:
            raise ValueError("more entries than capacity")

    @classmethod
    def from_solutions(cls, solutions: Iterable[BitSolution], model=None) -> "SolutionPool":
        entries = list(solutions)
        return cls(len(entries), entries, id(model) if model is not None else None)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, k: int) -> BitSolution:
        return self.entries[k]

    @property
    def best(self) -> BitSolution:
        return self.entries[0]

    @property
    def worst(self) -> BitSolution:
        return self.entries[-1]

    def contains(self, candidate: BitSolution) -> bool:
        return any(e.key == candidate.key for e in self.entries)

    def offer(self, candidate: BitSolution) -> bool:
        """Insert ``candidate`` if it improves on the worst entry; report acceptance."""
        if self.contains(candidate):
            return False
        if len(self.entries) < self.capacity:
            self.entries.append(candidate)
        elif candidate.energy < self.worst.energy:
            self.entries[-1] = candidate
        else:
            return False
        self.entries.sort(key=BitSolution.sort_key)
        return True
