"""Charged-particle track finding posed as a QUBO.

Triplets of detector hits become binary variables; the resulting QUBO is
solved by simulated annealing, exhaustive search, a statevector QAOA
simulator, or a sub-QUBO decomposition that combines an annealed solution
pool with small exactly-simulable subproblems.
"""

from .qubo import BitSolution, IsingModel, QuboModel, brute_force, energy, to_ising

__all__ = ["BitSolution", "IsingModel", "QuboModel", "brute_force", "energy", "to_ising"]
__version__ = "0.1.0"
