"""Finite-lattice CAR algebra: Fock operators, Hamiltonians, dynamics and diagnostics.

Submodules:
    car          Jordan-Wigner modes, smeared operators, Majorana bases
    hamiltonian  hopping kernels, interaction terms, GGE strings
    dynamics     Heisenberg evolution, quasifree fast path, invariant means
    doubled      doubled CAR system, modular conjugation, doubled Hamiltonian
    diagnostics  commutator decay, localization, clustering, recurrence windows
    twist        gauge twists, covariance and local eigenoperator residuals
"""
