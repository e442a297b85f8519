"""
tracial-lab: finite-lattice CAR algebras, doubled tracial states and gauge-twist diagnostics.
"""

__version__ = "0.1.0"
