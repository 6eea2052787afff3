"""Large-deviation and quantum-jump analysis of a three-spin model with collective dissipation.

The package is organised in five modules:

spin_algebra
    Operators on the 8-dimensional three-spin Hilbert space: Pauli matrices,
    site embeddings, the spin Hamiltonian and the ladder / collective jump
    operators.
liouvillian
    The vectorized Lindblad generator, its single-spin-damping extension and
    the tilted (counting-field) generator.
spectral
    Dynamical free energy theta(s), activity k(s) by finite differences and
    by first-order perturbation theory, kink detection, the exchange symmetry
    residual theta(s) - theta(s0 - s), steady states and the dark subspace.
trajectories
    Monte Carlo wave-function (quantum-jump) sampling with per-channel
    counting, ensemble statistics, fluctuation-theorem checks and
    intermittency detection.
cli
    Config-driven command line front end writing plot-ready CSV tables.
"""

__version__ = "0.1.0"

from .spin_algebra import ModelParams, SpinOperator

__all__ = ["ModelParams", "SpinOperator", "__version__"]
