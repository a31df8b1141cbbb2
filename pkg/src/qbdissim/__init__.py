"""Dissipative quantum battery simulations.

Collective charging of N batteries via repeated interactions, coherence
generation under a driven Hamiltonian, and a five-stroke heat engine
operating between negative-temperature steady states.
"""

__version__ = "0.1.0"

from .qcore import (  # noqa: F401
    DensityMatrix,
    HermitianOperator,
    Superoperator,
    SpectralDecomposition,
    ergotropy,
    kron,
    matrix_exp,
    mutual_information,
    partial_trace,
    rel_entropy_coherence,
    thermal_state,
    trace_distance,
    vn_entropy,
)
