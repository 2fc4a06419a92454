"""dblab: numerical laboratory for de Branges space phase geometry.

The package is organized around a phase function phi attached to a
Hermite-Biehler structure function E: spaces defines E, phi and the
phase metric; regularity probes doubling behaviour of the measure
phi' dx; sequences handles node sets and Beurling-type densities in
the phase metric; kernels builds reproducing kernels, Gram matrices
and frame/Riesz diagnostics; construct assembles multiplier plans,
log-potentials, peak functions and Lagrange interpolants; cli wraps
everything in a deterministic command line tool.
"""

__version__ = "0.1.0"

from . import spaces, regularity, sequences, kernels, construct  # noqa: F401
