"""Perturbative solution of the static Maxwell-Born-Infeld field equations.

The fields are expanded in powers of ``beta^4`` around the Maxwell solution;
each coefficient field comes from solenoidal/irrotational projections of
polynomial expressions in lower orders.  Exact majorant coefficients give a
certified radius of convergence and truncation-tail bounds.
"""

from .convergence import certify, critical_points, electrostatic_radius, majorant_sequence
from .grid import GridSpec, ScalarField, VectorField3
from .series import SeriesEngine, assemble, reconstruct_EB

__all__ = [
    "GridSpec", "ScalarField", "VectorField3", "SeriesEngine", "assemble", "reconstruct_EB",
    "certify", "critical_points", "electrostatic_radius", "majorant_sequence",
]
__version__ = "0.1.0"
