"""Exact and numeric tools for Hamiltonian operators of hydrodynamic type.

Modules:

* :mod:`hydropencil.expr` exact rational functions, parser and printer
* :mod:`hydropencil.geometry` metrics, Christoffel symbols, curvature, coordinate maps
* :mod:`hydropencil.operators` Dubrovin-Novikov operators, compatibility tests, Lie derivatives
* :mod:`hydropencil.hierarchy` recursion operator, hydrodynamic flows, bi-Hamiltonian checks
* :mod:`hydropencil.sim` periodic-grid RK4 evolution and conservation logs
* :mod:`hydropencil.cli` the ``hydropencil`` command
"""

__version__ = "0.1.0"

from .expr import Context, Expr, parse  # noqa: E402
from .geometry import ContraMetric, CoordinateMap, VectorField  # noqa: E402
from .operators import DNOperator  # noqa: E402

__all__ = ["Context", "Expr", "parse", "ContraMetric", "CoordinateMap", "VectorField", "DNOperator", "__version__"]
