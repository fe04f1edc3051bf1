"""Numerical laboratory for fully nonlinear degenerate/singular elliptic operators.

Pucci-type operators with a gradient weight |Du|^alpha: Dirichlet solves,
principal eigenvalues on bounded and truncated unbounded domains, empirical
Harnack and Hoelder measurements, and sampled certificates for explicit
barrier functions.
"""

from .errors import *  # noqa: F401,F403
from .grid import (  # noqa: F401
    Disc,
    EllipseSegment,
    Grid,
    Rectangle,
    ScalarField,
    StripTruncated,
    build_grid,
    sample_field,
    sup_inf,
)

__version__ = "0.1.0"
