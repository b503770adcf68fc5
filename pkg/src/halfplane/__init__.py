"""Weighted Hilbert-type operators, Bergman projections and atomic decompositions on the upper half-plane."""

from .weights import *  # noqa: F401,F403
from . import special  # noqa: F401
from .quadrature import *  # noqa: F401,F403
from .hilbert import *  # noqa: F401,F403
from .bergman import *  # noqa: F401,F403
from .lattice import *  # noqa: F401,F403
from .atomic import *  # noqa: F401,F403

__version__ = "0.1.0"
