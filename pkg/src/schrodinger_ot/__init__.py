"""Optimal transport geometry of freely spreading Gaussian wave packets.

Closed forms live in :mod:`analytic`; :mod:`quadrature`, :mod:`ot_solver` and
:mod:`shape` supply independent numerical oracles; :mod:`verify` compares them.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DiscreteMeasure,
    FundamentalField,
    GaussianPacket,
    Isometry,
    PhysParams,
    SchrodingerOTError,
    TransportPlan,
)

__all__ = [
    "DiscreteMeasure",
    "FundamentalField",
    "GaussianPacket",
    "Isometry",
    "PhysParams",
    "SchrodingerOTError",
    "TransportPlan",
    "__version__",
]
