"""Large-deviation thermodynamics of random partition models of the Bose gas.

Models: the ideal reference gas, the cycle mean field (CMF), the particle
mean field (PMF) and the Huang-Yang-Luttinger (HYL) model.
"""

from ._backend import NAME as BACKEND
from .errors import (
    BoseLDPError,
    DivergenceError,
    DomainError,
    ParameterError,
    RegimeError,
    SingularityError,
    StateSpaceError,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoseLDPError",
    "DivergenceError",
    "DomainError",
    "ParameterError",
    "RegimeError",
    "SingularityError",
    "StateSpaceError",
]
