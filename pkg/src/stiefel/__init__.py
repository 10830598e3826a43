"""Stiefel manifold geometry under the beta-metric family.

Submodules: ``numerics`` (matrix kernels and random sampling), ``manifold``
(points, tangents, metric, exponential), ``bounds`` (distance envelopes),
``curves`` (explicit curve families and quadrature lengths), ``logmap``
(shooting logarithm with certificates) and ``cli``.
"""
from ._backend import NAME as BACKEND
from .errors import InvalidInput, NotApplicable, NumericalFailure, StiefelError

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "InvalidInput",
    "NotApplicable",
    "NumericalFailure",
    "StiefelError",
    "__version__",
]
