"""Numerical tools for semilinear evolution equations with memory.

The package solves problems of the form

    d/dt [ k * (u - u0) ](t) + A u(t) = f(u(t)),    t in (0, T],

where ``*`` is the Laplace convolution on (0, t), ``k`` is a completely
positive integral kernel paired with a resolvent kernel ``l`` via
``k * l = 1``, and ``A`` is a nonnegative diagonal operator given by its
spectrum.  Solutions are represented by their spectral coefficients; the
scalar relaxation functions attached to each eigenvalue are computed by
product-integration of the defining Volterra equations.

Subpackage layout:

``special``    scalar special functions (gamma, Mittag-Leffler, E1)
``kernels``    the kernel-pair catalog and its integral transforms
``volterra``   meshes, relaxation tables, convolution quadrature
``spectral``   diagonal operators and sine-basis synthesis on (0, 1)
``nonlinear``  Lipschitz and energy-type nonlinearities
``evolution``  linear and semilinear trajectory solvers
``analysis``   decay envelopes, Hoelder and derivative diagnostics
``cli``        command line entry point (``nlevo run|verify|tables``)
"""

from __future__ import annotations

from .errors import (
    AccuracyWarning,
    DomainError,
    EvaluationError,
    NlevoError,
    SolverError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyWarning",
    "DomainError",
    "EvaluationError",
    "NlevoError",
    "SolverError",
    "UsageError",
    "__version__",
]
