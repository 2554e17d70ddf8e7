"""Exception types shared across the toolkit.

Validation problems (bad arguments, mismatched grids, unresolvable
parameters) derive from ValueError; numerical failures at runtime
(non-convergence, quadrature breakdown, singular linearizations) derive
from RuntimeError.  The CLI maps the two families to distinct exit codes.
"""

from __future__ import annotations


class ExpOverflowError(OverflowError):
    """Exponential quadrature would overflow float64.

    Carries the offending maximum exponent so callers can renormalize
    (subtract the max and re-add it analytically).
    """

    def __init__(self, max_exponent: float):
        self.max_exponent = float(max_exponent)
        super().__init__(
            f"exp-overflow: maximum exponent {self.max_exponent:.6g} exceeds the "
            "float64 range; subtract the field maximum and use a log-sum-exp form"
        )


class UnresolvedBubbleError(ValueError):
    """Grid too coarse to resolve the concentration core of a peaked profile."""

    def __init__(self, n: int, required_n: int, sigma: float, alpha: float):
        self.n = int(n)
        self.required_n = int(required_n)
        super().__init__(
            f"under-resolution: n={n} gives {n * alpha / sigma:.2f} grid points across "
            f"the core half-width alpha/sigma={alpha / sigma:.3g}; need n >= {required_n}"
        )


class SingularHessianError(RuntimeError):
    """Linearized operator is (numerically) singular, e.g. at a bifurcation point."""

    def __init__(self, eigenvalue: float):
        self.eigenvalue = float(eigenvalue)
        super().__init__(
            f"singular Hessian: preconditioned second variation has eigenvalue "
            f"{self.eigenvalue:.3e} (bifurcation point?)"
        )


class ConvergenceError(RuntimeError):
    """An iterative procedure stalled before reaching its target."""


class QuadratureError(RuntimeError):
    """Adaptive 1-D quadrature failed to converge to the requested tolerance."""
