"""Special functions and quadrature primitives shared by every other module.

Provides the modified Bessel function K1 (the kernel of the NIG density),
standard normal CDF/quantile, and fixed quadrature rules (Gauss-Legendre and
trapezoid) with an interval mapper.  All functions are pure and accept scalars
or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy import special as _special

from .errors import DomainError

__all__ = [
    "QuadratureKind",
    "QuadratureRule",
    "bessel_k1",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "integrate",
    "default_rule",
]


class QuadratureKind(str, Enum):
    GAUSS_LEGENDRE = "gauss-legendre"
    TRAPEZOID = "trapezoid"


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on the reference interval [-1, 1].

    Invariants: at least two nodes, strictly increasing nodes, strictly
    positive weights.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: QuadratureKind

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.ndim != 1 or nodes.size < 2 or nodes.size != weights.size:
            raise DomainError("quadrature rule needs >= 2 matched nodes/weights")
        if not np.all(np.diff(nodes) > 0):
            raise DomainError("quadrature nodes must be strictly increasing")
        if not np.all(weights > 0):
            raise DomainError("quadrature weights must be strictly positive")

    @classmethod
    def gauss_legendre(cls, n: int) -> "QuadratureRule":
        nodes, weights = np.polynomial.legendre.leggauss(n)
        return cls(nodes, weights, QuadratureKind.GAUSS_LEGENDRE)

    @classmethod
    def trapezoid(cls, n: int) -> "QuadratureRule":
        nodes = np.linspace(-1.0, 1.0, n)
        h = 2.0 / (n - 1)
        weights = np.full(n, h)
        weights[0] = weights[-1] = h / 2.0
        return cls(nodes, weights, QuadratureKind.TRAPEZOID)


_DEFAULT_RULE = QuadratureRule.gauss_legendre(256)
# Composite (panelled) integration uses a smaller per-panel rule; 64 nodes per
# panel resolves sharply peaked analytic integrands far better than one wide
# 256-node panel at equal cost.
_PANEL_RULE = QuadratureRule.gauss_legendre(64)


def default_rule() -> QuadratureRule:
    """The package default 256-node Gauss-Legendre rule."""
    return _DEFAULT_RULE


def bessel_k1(z):
    """Modified Bessel function of the second kind, index 1.

    Valid for z > 0.  Uses the exponentially scaled kernel so that values
    remain accurate to ~1e-13 relative up to the overflow threshold, beyond
    which the result underflows to 0 rather than erroring.
    """
    z_arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z_arr)) or np.any(z_arr <= 0.0):
        raise DomainError("bessel_k1 requires finite z > 0")
    out = _special.k1e(z_arr) * np.exp(-z_arr)
    return float(out) if np.isscalar(z) else out


def std_normal_pdf(x):
    x_arr = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x_arr * x_arr) / np.sqrt(2.0 * np.pi)
    return float(out) if np.isscalar(x) else out


def std_normal_cdf(x):
    """Standard normal CDF via the complementary error function."""
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)):
        raise DomainError("std_normal_cdf requires finite input")
    out = _special.ndtr(x_arr)
    return float(out) if np.isscalar(x) else out


def std_normal_quantile(u):
    """Inverse standard normal CDF.

    Rational approximation followed by one Halley refinement step against
    the CDF, guaranteeing |cdf(quantile(u)) - u| <= 1e-12 on (0, 1).
    """
    u_arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u_arr)) or np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise DomainError("std_normal_quantile requires u in (0, 1)")
    x = _special.ndtri(u_arr)
    pdf = std_normal_pdf(x)
    resid = _special.ndtr(x) - u_arr
    with np.errstate(divide="ignore", invalid="ignore"):
        newton = np.where(pdf > 0.0, resid / np.where(pdf > 0.0, pdf, 1.0), 0.0)
        x = x - newton / (1.0 + 0.5 * x * newton)
    return float(x) if np.isscalar(u) else x


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    interval: tuple[float, float],
    rule: QuadratureRule | None = None,
    panels: int = 1,
) -> float:
    """Fixed-rule quadrature of ``f`` over ``interval``.

    The rule is mapped affinely from [-1, 1] onto each of ``panels`` equal
    sub-intervals; the result is deterministic for a fixed rule.  ``f`` must
    accept a numpy array of abscissae.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise DomainError(f"integration interval must satisfy lo < hi, got [{lo}, {hi}]")
    if panels < 1:
        raise DomainError("panels must be >= 1")
    if rule is None:
        rule = _DEFAULT_RULE if panels == 1 else _PANEL_RULE

    edges = np.linspace(lo, hi, panels + 1)
    total = 0.0
    for left, right in zip(edges[:-1], edges[1:]):
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        x = mid + half * rule.nodes
        total += half * float(np.dot(rule.weights, np.asarray(f(x), dtype=float)))
    return float(total)
