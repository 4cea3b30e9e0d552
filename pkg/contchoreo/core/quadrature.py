"""Quadrature for integrands with algebraic endpoint singularities.

Every singular integral in this package has the form ``∫₀¹ f(t) dt`` where ``f`` behaves
like ``|t − b|^{-α}`` (``b ∈ {0, 1}``, ``0 ≤ α < 1``) and is otherwise smooth. The
interval is split at ``t = 1/2`` and each half gets a rule which is exact for the singular
factor:

``gauss-jacobi``
    Gauss–Jacobi nodes for the weight ``t^{-α}``. The weights returned here are *product*
    weights (the Jacobi weight divided back out), so callers simply evaluate the full
    integrand at the nodes. Converges geometrically when ``f·t^α`` is analytic.

``graded-midpoint``
    Midpoint rule after the substitution ``t = u^q / 2`` with grading exponent
    ``q ≥ 2/(1 − α)``. Converges like ``O(n^{-2})``: doubling the nodes divides the error
    by four.
"""
from __future__ import annotations

import enum
from functools import lru_cache
import math
from typing import Callable, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, validator
from scipy.special import roots_jacobi

from ..conf import settings
from ..exceptions import ChoreoNonIntegrableError
from ..logging import getLogger

logger = getLogger("contchoreo.core.quadrature")

Integrand = Callable[[np.ndarray], np.ndarray]
#: One exponent for both ends, or ``(exponent at 0, exponent at 1)``.
Exponent = Union[float, tuple[float, float]]


class QuadratureScheme(str, enum.Enum):
    """Rules available for endpoint-singular integrands."""

    GAUSS_JACOBI = "gauss-jacobi"
    GRADED_MIDPOINT = "graded-midpoint"


#: Error reduction obtained by doubling the nodes of the graded-midpoint rule.
GRADED_MIDPOINT_DOUBLING_FACTOR = 4.0


class QuadratureSpec(BaseModel):
    """Describes how singular integrals are discretised."""

    #: The rule applied on each half interval.
    scheme: QuadratureScheme = Field(
        default_factory=lambda: QuadratureScheme(settings.QUADRATURE_SCHEME)
    )
    #: Nodes per half interval.
    nodes: int = Field(default_factory=lambda: settings.QUADRATURE_NODES)
    #: Grading exponent of the graded-midpoint rule. ``None`` selects ``2/(1 − α)``.
    grading: Optional[float] = None
    #: Relative change between ``nodes`` and ``nodes // 2`` which is reported as a failure
    #: to converge.
    divergence_tolerance: float = 1e-3
    #: Use compensated, fixed-order summation.
    reproducible: bool = Field(default_factory=lambda: settings.REPRODUCIBLE)

    @validator("nodes")
    def validate_nodes(cls, value: int):
        """Rules coarser than 8 nodes are never accurate enough."""
        if value < 8:
            raise ValueError(f"a quadrature needs at least 8 nodes (got {value})")
        return value

    @validator("grading")
    def validate_grading(cls, value: Optional[float]):
        """A grading exponent below one would cluster nodes away from the singularity."""
        if value is not None and value < 1:
            raise ValueError(f"grading exponent must be >= 1 (got {value})")
        return value

    class Config:
        """Specs are immutable so rules can be cached on them."""

        frozen = True

    def coarsened(self) -> "QuadratureSpec":
        """Return the same rule with half the nodes (never fewer than 8)."""
        return self.copy(update={"nodes": max(8, self.nodes // 2)})

    @property
    def doubling_factor(self) -> float:
        """Error reduction expected from doubling ``nodes``; ``inf`` for geometric rules."""
        if self.scheme == QuadratureScheme.GRADED_MIDPOINT:
            return GRADED_MIDPOINT_DOUBLING_FACTOR
        return math.inf

    def error_estimate(self, change: float) -> float:
        """Error of a value that moved by ``change`` relative to :meth:`coarsened`."""
        factor = self.doubling_factor
        if math.isinf(factor):
            return change
        return change / (factor - 1.0)

    @property
    def consistency_tolerance(self) -> float:
        """Agreement expected between two evaluations of one integral with this rule."""
        if self.scheme == QuadratureScheme.GAUSS_JACOBI:
            return 1e-6
        return self.divergence_tolerance

    def grading_for(self, alpha: float) -> float:
        """Grading exponent used for an endpoint exponent ``alpha``."""
        if self.grading is not None:
            return self.grading
        return max(1.0, 2.0 / (1.0 - alpha))


def _check_alpha(alpha: float):
    if not (0.0 <= alpha < 1.0) or math.isnan(alpha):
        raise ChoreoNonIntegrableError(
            f"endpoint exponent {alpha} is not integrable (need 0 <= alpha < 1)"
        )


@lru_cache(maxsize=128)
def _half_rule(
    scheme: QuadratureScheme, nodes: int, alpha: float, grading: float
) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/product weights on ``(0, 1/2]`` for integrands ``~ t^{-alpha}`` at 0."""
    if scheme == QuadratureScheme.GAUSS_JACOBI:
        # weight (1 - x)^0 (1 + x)^(-alpha) on [-1, 1]; t = (1 + x) / 4
        x, w = roots_jacobi(nodes, 0.0, -alpha)
        t = (1.0 + x) / 4.0
        weights = 4.0 ** (alpha - 1.0) * w * t**alpha
    else:
        u = (np.arange(nodes) + 0.5) / nodes
        t = 0.5 * u**grading
        weights = 0.5 * grading * u ** (grading - 1.0) / nodes

    t.setflags(write=False)
    weights.setflags(write=False)
    return t, weights


def half_interval_rule(
    quad: QuadratureSpec, alpha: float
) -> tuple[np.ndarray, np.ndarray]:
    """Return nodes and product weights on ``(0, 1/2]``.

    ``Σ w·f(t)`` approximates ``∫₀^{1/2} f`` for ``f`` singular like ``t^{-alpha}`` at 0.

    Args:
        quad: The quadrature description.
        alpha: Net endpoint exponent of the integrand.
    """
    _check_alpha(alpha)
    return _half_rule(quad.scheme, quad.nodes, float(alpha), quad.grading_for(alpha))


def _split(alpha: Exponent) -> tuple[float, float]:
    if isinstance(alpha, tuple):
        return float(alpha[0]), float(alpha[1])
    return float(alpha), float(alpha)


def interval_rule(
    quad: QuadratureSpec, alpha: Exponent, a: float = 0.0, b: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Return nodes and product weights on ``(a, b)`` singular at both endpoints.

    The interval is split at its midpoint; each half carries the endpoint rule mirrored
    towards its own singular end. A pair ``alpha`` gives the two ends different
    exponents (0 for a regular end).
    """
    alpha_a, alpha_b = _split(alpha)
    t_a, w_a = half_interval_rule(quad, alpha_a)
    t_b, w_b = half_interval_rule(quad, alpha_b)
    length = b - a
    left = a + length * t_a
    right = b - length * t_b
    nodes = np.concatenate([left, right[::-1]])
    weights = length * np.concatenate([w_a, w_b[::-1]])
    return nodes, weights


def quadrature_rule(quad: QuadratureSpec, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and product weights on ``(0, 1)`` singular like ``t^{-σ}`` at both ends."""
    return interval_rule(quad, sigma)


def one_sided_rule(
    quad: QuadratureSpec, alpha: float, a: float, b: float
) -> tuple[np.ndarray, np.ndarray]:
    """Return nodes and product weights on ``(a, b)`` singular only at ``a``.

    ``b`` may be smaller than ``a``; nodes are then mirrored and weights stay positive.
    """
    t, w = half_interval_rule(quad, alpha)
    length = b - a
    return a + 2.0 * length * t, 2.0 * abs(length) * w


@lru_cache(maxsize=64)
def gauss_legendre_panels(panels: int, nodes: int, a: float, b: float):
    """Composite Gauss–Legendre rule with ``panels`` equal panels on ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    centres = 0.5 * (edges[1:] + edges[:-1])
    t = (centres[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    t.setflags(write=False)
    weights.setflags(write=False)
    return t, weights


def reduce_sum(terms: np.ndarray, axis: int = -1, reproducible: bool = False):
    """Sum ``terms`` along ``axis``.

    With ``reproducible`` set every row is accumulated with :func:`math.fsum`, which is
    correctly rounded and therefore independent of summation order and threading.
    """
    terms = np.asarray(terms)
    if not reproducible:
        return np.sum(terms, axis=axis)

    if np.iscomplexobj(terms):
        return reduce_sum(terms.real, axis, True) + 1j * reduce_sum(terms.imag, axis, True)

    moved = np.moveaxis(terms, axis, -1)
    flat = moved.reshape(-1, moved.shape[-1])
    out = np.fromiter((math.fsum(row) for row in flat), dtype=float, count=flat.shape[0])
    out = out.reshape(moved.shape[:-1])
    return out if out.ndim else float(out)


def apply_rule(
    f: Integrand,
    nodes: np.ndarray,
    weights: np.ndarray,
    reproducible: bool = False,
):
    """Evaluate ``Σ w·f(t)``; ``f`` may return trailing vector dimensions."""
    values = np.asarray(f(nodes))
    # move the node axis last so vector valued integrands reduce elementwise
    terms = np.moveaxis(values, 0, -1) * weights
    return reduce_sum(terms, axis=-1, reproducible=reproducible)


def singular_integral(
    f: Integrand,
    alpha: Exponent,
    quad: Optional[QuadratureSpec] = None,
    *,
    check: bool = True,
):
    """Integrate ``f`` over ``(0, 1)`` where ``f ~ |t − b|^{-alpha}`` at ``b ∈ {0, 1}``.

    Args:
        f: Vectorised integrand. It is never evaluated at the endpoints.
        alpha: Net endpoint exponent (``f·|t − b|^alpha`` bounded), or a pair giving the
            exponents at 0 and 1 separately. Integrands with a
            compensating numerator are passed with their net exponent.
        quad: The quadrature description. Defaults to the configured rule.
        check: Compare against the rule with half the nodes and fail when the error
            estimated from the change exceeds ``quad.divergence_tolerance``.

    Raises:
        ChoreoNonIntegrableError: ``alpha`` is not in ``[0, 1)`` or the values do not
            settle under refinement.

    Returns:
        The integral (a float, or an array for vector valued integrands).
    """
    quad = quad or QuadratureSpec()
    nodes, weights = interval_rule(quad, alpha)
    value = apply_rule(f, nodes, weights, quad.reproducible)

    if check:
        coarse_quad = quad.coarsened()
        coarse_nodes, coarse_weights = interval_rule(coarse_quad, alpha)
        coarse = apply_rule(f, coarse_nodes, coarse_weights, quad.reproducible)
        change = float(np.max(np.abs(np.asarray(value) - np.asarray(coarse))))
        error = quad.error_estimate(change)
        scale = max(1.0, float(np.max(np.abs(value))))
        logger.debug(
            f"singular integral ({quad.scheme.value}, n={quad.nodes}, alpha={alpha}): "
            f"refinement change {change:.3e}, error estimate {error:.3e}"
        )
        if not np.all(np.isfinite(value)) or error > quad.divergence_tolerance * scale:
            raise ChoreoNonIntegrableError(
                f"integral does not settle under refinement: n={coarse_quad.nodes} -> "
                f"{quad.nodes} changed the value by {change:.3e} (alpha={alpha}); the "
                "singularity is probably stronger than declared"
            )

    return value
