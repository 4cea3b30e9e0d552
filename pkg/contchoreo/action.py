"""The action of a travelling wave loop and the chain of lower bounds beneath it.

For a zero mean loop ``y`` the action is

    𝒜(y) = v²/2 ∫‖ẏ‖² + 1/2 ∫∫ ‖y(s + t) − y(s)‖^{-σ} ds dt.

Jensen's inequality in ``s`` and Hölder's inequality in ``t`` bound the potential from
below, which gives ``𝒜 ≥ 𝒜̃ ≥ 𝒜̄ ≥ 2π²v²(1 + 2/σ)``. Each link is computed here so the
chain can be checked on any loop.
"""
from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel

from .conf import settings
from .continuum import Spectrum, compute_spectrum
from .core.loops import TWO_PI, FourierLoop, kinetic_integral, positions, xi
from .core.params import ModelParams, check_sigma
from .core.quadrature import QuadratureSpec, interval_rule, quadrature_rule, reduce_sum
from .exceptions import (
    ChoreoConsistencyError,
    ChoreoDomainError,
    ChoreoInfiniteActionError,
    ChoreoNonIntegrableError,
)
from .logging import getLogger

logger = getLogger("contchoreo.action")

#: Chord length below which two points of a loop are considered to collide.
COLLISION_FLOOR = 1e-9


class ActionBreakdown(BaseModel):
    """Every functional of the action chain, evaluated on one loop."""

    sigma: float
    K: int
    #: Outer grid used for the potential double integral.
    M: int
    kinetic: float
    potential: float
    #: ``kinetic + potential``.
    total: float
    #: Jensen bound: the potential replaced by ``(4π²v²/σ)(∫μξ)^{-σ/2}``.
    tilde: float
    #: ``2π²v² g(∫μξ)``.
    bar: float
    #: ``∫ μ ξ_y``.
    mu_xi: float
    #: ``2π²v²(1 + 2/σ)``.
    lower_bound: float

    def to_json(self) -> str:
        """Serialise every field as one JSON object with sorted keys."""
        return self.json(sort_keys=True)

    def chain_holds(self, slack: float = 1e-6) -> bool:
        """Whether ``total ≥ tilde ≥ bar ≥ lower_bound`` up to ``slack``."""
        return (
            self.total >= self.tilde - slack
            and self.tilde >= self.bar - slack
            and self.bar >= self.lower_bound - slack
        )


def g_scalar(u: float, sigma: float) -> float:
    """``g(u) = u + (2/σ)u^{-σ/2}``, minimised at ``u = 1`` with ``g(1) = 1 + 2/σ``."""
    sigma = check_sigma(sigma)
    if u <= 0.0:
        raise ChoreoDomainError(f"g is only defined for u > 0 (got {u})")
    return u + (2.0 / sigma) * u ** (-sigma / 2.0)


def circle_action(radius: float, params: ModelParams) -> float:
    """Action of the circle of radius ``R``: ``2π²v²R² + (c/2)R^{-σ}``."""
    if radius <= 0.0:
        raise ChoreoDomainError(f"radius must be positive (got {radius})")
    return (
        2.0 * math.pi**2 * params.v2 * radius**2
        + 0.5 * params.c * radius ** (-params.sigma)
    )


def _singular_rule(loop: FourierLoop, params: ModelParams, quad: QuadratureSpec):
    # the nodes must resolve the highest mode on each half interval
    if quad.nodes < 4 * loop.modes:
        quad = quad.copy(update={"nodes": 4 * loop.modes})
    return quadrature_rule(quad, params.sigma), quad


def _chord_field(loop: FourierLoop, M: int, t_nodes: np.ndarray):
    """``Δ(s_m, t_j) = y(s_m + t_j) − y(s_m)`` on the grid, with the phase tables."""
    k = loop.wavenumbers
    s = np.arange(M) / M
    e_s = np.exp(1j * TWO_PI * np.outer(s, k))
    e_t = np.exp(1j * TWO_PI * np.outer(t_nodes, k)) - 1.0
    chords = 2.0 * np.real(np.einsum("mk,tk,kd->mtd", e_s, e_t, loop.coeffs, optimize=True))
    return chords, e_t


def _check_grid(loop: FourierLoop, M: int):
    if M < 2 * loop.modes + 2:
        raise ChoreoDomainError(
            f"an outer grid of {M} points cannot resolve {loop.modes} modes"
        )


def _distances(chords: np.ndarray, M: int, t_nodes: np.ndarray) -> np.ndarray:
    dist = np.linalg.norm(chords, axis=-1)
    if np.min(dist) < COLLISION_FLOOR:
        m, j = np.unravel_index(np.argmin(dist), dist.shape)
        s = m / M
        r = (s + t_nodes[j]) % 1.0
        raise ChoreoInfiniteActionError(
            f"the loop collides with itself at s={s:.6g}, r={r:.6g}", pair=(s, r)
        )
    return dist


def potential_integral(
    loop: FourierLoop,
    params: ModelParams,
    M: Optional[int] = None,
    quad: Optional[QuadratureSpec] = None,
) -> float:
    """``1/2 ∫₀¹∫₀¹ ‖y(s + t) − y(s)‖^{-σ} dt ds``.

    The ``s`` integral uses the periodic trapezoid rule on ``M`` points, the ``t``
    integral the singular rule with net endpoint exponent ``σ``.

    Raises:
        ChoreoInfiniteActionError: two distinct points of the loop coincide.
    """
    M = M or settings.ACTION_GRID
    _check_grid(loop, M)
    (t_nodes, weights), quad = _singular_rule(loop, params, quad or QuadratureSpec())
    chords, _ = _chord_field(loop, M, t_nodes)
    dist = _distances(chords, M, t_nodes)
    inner = reduce_sum(dist ** (-params.sigma) * weights, -1, quad.reproducible)
    return 0.5 * float(reduce_sum(inner, -1, quad.reproducible)) / M


def kinetic_part(loop: FourierLoop, params: ModelParams) -> float:
    """``v²/2 ∫‖ẏ‖²``."""
    return 0.5 * params.v2 * kinetic_integral(loop)


def action_value(
    loop: FourierLoop,
    params: ModelParams,
    M: Optional[int] = None,
    quad: Optional[QuadratureSpec] = None,
) -> float:
    """``𝒜(y)`` without the lower bounds."""
    return kinetic_part(loop, params) + potential_integral(loop, params, M, quad)


def mu_xi_inner(
    loop: FourierLoop,
    spectrum: Spectrum,
    quad: Optional[QuadratureSpec] = None,
    check: bool = True,
) -> float:
    """``∫₀¹ μ ξ_y = Σ_k 2‖a_k‖² d_k``.

    With ``check`` the sum is compared against direct quadrature of ``μ ξ_y``.

    Raises:
        ChoreoConsistencyError: the two evaluations disagree.
    """
    spectrum.check_covers(loop)
    value = float(2.0 * np.sum(loop.mode_norms_squared * spectrum.d_k[: loop.modes]))
    if not check:
        return value

    params = spectrum.params
    (nodes, weights), quad = _singular_rule(loop, params, quad or QuadratureSpec())
    mu = (2.0 * np.sin(np.pi * nodes)) ** (-(2.0 + params.sigma)) / params.c
    direct = float(reduce_sum(mu * xi(loop, nodes) * weights, -1, quad.reproducible))
    if abs(direct - value) > quad.consistency_tolerance * max(1.0, abs(value)):
        raise ChoreoConsistencyError(
            f"∫μξ disagrees between coefficients ({value:.12g}) "
            f"and quadrature ({direct:.12g})"
        )
    return value


def kinetic_gap(loop: FourierLoop, spectrum: Spectrum) -> float:
    """``∫‖ẏ‖² − 4π²∫μξ_y``, nonnegative and zero exactly on first-mode loops."""
    spectrum.check_covers(loop)
    k = loop.wavenumbers
    terms = 2.0 * loop.mode_norms_squared * (TWO_PI**2) * (k**2 - spectrum.d_k[: loop.modes])
    return float(np.sum(terms))


def action(
    loop: FourierLoop,
    params: ModelParams,
    M: Optional[int] = None,
    quad: Optional[QuadratureSpec] = None,
    spectrum: Optional[Spectrum] = None,
) -> ActionBreakdown:
    """Evaluate the action and both of its lower bounds on ``loop``.

    Raises:
        ChoreoInfiniteActionError: the loop collides with itself.
        ChoreoConsistencyError: ``∫μξ`` is not reproduced by direct quadrature.
    """
    M = M or settings.ACTION_GRID
    quad = quad or QuadratureSpec()
    spectrum = spectrum or compute_spectrum(params, loop.modes, quad)
    spectrum.check_covers(loop, params)

    kinetic = kinetic_part(loop, params)
    potential = potential_integral(loop, params, M, quad)
    mu_xi = mu_xi_inner(loop, spectrum, quad)

    sigma, v2 = params.sigma, params.v2
    tilde = kinetic + (4.0 * math.pi**2 * v2 / sigma) * mu_xi ** (-sigma / 2.0)
    bar = 2.0 * math.pi**2 * v2 * g_scalar(mu_xi, sigma)
    breakdown = ActionBreakdown(
        sigma=sigma,
        K=loop.modes,
        M=M,
        kinetic=kinetic,
        potential=potential,
        total=kinetic + potential,
        tilde=tilde,
        bar=bar,
        mu_xi=mu_xi,
        lower_bound=params.predicted_minimum,
    )
    if not breakdown.chain_holds():
        logger.warning(f"action chain violated, quadrature too coarse? {breakdown}")
    return breakdown


def action_gradient(
    loop: FourierLoop,
    params: ModelParams,
    M: Optional[int] = None,
    quad: Optional[QuadratureSpec] = None,
    include_potential: bool = True,
) -> np.ndarray:
    """Gradient of :func:`action_value` with respect to the coefficients.

    Entry ``k`` is ``∂𝒜/∂Re a_k + i ∂𝒜/∂Im a_k``. The potential part is

        ∫∫ ∇φ(Δ(s, t)) e^{-2πiks}(e^{-2πikt} − 1) ds dt,   ∇φ(x) = −σ x ‖x‖^{-σ-2},

    whose ``s`` integral is a discrete Fourier transform over the outer grid.

    Returns:
        Complex array of the same shape as ``loop.coeffs``.
    """
    k = loop.wavenumbers
    gradient = 2.0 * params.v2 * ((TWO_PI * k) ** 2)[:, None] * loop.coeffs
    if not include_potential:
        return gradient

    M = M or settings.OPTIMIZER_GRID
    _check_grid(loop, M)
    (t_nodes, weights), quad = _singular_rule(loop, params, quad or QuadratureSpec())
    chords, e_t = _chord_field(loop, M, t_nodes)
    dist = _distances(chords, M, t_nodes)
    force = -params.sigma * chords * (dist ** (-params.sigma - 2.0))[..., None]
    transformed = np.fft.fft(force, axis=0)[1 : loop.modes + 1] / M
    factors = (weights[:, None] * np.conj(e_t)).T
    terms = transformed * factors[:, :, None]
    return gradient + reduce_sum(terms, 1, quad.reproducible)


def holder_phi(
    xi_func: Callable[[np.ndarray], np.ndarray],
    params: ModelParams,
    beta: Optional[float] = None,
    quad: Optional[QuadratureSpec] = None,
) -> float:
    """``Φ(ξ) = (∫μξ)^β ∫ξ^{-β}`` for a positive profile ``ξ`` on ``(0, 1)``.

    ``ξ`` is sampled on the singular quadrature nodes; it must vanish quadratically at
    both ends like every chord profile does. ``β`` defaults to ``σ/2``, for which the
    minimum ``c`` is attained at ``ξ ∝ 4 sin²(πt)``.

    Raises:
        ChoreoDomainError: ``ξ`` is not positive on the nodes.
        ChoreoNonIntegrableError: ``2β ≥ 1``.
    """
    quad = quad or QuadratureSpec()
    beta = params.sigma / 2.0 if beta is None else beta
    if beta <= 0.0:
        raise ChoreoDomainError(f"beta must be positive (got {beta})")
    if 2.0 * beta >= 1.0:
        raise ChoreoNonIntegrableError(f"ξ^(-β) is not integrable for beta={beta}")

    nodes, weights = quadrature_rule(quad, params.sigma)
    values = np.asarray(xi_func(nodes), dtype=float)
    if np.any(values <= 0.0):
        raise ChoreoDomainError("ξ must be positive inside (0, 1)")
    mu = (2.0 * np.sin(np.pi * nodes)) ** (-(2.0 + params.sigma)) / params.c
    mu_xi = float(reduce_sum(mu * values * weights, -1, quad.reproducible))

    inv_nodes, inv_weights = interval_rule(quad, 2.0 * beta)
    inv_values = np.asarray(xi_func(inv_nodes), dtype=float)
    if np.any(inv_values <= 0.0):
        raise ChoreoDomainError("ξ must be positive inside (0, 1)")
    inverse = float(reduce_sum(inv_values ** (-beta) * inv_weights, -1, quad.reproducible))
    return mu_xi**beta * inverse


def holder_bound(
    params: ModelParams, beta: Optional[float] = None, quad: Optional[QuadratureSpec] = None
) -> float:
    """``(∫μ^{β/(β+1)})^{β+1}``, the infimum of :func:`holder_phi`."""
    beta = params.sigma / 2.0 if beta is None else beta
    if beta <= 0.0:
        raise ChoreoDomainError(f"beta must be positive (got {beta})")
    exponent = beta / (beta + 1.0)
    alpha = (2.0 + params.sigma) * exponent
    if alpha >= 1.0:
        raise ChoreoNonIntegrableError(f"μ^{exponent:.3g} is not integrable")

    quad = quad or QuadratureSpec()
    nodes, weights = interval_rule(quad, alpha)
    mu = (2.0 * np.sin(np.pi * nodes)) ** (-(2.0 + params.sigma)) / params.c
    integral = float(reduce_sum(mu**exponent * weights, -1, quad.reproducible))
    return integral ** (beta + 1.0)


def jensen_gap(loop: FourierLoop, t: float, params: ModelParams, M: int = 256) -> float:
    """``∫‖y(s + t) − y(s)‖^{-σ} ds − ξ_y(t)^{-σ/2}``; nonnegative by convexity."""
    if not 0.0 < t < 1.0:
        raise ChoreoDomainError(f"t must lie in (0, 1) (got {t})")
    s = np.arange(M) / M
    dist = np.linalg.norm(positions(loop, s + t) - positions(loop, s), axis=-1)
    if np.min(dist) < COLLISION_FLOOR:
        raise ChoreoInfiniteActionError(f"the loop collides with itself at shift t={t}")
    return float(np.mean(dist ** (-params.sigma))) - xi(loop, t) ** (-params.sigma / 2.0)


__all__ = [
    "ActionBreakdown",
    "COLLISION_FLOOR",
    "action",
    "action_gradient",
    "action_value",
    "circle_action",
    "g_scalar",
    "holder_bound",
    "holder_phi",
    "jensen_gap",
    "kinetic_gap",
    "kinetic_part",
    "mu_xi_inner",
    "potential_integral",
]
