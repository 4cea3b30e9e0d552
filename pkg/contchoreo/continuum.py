"""The continuum limit: principal value force, the nonlocal operator Δ^μ and its spectrum.

A loop ``y`` is a travelling wave solution of the continuous system when

    v² ÿ(s) = F(s),   F(s) = −PV ∫ σ (y(s) − y(r)) / ‖y(s) − y(r)‖^{2+σ} dr,

the integral running over one period around ``r = s``. :func:`pv_force` evaluates ``F``
by removing the odd leading term of the kernel near ``r = s`` (it integrates to zero over
a symmetric window) and integrating the ``|t|^{-σ}`` remainder with the singular rule.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .core.loops import (
    FourierLoop,
    acceleration,
    chord_remainder,
    circle_loop,
    derivative,
    kinetic_integral,
    positions,
)
from .core.params import LAMBDA_1, ModelParams
from .core.quadrature import (
    QuadratureSpec,
    gauss_legendre_panels,
    one_sided_rule,
    quadrature_rule,
    reduce_sum,
)
from .exceptions import (
    ChoreoConfigurationException,
    ChoreoConsistencyError,
    ChoreoDegenerateCurveError,
    ChoreoDomainError,
    ChoreoQuadratureError,
)
from .logging import getLogger

logger = getLogger("contchoreo.continuum")

#: Closest approach allowed between points of a loop that are not neighbours.
SELF_INTERSECTION_FLOOR = 1e-6
#: Smallest admissible speed ``‖ẏ‖`` where the force is evaluated.
REGULARITY_FLOOR = 1e-8
#: Gauss–Legendre nodes per panel away from the singular window.
_PANEL_NODES = 16
#: Force evaluation points processed at once.
_CHUNK = 64


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Diagonal coefficients ``d_k`` of Δ^μ and eigenvalues ``λ_k = 4π²k²/d_k``."""

    params: ModelParams
    d_k: np.ndarray
    lambda_k: np.ndarray

    @property
    def sigma(self) -> float:
        """The exponent the spectrum was computed for."""
        return self.params.sigma

    @property
    def K(self) -> int:
        """Number of modes."""
        return self.d_k.shape[0]

    @property
    def lambda_min(self) -> float:
        """Smallest eigenvalue."""
        return float(np.min(self.lambda_k))

    def check_covers(self, loop: FourierLoop, params: Optional[ModelParams] = None):
        """Ensure the spectrum can act on ``loop``.

        Raises:
            ChoreoConfigurationException: too few modes or another σ.
        """
        if self.K < loop.modes:
            raise ChoreoConfigurationException(
                f"spectrum has {self.K} modes but the loop carries {loop.modes}"
            )
        if params is not None and not math.isclose(params.sigma, self.sigma):
            raise ChoreoConfigurationException(
                f"spectrum was computed for sigma={self.sigma}, not {params.sigma}"
            )

    def rows(self) -> list[tuple[int, float, float]]:
        """``(k, d_k, λ_k)`` rows for serialisation."""
        return [
            (k, float(d), float(lam))
            for k, d, lam in zip(range(1, self.K + 1), self.d_k, self.lambda_k)
        ]


def _d_k_values(params: ModelParams, K: int, nodes: np.ndarray) -> np.ndarray:
    k = np.arange(1, K + 1)[:, None]
    numerator = 4.0 * np.sin(np.pi * k * nodes[None, :]) ** 2
    chord = 2.0 * np.sin(np.pi * nodes[None, :])
    return numerator / (params.c * chord ** (2.0 + params.sigma))


def compute_spectrum(
    params: ModelParams, K: int, quad: Optional[QuadratureSpec] = None
) -> Spectrum:
    """Compute ``d_1 .. d_K`` and the eigenvalues of ``−ÿ = λ Δ^μ y``.

    The integrand of ``d_k`` behaves like ``|s − b|^{-σ}`` at both ends.

    Raises:
        ChoreoDomainError: ``K < 1``.
        ChoreoQuadratureError: the coefficients do not settle under refinement.
    """
    if K < 1:
        raise ChoreoDomainError(f"need at least one mode (got {K})")
    return _compute_spectrum(params, K, quad or QuadratureSpec())


@lru_cache(maxsize=64)
def _compute_spectrum(params: ModelParams, K: int, quad: QuadratureSpec) -> Spectrum:
    # high modes oscillate K/2 times per half interval
    if quad.nodes < 4 * K:
        quad = quad.copy(update={"nodes": 4 * K})

    nodes, weights = quadrature_rule(quad, params.sigma)
    d_k = reduce_sum(_d_k_values(params, K, nodes) * weights, -1, quad.reproducible)

    coarse_nodes, coarse_weights = quadrature_rule(quad.coarsened(), params.sigma)
    coarse = reduce_sum(
        _d_k_values(params, K, coarse_nodes) * coarse_weights, -1, quad.reproducible
    )
    change = float(np.max(np.abs(d_k - coarse) / np.maximum(1.0, np.abs(d_k))))
    if change > quad.divergence_tolerance:
        raise ChoreoQuadratureError(
            f"d_k did not settle with {quad.nodes} nodes (relative change {change:.2e})"
        )

    if abs(d_k[0] - 1.0) > quad.consistency_tolerance:
        raise ChoreoConsistencyError(f"d_1 should equal 1, got {d_k[0]:.12g}")

    k = np.arange(1, K + 1)
    lambda_k = (2.0 * math.pi * k) ** 2 / d_k
    d_k.setflags(write=False)
    lambda_k.setflags(write=False)
    logger.debug(f"spectrum sigma={params.sigma} K={K}: d_2={d_k[1] if K > 1 else None}")
    return Spectrum(params=params, d_k=d_k, lambda_k=lambda_k)


def delta_mu_spectral(
    loop: FourierLoop, spectrum: Spectrum, params: Optional[ModelParams] = None
) -> FourierLoop:
    """Apply Δ^μ in coefficient space: ``a_k ↦ d_k a_k``."""
    spectrum.check_covers(loop, params)
    return FourierLoop(loop.coeffs * spectrum.d_k[: loop.modes, None])


def delta_mu_pointwise(
    loop: FourierLoop,
    t,
    params: ModelParams,
    quad: Optional[QuadratureSpec] = None,
) -> np.ndarray:
    """``Δ^μ y(t) = ∫₀¹ μ(s)(2y(t) − y(t + s) − y(t − s)) ds`` by direct quadrature."""
    quad = quad or QuadratureSpec()
    if quad.nodes < 4 * loop.modes:
        quad = quad.copy(update={"nodes": 4 * loop.modes})
    nodes, weights = quadrature_rule(quad, params.sigma)
    mu = (2.0 * np.sin(np.pi * nodes)) ** (-(2.0 + params.sigma)) / params.c

    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    centre = positions(loop, t_arr)[:, None, :]
    plus = positions(loop, t_arr[:, None] + nodes[None, :])
    minus = positions(loop, t_arr[:, None] - nodes[None, :])
    integrand = (2.0 * centre - plus - minus) * (mu * weights)[None, :, None]
    value = reduce_sum(integrand, 1, quad.reproducible)
    return value[0] if np.ndim(t) == 0 else value


def _outer_rule(K: int, window: float):
    panels = max(8, 4 * K)
    return gauss_legendre_panels(panels, _PANEL_NODES, window, 1.0 - window)


def _speed_bound(loop: FourierLoop) -> float:
    """Upper bound on ``‖ẏ‖`` from the coefficient norms."""
    norms = np.linalg.norm(loop.coeffs, axis=-1)
    return float(4.0 * math.pi * np.sum(loop.wavenumbers * norms))


def _check_crossings(
    loop: FourierLoop,
    block: np.ndarray,
    outer_t: np.ndarray,
    dist: np.ndarray,
    far: np.ndarray,
    spacing: float,
):
    """Raise when a far point of the loop comes within the floor of ``y(s)``.

    The node grid alone can step over a crossing, so the closest far node is
    refined by a bounded minimisation of the chord length around it.
    """
    far_t = outer_t[far]
    far_dist = dist[:, far]
    reach = spacing * _speed_bound(loop)
    for row, s in enumerate(block):
        col = int(np.argmin(far_dist[row]))
        best, where = float(far_dist[row, col]), float(far_t[col])
        if SELF_INTERSECTION_FLOOR <= best < reach:
            here = positions(loop, s)
            found = minimize_scalar(
                lambda t: float(np.linalg.norm(positions(loop, s + t) - here)),
                bounds=(where - spacing, where + spacing),
                method="bounded",
                options={"xatol": 1e-12},
            )
            if found.fun < best:
                best, where = float(found.fun), float(found.x)
        if best < SELF_INTERSECTION_FLOOR:
            raise ChoreoDegenerateCurveError(
                f"loop nearly intersects itself: s={s:.6g} and r={(s + where) % 1.0:.6g}"
            )


def _window_remainder(
    loop: FourierLoop,
    block: np.ndarray,
    t: np.ndarray,
    velocity: np.ndarray,
    speeds: np.ndarray,
    sigma: float,
) -> np.ndarray:
    """Kernel minus its odd leading part at offsets ``t`` near ``r = s``.

    With ``u = (y(s + t) − y(s))/t = ẏ + tR`` and ``h(x) = x‖x‖^{-(2+σ)}`` the
    difference is ``sign(t)|t|^{-1-σ}(h(u) − h(ẏ))``. Both ``u − ẏ = tR`` and
    ``‖u‖^{-(2+σ)} − ‖ẏ‖^{-(2+σ)}`` are formed without subtracting close numbers.
    """
    p = 2.0 + sigma
    v = velocity[:, None, :]
    du = t[None, :, None] * chord_remainder(loop, block, t)
    sq = speeds[:, None] ** 2
    # ‖u‖²/‖ẏ‖² − 1
    x = np.sum(du * (2.0 * v + du), axis=-1) / sq
    if np.any(x <= -1.0):
        raise ChoreoDegenerateCurveError("loop revisits a point inside the window")

    scale = sq ** (-0.5 * p)
    change = np.expm1(-0.5 * p * np.log1p(x))
    diff = du * (scale * (1.0 + change))[..., None] + v * (scale * change)[..., None]
    return (np.sign(t) * np.abs(t) ** (-1.0 - sigma))[None, :, None] * diff


def _check_regular(loop: FourierLoop, s: np.ndarray, speeds: np.ndarray):
    scale = max(1.0, math.sqrt(kinetic_integral(loop)))
    slow = speeds < REGULARITY_FLOOR * scale
    if np.any(slow):
        where = float(s[np.argmax(slow)])
        raise ChoreoDegenerateCurveError(
            f"loop is not regular at s={where:.6g} (speed {float(np.min(speeds)):.3e})"
        )


def pv_force(
    loop: FourierLoop,
    s,
    params: ModelParams,
    quad: Optional[QuadratureSpec] = None,
    window: Optional[float] = None,
) -> np.ndarray:
    """Principal value force ``F(s)`` of the continuous system.

    Args:
        loop: A regular simple closed curve.
        s: Parameter value(s) where the force is evaluated.
        params: Model constants.
        quad: Rule for the ``|t|^{-σ}`` remainder inside the window.
        window: Half width ``ε`` of the window around ``r = s``. Default ``1/(8K)``.

    Raises:
        ChoreoDegenerateCurveError: the speed vanishes at ``s`` or two points of the
            loop that are more than ``1/(4K)`` apart come closer than ``1e-6``.

    Returns:
        ``(d,)`` for scalar ``s``, otherwise ``(len(s), d)``.
    """
    quad = quad or QuadratureSpec()
    K = loop.modes
    window = window if window is not None else 1.0 / (8.0 * K)
    if not 0.0 < window < 0.5:
        raise ChoreoDomainError(f"window must lie in (0, 1/2) (got {window})")

    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    inner_t, inner_w = one_sided_rule(quad, params.sigma, 0.0, window)
    outer_t, outer_w = _outer_rule(K, window)
    sigma = params.sigma

    far = np.minimum(outer_t, 1.0 - outer_t) > 1.0 / (4.0 * K)
    spacing = (1.0 - 2.0 * window) / max(8, 4 * K)

    result = np.empty((s_arr.shape[0], loop.dim))
    for start in range(0, s_arr.shape[0], _CHUNK):
        block = s_arr[start : start + _CHUNK]
        here = positions(loop, block)
        velocity = derivative(loop, block, 1)
        speeds = np.linalg.norm(velocity, axis=-1)
        _check_regular(loop, block, speeds)

        # window: kernel minus its odd leading part, both sides of r = s
        inner = np.zeros((block.shape[0], loop.dim))
        for sign in (1.0, -1.0):
            t = sign * inner_t
            remainder = _window_remainder(loop, block, t, velocity, speeds, sigma)
            inner += reduce_sum(
                np.moveaxis(remainder * inner_w[None, :, None], 1, -1),
                -1,
                quad.reproducible,
            )

        chord = positions(loop, block[:, None] + outer_t[None, :]) - here[:, None, :]
        dist = np.linalg.norm(chord, axis=-1)
        _check_crossings(loop, block, outer_t, dist, far, spacing)
        kernel = chord / dist[..., None] ** (2.0 + sigma)
        outer = reduce_sum(
            np.moveaxis(kernel * outer_w[None, :, None], 1, -1), -1, quad.reproducible
        )

        result[start : start + block.shape[0]] = sigma * (inner + outer)

    return result[0] if np.ndim(s) == 0 else result


def pv_force_truncated(
    loop: FourierLoop,
    s: float,
    delta: float,
    params: ModelParams,
    nodes: int = 24,
) -> np.ndarray:
    """The excised integral ``−∫_{s+δ}^{1+s−δ} σ(y(s) − y(r))/‖y(s) − y(r)‖^{2+σ} dr``.

    No singular part is removed; panels are graded geometrically towards both cut
    points. Its limit as ``δ → 0`` is :func:`pv_force`.
    """
    if not 0.0 < delta < 0.25:
        raise ChoreoDomainError(f"delta must lie in (0, 1/4) (got {delta})")

    edges = [delta]
    while edges[-1] * 2.0 < 0.5:
        edges.append(edges[-1] * 2.0)
    edges.append(0.5)
    x, w = np.polynomial.legendre.leggauss(nodes)
    t_parts, w_parts = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        t_parts.append(0.5 * (a + b) + 0.5 * (b - a) * x)
        w_parts.append(0.5 * (b - a) * w)
    half_t = np.concatenate(t_parts)
    half_w = np.concatenate(w_parts)
    t = np.concatenate([half_t, 1.0 - half_t])
    weights = np.concatenate([half_w, half_w])

    here = positions(loop, s)
    chord = positions(loop, s + t) - here
    dist = np.linalg.norm(chord, axis=-1)
    kernel = chord / dist[:, None] ** (2.0 + params.sigma)
    return params.sigma * np.sum(kernel * weights[:, None], axis=0)


def _residual(
    loop: FourierLoop,
    params: ModelParams,
    quad: Optional[QuadratureSpec],
    M: int,
) -> float:
    s = np.arange(M) / M
    lhs = params.v2 * acceleration(loop, s)
    rhs = pv_force(loop, s, params, quad)
    return float(np.max(np.linalg.norm(lhs - rhs, axis=-1)))


def circle_residual(
    params: ModelParams, quad: Optional[QuadratureSpec] = None, M: int = 64
) -> float:
    """``max_s ‖v² ẍ(s) − F(s)‖`` for the unit circle ``x(s) = e^{2πis}``."""
    return _residual(circle_loop(), params, quad, M)


def el_residual(
    loop: FourierLoop,
    params: ModelParams,
    quad: Optional[QuadratureSpec] = None,
    M: Optional[int] = None,
) -> float:
    """Euler–Lagrange residual ``max_t ‖v² ÿ(t) − F(t)‖`` on ``max(64, 8K)`` points."""
    M = M if M is not None else max(64, 8 * loop.modes)
    return _residual(loop, params, quad, M)


def pure_mode(k: int, dim: int = 2) -> FourierLoop:
    """``cos(2πkt) e₁ + sin(2πkt) e₂``."""
    if k < 1:
        raise ChoreoDomainError(f"mode number must be positive (got {k})")
    coeffs = np.zeros((k, dim), dtype=complex)
    coeffs[k - 1, 0] = 0.5
    coeffs[k - 1, 1] = -0.5j
    return FourierLoop(coeffs)


def eigen_residual(
    k: int,
    spectrum: Spectrum,
    quad: Optional[QuadratureSpec] = None,
    M: int = 64,
) -> float:
    """``max_t ‖−ÿ(t) − λ_k Δ^μ y(t)‖`` for the pure mode ``k``."""
    if k > spectrum.K:
        raise ChoreoConfigurationException(f"spectrum has no mode {k}")
    loop = pure_mode(k)
    t = np.arange(M) / M
    lhs = -acceleration(loop, t)
    rhs = spectrum.lambda_k[k - 1] * delta_mu_pointwise(loop, t, spectrum.params, quad)
    return float(np.max(np.linalg.norm(lhs - rhs, axis=-1)))


def rayleigh_quotient(loop: FourierLoop, spectrum: Spectrum) -> float:
    """``∫‖ẏ‖² / ∫Δ^μ y·y``; never below ``4π²`` and equal to it only on mode one."""
    spectrum.check_covers(loop)
    denominator = float(2.0 * np.sum(loop.mode_norms_squared * spectrum.d_k[: loop.modes]))
    if denominator == 0.0:
        raise ChoreoDomainError("the Rayleigh quotient is undefined for the zero loop")
    return kinetic_integral(loop) / denominator


__all__ = [
    "LAMBDA_1",
    "Spectrum",
    "circle_residual",
    "compute_spectrum",
    "delta_mu_pointwise",
    "delta_mu_spectral",
    "eigen_residual",
    "el_residual",
    "pure_mode",
    "pv_force",
    "pv_force_truncated",
    "rayleigh_quotient",
]
