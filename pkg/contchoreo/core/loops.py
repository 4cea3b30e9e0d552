"""Loop representations.

A loop is a zero mean, 1-periodic curve in ``R^d`` stored by its positive Fourier
coefficients::

    y(t) = Σ_{k=1..K} a_k e^{2πikt} + conj(a_k) e^{-2πikt}

There is no ``k = 0`` coefficient, so the zero mean constraint holds by construction.
Samples on a uniform grid are derived from the coefficients, never the other way round,
except through the explicit projection :func:`fit_fourier`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Optional, Sequence, Union

import numpy as np

from ..exceptions import ChoreoDomainError
from ..logging import getLogger

logger = getLogger("contchoreo.core.loops")

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class FourierLoop:
    """A zero mean loop stored as ``K`` complex ``d``-vectors ``a_1 .. a_K``."""

    #: Complex coefficient array of shape ``(K, d)``; row ``k - 1`` holds ``a_k``.
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.ndim != 2:
            raise ChoreoDomainError(
                f"coefficients must have shape (K, d), got {coeffs.shape}"
            )
        if coeffs.shape[0] < 1:
            raise ChoreoDomainError("a loop needs at least one Fourier mode")
        if coeffs.shape[1] < 2:
            raise ChoreoDomainError(
                f"loops live in R^d with d >= 2 (got d={coeffs.shape[1]})"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ChoreoDomainError("coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def modes(self) -> int:
        """Number of stored modes ``K``."""
        return self.coeffs.shape[0]

    @property
    def dim(self) -> int:
        """Ambient dimension ``d``."""
        return self.coeffs.shape[1]

    @property
    def wavenumbers(self) -> np.ndarray:
        """``[1, 2, ..., K]``."""
        return np.arange(1, self.modes + 1)

    @property
    def mode_norms_squared(self) -> np.ndarray:
        """``‖a_k‖²`` (complex Euclidean norm) for every mode."""
        return np.sum(np.abs(self.coeffs) ** 2, axis=1)

    def scaled(self, factor: float) -> "FourierLoop":
        """Return ``factor · y``."""
        return FourierLoop(self.coeffs * factor)

    def shifted(self, t0: float) -> "FourierLoop":
        """Return ``t ↦ y(t + t0)``."""
        return FourierLoop(self.coeffs * np.exp(1j * TWO_PI * self.wavenumbers * t0)[:, None])

    def rotated(self, rotation: np.ndarray) -> "FourierLoop":
        """Return ``t ↦ R y(t)`` for a ``d × d`` matrix ``R``."""
        rotation = np.asarray(rotation, dtype=float)
        if rotation.shape != (self.dim, self.dim):
            raise ChoreoDomainError(
                f"rotation must be {self.dim}x{self.dim}, got {rotation.shape}"
            )
        return FourierLoop(self.coeffs @ rotation.T)

    def padded(self, modes: int) -> "FourierLoop":
        """Return the same loop carrying ``modes`` coefficients (extra ones are zero)."""
        if modes < self.modes:
            raise ChoreoDomainError(f"cannot pad {self.modes} modes down to {modes}")
        coeffs = np.zeros((modes, self.dim), dtype=complex)
        coeffs[: self.modes] = self.coeffs
        return FourierLoop(coeffs)

    def truncated(self, modes: int) -> "FourierLoop":
        """Return the loop keeping only its first ``modes`` harmonics."""
        if not 1 <= modes <= self.modes:
            raise ChoreoDomainError(f"cannot truncate {self.modes} modes to {modes}")
        return FourierLoop(self.coeffs[:modes].copy())

    def __add__(self, other: "FourierLoop") -> "FourierLoop":
        if not isinstance(other, FourierLoop):
            return NotImplemented
        if other.dim != self.dim:
            raise ChoreoDomainError(f"dimension mismatch: {self.dim} != {other.dim}")
        modes = max(self.modes, other.modes)
        return FourierLoop(self.padded(modes).coeffs + other.padded(modes).coeffs)


@dataclass(frozen=True, eq=False)
class SampledLoop:
    """A loop sampled at ``t_m = m / M``, ``m = 0 .. M − 1`` (``M`` even)."""

    #: Real array of shape ``(M, d)``.
    samples: np.ndarray
    times: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] < 2:
            raise ChoreoDomainError(f"samples must have shape (M, d>=2), got {samples.shape}")
        if samples.shape[0] < 2 or samples.shape[0] % 2:
            raise ChoreoDomainError(
                "a sampled loop needs an even number M >= 2 of samples "
                f"(got {samples.shape[0]})"
            )
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "times", np.arange(samples.shape[0]) / samples.shape[0])

    @property
    def size(self) -> int:
        """Number of samples ``M``."""
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        """Ambient dimension ``d``."""
        return self.samples.shape[1]

    def at(self, index: Union[int, np.ndarray]) -> np.ndarray:
        """Sample(s) at ``index`` taken modulo ``M``."""
        return self.samples[np.mod(index, self.size)]


def _phases(loop: FourierLoop, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.exp(1j * TWO_PI * np.multiply.outer(t, loop.wavenumbers))


def positions(loop: FourierLoop, t) -> np.ndarray:
    """``y(t)`` for scalar or array ``t``; the result has a trailing axis of size ``d``."""
    return 2.0 * np.real(_phases(loop, t) @ loop.coeffs)


def derivative(loop: FourierLoop, t, order: int = 1) -> np.ndarray:
    """The ``order``-th derivative of ``y`` at ``t`` (term by term)."""
    factor = (1j * TWO_PI * loop.wavenumbers) ** order
    return 2.0 * np.real(_phases(loop, t) @ (factor[:, None] * loop.coeffs))


def evaluate(loop: FourierLoop, t) -> tuple[np.ndarray, np.ndarray]:
    """Return position and velocity of ``loop`` at time(s) ``t``."""
    return positions(loop, t), derivative(loop, t, 1)


def acceleration(loop: FourierLoop, t) -> np.ndarray:
    """``ÿ(t)``."""
    return derivative(loop, t, 2)


#: Below this ``|φ|`` the Taylor series of ``(e^{iφ} − 1 − iφ)/φ²`` is summed instead.
_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 14


def _taylor_tail(phi: np.ndarray) -> np.ndarray:
    """``(e^{iφ} − 1 − iφ)/φ²`` without cancellation for small ``φ``."""
    phi = np.asarray(phi, dtype=float)
    out = np.empty(phi.shape, dtype=complex)
    small = np.abs(phi) < _SERIES_CUTOFF

    z = 1j * phi[small]
    # Σ_{m≥0} z^m/(m + 2)!, times z²/φ² = −1
    acc = np.full(z.shape, 1.0 / math.factorial(_SERIES_TERMS + 1), dtype=complex)
    for m in range(_SERIES_TERMS - 2, -1, -1):
        acc = acc * z + 1.0 / math.factorial(m + 2)
    out[small] = -acc

    large = phi[~small]
    out[~small] = (np.exp(1j * large) - 1.0 - 1j * large) / large**2
    return out


def chord_remainder(loop: FourierLoop, s, t) -> np.ndarray:
    """``(y(s + t) − y(s) − t ẏ(s)) / t²`` on the grid ``s × t``.

    Accurate down to ``t → 0``, where it tends to ``ÿ(s)/2``.

    Returns:
        ``(len(s), len(t), d)``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    omega = TWO_PI * loop.wavenumbers
    tail = _taylor_tail(np.outer(t, omega)) * omega**2
    e_s = _phases(loop, s)
    return 2.0 * np.real(np.einsum("bk,tk,kd->btd", e_s, tail, loop.coeffs, optimize=True))


def sample_loop(loop: FourierLoop, M: int) -> SampledLoop:
    """Sample ``loop`` on the uniform grid ``m / M``.

    Raises:
        ChoreoDomainError: ``M < 2`` (or odd).
    """
    if M < 2:
        raise ChoreoDomainError(f"need at least 2 samples (got {M})")
    if M < 2 * loop.modes + 2:
        logger.warning(
            f"{M} samples cannot represent {loop.modes} modes without aliasing "
            f"(need {2 * loop.modes + 2})"
        )
    return SampledLoop(positions(loop, np.arange(M) / M))


def fit_fourier(samples: SampledLoop, K: int) -> FourierLoop:
    """Project uniform samples onto the first ``K`` Fourier modes.

    The sample mean is removed first, which projects onto zero mean loops.
    """
    if samples.size < 2:
        raise ChoreoDomainError(f"need at least 2 samples (got {samples.size})")
    if K < 1:
        raise ChoreoDomainError(f"need at least one mode (got {K})")

    centred = samples.samples - samples.samples.mean(axis=0)
    M = samples.size
    if K < M // 2:
        spectrum = np.fft.fft(centred, axis=0) / M
        coeffs = spectrum[1 : K + 1]
    else:
        logger.warning(f"fitting {K} modes to {M} samples aliases the upper modes")
        k = np.arange(1, K + 1)
        basis = np.exp(-1j * TWO_PI * np.outer(k, np.arange(M)) / M)
        coeffs = basis @ centred / M
    return FourierLoop(coeffs)


def xi(loop: FourierLoop, t) -> Union[float, np.ndarray]:
    """Mean squared chord ``ξ_y(t) = ∫₀¹ ‖y(s + t) − y(s)‖² ds``.

    Closed form ``Σ_k 8‖a_k‖² sin²(πkt)``; symmetric under ``t ↦ 1 − t`` and zero at
    ``t = 0``.
    """
    t = np.asarray(t, dtype=float)
    sines = np.sin(np.pi * np.multiply.outer(t, loop.wavenumbers)) ** 2
    value = 8.0 * sines @ loop.mode_norms_squared
    return float(value) if np.ndim(value) == 0 else value


def xi_quadrature(loop: FourierLoop, t: float, M: int = 256) -> float:
    """``ξ_y(t)`` by the periodic trapezoid rule on ``M`` points (exact for ``M > 2K``)."""
    s = np.arange(M) / M
    chords = positions(loop, s + t) - positions(loop, s)
    return float(np.mean(np.sum(chords**2, axis=-1)))


def kinetic_integral(loop: FourierLoop) -> float:
    """``∫₀¹ ‖ẏ‖² = 2 Σ_k (2πk)² ‖a_k‖²``."""
    return float(2.0 * np.sum((TWO_PI * loop.wavenumbers) ** 2 * loop.mode_norms_squared))


def l2_norm_squared(loop: FourierLoop) -> float:
    """``∫₀¹ ‖y‖² = 2 Σ_k ‖a_k‖²``."""
    return float(2.0 * np.sum(loop.mode_norms_squared))


def poincare_ratio(loop: FourierLoop) -> float:
    """``‖y‖²_{L²} / ‖ẏ‖²_{L²}``; at most ``1/(4π²)`` on zero mean loops."""
    kinetic = kinetic_integral(loop)
    if kinetic == 0.0:
        return 0.0
    return l2_norm_squared(loop) / kinetic


def circle_loop(
    dim: int = 2,
    radius: float = 1.0,
    phase: float = 0.0,
    plane: Sequence[int] = (0, 1),
    modes: int = 1,
) -> FourierLoop:
    """``radius·(E₁ cos 2π(t + phase) + E₂ sin 2π(t + phase))`` in a coordinate plane."""
    if dim < 2:
        raise ChoreoDomainError(f"loops live in R^d with d >= 2 (got d={dim})")
    e1 = np.zeros(dim)
    e2 = np.zeros(dim)
    e1[plane[0]] = 1.0
    e2[plane[1]] = 1.0
    coeffs = np.zeros((modes, dim), dtype=complex)
    coeffs[0] = radius * (e1 - 1j * e2) / 2.0 * np.exp(1j * TWO_PI * phase)
    return FourierLoop(coeffs)


def ellipse_loop(axes: Sequence[float], dim: int = 2, modes: int = 1) -> FourierLoop:
    """``axes[0]·e₁ cos 2πt + axes[1]·e₂ sin 2πt``."""
    if dim < 2:
        raise ChoreoDomainError(f"loops live in R^d with d >= 2 (got d={dim})")
    coeffs = np.zeros((modes, dim), dtype=complex)
    coeffs[0, 0] = axes[0] / 2.0
    coeffs[0, 1] = -1j * axes[1] / 2.0
    return FourierLoop(coeffs)


def random_loop(
    modes: int,
    dim: int = 2,
    rng: Optional[np.random.Generator] = None,
    decay: float = 1.0,
    scale: float = 1.0,
) -> FourierLoop:
    """A loop with Gaussian coefficients whose amplitude falls like ``k^{-decay}``."""
    rng = rng if rng is not None else np.random.default_rng()
    k = np.arange(1, modes + 1)
    raw = rng.standard_normal((modes, dim)) + 1j * rng.standard_normal((modes, dim))
    return FourierLoop(scale * raw / (2.0 * k[:, None] ** decay))
