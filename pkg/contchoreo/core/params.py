"""Model constants for the weak σ-homogeneous interaction."""
from __future__ import annotations

import json
import math
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, root_validator

from .quadrature import QuadratureSpec, singular_integral
from ..exceptions import ChoreoDomainError, ChoreoSingularityError
from ..logging import getLogger

logger = getLogger("contchoreo.core.params")

#: Smallest eigenvalue of the constrained eigenproblem, attained by the first mode.
LAMBDA_1 = 4.0 * math.pi**2


def check_sigma(sigma: float) -> float:
    """Validate the homogeneity exponent.

    Raises:
        ChoreoDomainError: ``sigma`` is not in the open interval ``(0, 1)``.
    """
    try:
        sigma = float(sigma)
    except (TypeError, ValueError):
        raise ChoreoDomainError(f"sigma must be a real number (got {sigma!r})") from None

    if not (0.0 < sigma < 1.0):
        raise ChoreoDomainError(f"sigma must lie in (0, 1) (got {sigma})")
    return sigma


class ModelParams(BaseModel):
    """The exponent σ and the two constants calibrated from it."""

    #: Homogeneity exponent of the pair potential ``‖x‖^{-σ}``.
    sigma: float
    #: ``∫₀¹ (2 sin πt)^{-σ} dt``.
    c: float
    #: Squared wave speed ``σ c / (8π²)``.
    v2: float

    class Config:
        """Parameters are values, not state."""

        frozen = True

    @root_validator(skip_on_failure=True)
    def validate_consistency(cls, values):
        """Check the three fields describe the same model."""
        sigma, c, v2 = values["sigma"], values["c"], values["v2"]
        check_sigma(sigma)
        if not math.isfinite(c) or c < 1.0 - 1e-12:
            raise ValueError(f"c must be finite and >= 1 (got {c})")
        expected = sigma * c / (8.0 * math.pi**2)
        if not math.isclose(v2, expected, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError(f"v2={v2} is inconsistent with sigma*c/(8 pi^2)={expected}")
        return values

    @property
    def wave_speed(self) -> float:
        """``v``, the speed of the travelling wave."""
        return math.sqrt(self.v2)

    @property
    def angular_frequency(self) -> float:
        """``ω = 2πv``, the rotation rate of the matching polygon."""
        return 2.0 * math.pi * self.wave_speed

    @property
    def predicted_minimum(self) -> float:
        """Minimum of the action over zero mean loops, ``2π²v²(1 + 2/σ)``."""
        return 2.0 * math.pi**2 * self.v2 * (1.0 + 2.0 / self.sigma)

    def to_json(self) -> str:
        """Serialise as ``{"sigma": ..., "c": ..., "v2": ...}``."""
        return json.dumps({"sigma": self.sigma, "c": self.c, "v2": self.v2})

    @classmethod
    def from_json(cls, raw: str) -> "ModelParams":
        """Load parameters written by :meth:`to_json`."""
        data = json.loads(raw)
        check_sigma(data.get("sigma"))
        return cls(**data)


def compute_c(sigma: float, quad: Optional[QuadratureSpec] = None) -> float:
    """Return ``∫₀¹ (2 sin πt)^{-σ} dt``.

    The integrand is singular like ``t^{-σ}`` at both ends and is integrated with the
    singular quadrature engine.

    Raises:
        ChoreoDomainError: ``sigma`` is outside ``(0, 1)``.
    """
    sigma = check_sigma(sigma)
    value = singular_integral(
        lambda t: (2.0 * np.sin(np.pi * t)) ** (-sigma), sigma, quad
    )
    return float(value)


def make_params(sigma: float, quad: Optional[QuadratureSpec] = None) -> ModelParams:
    """Build the model constants for ``sigma``."""
    sigma = check_sigma(sigma)
    c = compute_c(sigma, quad)
    v2 = sigma * c / (8.0 * math.pi**2)
    logger.debug(f"sigma={sigma}: c={c:.12g} v2={v2:.12g}")
    return ModelParams(sigma=sigma, c=c, v2=v2)


def xi_hat(t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """``|1 − e^{2πit}|² = 4 sin²(πt)``, the chord profile of the unit circle."""
    return 4.0 * np.sin(np.pi * np.asarray(t)) ** 2


def mu_weight(s: Union[float, np.ndarray], params: ModelParams):
    """The weight ``μ(s) = (2 sin πs)^{-(2+σ)} / c`` of the nonlocal operator.

    Raises:
        ChoreoSingularityError: any ``s`` lies outside the open interval ``(0, 1)``.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0.0) or np.any(s_arr >= 1.0):
        raise ChoreoSingularityError(
            "mu is singular at s = 0 and s = 1 and only defined in between"
        )
    value = (2.0 * np.sin(np.pi * s_arr)) ** (-(2.0 + params.sigma)) / params.c
    return float(value) if value.ndim == 0 else value
