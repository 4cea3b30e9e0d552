"""Minimise the action over truncated Fourier loops.

The search direction is the coefficient gradient preconditioned by the inverse of the
kinetic Hessian ``2v²(2πk)²`` (the H¹ gradient), followed by a backtracking line search
with the sufficient decrease condition. Every minimiser found should be a unit circle.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, validator

from .action import action_gradient, action_value, mu_xi_inner
from .conf import settings
from .continuum import compute_spectrum
from .core.loops import TWO_PI, FourierLoop, random_loop
from .core.params import ModelParams, make_params
from .core.quadrature import QuadratureSpec
from .exceptions import ChoreoCollisionError, ChoreoDomainError, ChoreoException
from .logging import getLogger
from .tracing import get_tracer

logger = getLogger("contchoreo.minimize")


class OptimizeOptions(BaseModel):
    """Stopping rule and step policy of :func:`minimize_action`."""

    max_iterations: int = 500
    #: Stop once ``‖∇𝒜‖`` (coefficient gradient) drops below this.
    gradient_tolerance: float = 1e-6
    #: Sufficient decrease constant of the line search.
    armijo: float = 1e-4
    #: Step reduction per backtrack.
    shrink: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 40
    #: Restarts from a perturbed loop after a stalled line search.
    max_retries: int = 3
    #: Relative size of the restart perturbation.
    retry_perturbation: float = 1e-2
    #: Use the kinetic (H¹) metric; ``False`` follows the plain coefficient gradient.
    preconditioned: bool = True
    #: Outer grid of the potential double integral.
    grid: int = Field(default_factory=lambda: settings.OPTIMIZER_GRID)

    class Config:
        """Options are plain values."""

        extra = "forbid"
        frozen = True

    @validator("max_iterations", "max_backtracks", "grid")
    def validate_positive(cls, value: int, field):
        """Counts must be positive."""
        if value < 1:
            raise ValueError(f"{field.name} must be positive (got {value})")
        return value

    @validator("gradient_tolerance", "initial_step", "retry_perturbation")
    def validate_positive_real(cls, value: float, field):
        """Sizes must be positive."""
        if not value > 0.0:
            raise ValueError(f"{field.name} must be positive (got {value})")
        return value

    @validator("armijo", "shrink")
    def validate_fraction(cls, value: float, field):
        """Line search constants lie strictly between 0 and 1."""
        if not 0.0 < value < 1.0:
            raise ValueError(f"{field.name} must lie in (0, 1) (got {value})")
        return value


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    """Outcome of one optimisation run."""

    loop: FourierLoop
    value: float
    gradient_norm: float
    iterations: int
    converged: bool
    circle_distance: float
    sigma: float
    seed: Optional[int] = None
    retries: int = 0
    #: Action after every accepted step, starting with the initial loop.
    history: list[float] = field(default_factory=list, repr=False)


def circle_distance(loop: FourierLoop) -> float:
    """Distance to the orbit of the unit circle under phase shifts and rotations.

    Combines the relative tail ``√(Σ_{k≥2}‖a_k‖²)/‖a₁‖``, the defect ``|‖a₁‖² − 1/2|``
    and ``‖G − I‖_F`` for the Gram matrix ``G`` of ``E₁ = 2 Re a₁``, ``E₂ = −2 Im a₁``.
    Each term is unchanged by a phase shift, so no minimisation over phase is needed.
    """
    norms = loop.mode_norms_squared
    first = float(norms[0])
    if first == 0.0:
        return math.inf
    tail = math.sqrt(float(np.sum(norms[1:]))) / math.sqrt(first)
    norm_defect = abs(first - 0.5)
    frame = _frame(loop)
    ortho_defect = float(np.linalg.norm(frame @ frame.T - np.eye(2)))
    return math.sqrt(tail**2 + norm_defect**2 + ortho_defect**2)


def _frame(loop: FourierLoop) -> np.ndarray:
    a1 = loop.coeffs[0]
    return np.vstack([2.0 * a1.real, -2.0 * a1.imag])


def frame_singular_values(loop: FourierLoop) -> np.ndarray:
    """Singular values of the ``2 × d`` matrix ``(E₁; E₂)``; both are 1 on a unit circle."""
    return np.linalg.svd(_frame(loop), compute_uv=False)


def random_initial_loop(
    params: ModelParams,
    dim: int,
    K: int,
    seed: Optional[int] = None,
    quad: Optional[QuadratureSpec] = None,
    decay: float = 2.0,
) -> FourierLoop:
    """Random loop rescaled so that ``∫μξ_y = 1``."""
    if K < 1:
        raise ChoreoDomainError(f"need at least one mode (got {K})")
    loop = random_loop(K, dim, np.random.default_rng(seed), decay=decay)
    spectrum = compute_spectrum(params, K, quad)
    return loop.scaled(1.0 / math.sqrt(mu_xi_inner(loop, spectrum, check=False)))


@dataclass
class _Descent:
    loop: FourierLoop
    value: float
    gradient_norm: float = math.inf
    iterations: int = 0
    converged: bool = False
    stalled: bool = False
    history: list[float] = field(default_factory=list)


def _safe_value(loop: FourierLoop, params: ModelParams, grid: int, quad) -> float:
    try:
        return action_value(loop, params, grid, quad)
    except ChoreoCollisionError:
        return math.inf


def _descend(
    loop: FourierLoop,
    params: ModelParams,
    opts: OptimizeOptions,
    quad: QuadratureSpec,
    budget: int,
) -> _Descent:
    grid = opts.grid
    state = _Descent(loop=loop, value=action_value(loop, params, grid, quad))
    state.history.append(state.value)
    metric = 2.0 * params.v2 * (TWO_PI * loop.wavenumbers) ** 2
    step_size = opts.initial_step

    while state.iterations < budget:
        gradient = action_gradient(state.loop, params, grid, quad)
        state.gradient_norm = float(np.sqrt(np.sum(np.abs(gradient) ** 2)))
        if state.gradient_norm < opts.gradient_tolerance:
            state.converged = True
            break

        direction = -gradient / metric[:, None] if opts.preconditioned else -gradient
        slope = float(np.sum(np.real(np.conj(gradient) * direction)))

        step_size = min(opts.initial_step, 2.0 * step_size)
        for _ in range(opts.max_backtracks):
            trial = FourierLoop(state.loop.coeffs + step_size * direction)
            trial_value = _safe_value(trial, params, grid, quad)
            if trial_value <= state.value + opts.armijo * step_size * slope:
                break
            step_size *= opts.shrink
        else:
            state.stalled = True
            logger.debug(
                f"line search stalled at iteration {state.iterations} "
                f"(|g|={state.gradient_norm:.3e})"
            )
            break

        state.loop, state.value = trial, trial_value
        state.history.append(trial_value)
        state.iterations += 1
        logger.debug(
            f"iteration {state.iterations}: value={trial_value:.14g} "
            f"|g|={state.gradient_norm:.3e} step={step_size:.3g}"
        )

    return state


def minimize_action(
    params: ModelParams,
    dim: int,
    K: int,
    init: Union[FourierLoop, int, None] = None,
    opts: Optional[OptimizeOptions] = None,
    quad: Optional[QuadratureSpec] = None,
) -> MinimizeResult:
    """Minimise the action from ``init``.

    Args:
        params: Model constants.
        dim: Ambient dimension of the loop.
        K: Number of Fourier modes searched over. ``init`` is padded or cut to it.
        init: Starting loop, or a seed for :func:`random_initial_loop`.
        opts: Stopping rule and step policy.
        quad: Rule for the singular ``t`` integral.

    Returns:
        The final loop and its diagnostics. ``converged`` is ``False`` when the iteration
        cap was hit or the line search kept stalling after every retry.
    """
    opts = opts or OptimizeOptions()
    quad = quad or QuadratureSpec()
    seed = init if isinstance(init, int) else None
    if isinstance(init, FourierLoop):
        if init.dim != dim:
            raise ChoreoDomainError(f"initial loop lives in R^{init.dim}, not R^{dim}")
        if init.modes > K:
            logger.info(f"dropping harmonics {K + 1}..{init.modes} of the initial loop")
        loop = init.padded(K) if init.modes <= K else init.truncated(K)
    else:
        loop = random_initial_loop(params, dim, K, seed, quad)

    tracer = get_tracer()
    with tracer.start_as_current_span("minimize_action") as span:
        span.set_attribute("sigma", params.sigma)
        span.set_attribute("modes", K)
        if seed is not None:
            span.set_attribute("seed", seed)

        rng = np.random.default_rng(seed)
        history: list[float] = []
        iterations = 0
        retries = 0
        while True:
            try:
                state = _descend(loop, params, opts, quad, opts.max_iterations - iterations)
            except ChoreoCollisionError as exc:
                span.record_exception(exc)
                state = _Descent(loop=loop, value=math.inf, stalled=True)
            history.extend(state.history)
            iterations += state.iterations

            if not state.stalled or retries >= opts.max_retries:
                break
            retries += 1
            logger.warning(
                f"line search stalled (seed={seed}); restarting from a perturbed loop "
                f"({retries}/{opts.max_retries})"
            )
            first = float(state.loop.mode_norms_squared[0])
            scale = opts.retry_perturbation * math.sqrt(first)
            noise = rng.standard_normal((K, dim)) + 1j * rng.standard_normal((K, dim))
            loop = FourierLoop(state.loop.coeffs + scale * noise)

        result = MinimizeResult(
            loop=state.loop,
            value=state.value,
            gradient_norm=state.gradient_norm,
            iterations=iterations,
            converged=state.converged,
            circle_distance=circle_distance(state.loop),
            sigma=params.sigma,
            seed=seed,
            retries=retries,
            history=history,
        )
        span.set_attribute("converged", result.converged)
        span.set_attribute("value", result.value)

    log = logger.info if result.converged else logger.warning
    log(
        f"sigma={params.sigma} seed={seed}: value={result.value:.10g} "
        f"(predicted {params.predicted_minimum:.10g}) |g|={result.gradient_norm:.2e} "
        f"circle distance={result.circle_distance:.2e} after {iterations} iterations"
    )
    return result


@dataclass(frozen=True)
class ScanRow:
    """One ``(σ, seed)`` entry of a σ sweep."""

    sigma: float
    seed: int
    v2: float
    predicted_min: float
    achieved_min: float
    circle_distance: float
    iterations: int
    converged: bool
    error: Optional[str] = None
    result: Optional[MinimizeResult] = field(default=None, repr=False, compare=False)

    @property
    def gap(self) -> float:
        """``achieved_min − predicted_min``."""
        return self.achieved_min - self.predicted_min

    @classmethod
    def from_result(cls, params: ModelParams, result: MinimizeResult) -> "ScanRow":
        """Summarise a finished run."""
        return cls(
            sigma=params.sigma,
            seed=result.seed if result.seed is not None else -1,
            v2=params.v2,
            predicted_min=params.predicted_minimum,
            achieved_min=result.value,
            circle_distance=result.circle_distance,
            iterations=result.iterations,
            converged=result.converged,
            result=result,
        )

    @classmethod
    def failed(cls, sigma: float, seed: int, error: Exception) -> "ScanRow":
        """Record a run that raised."""
        return cls(
            sigma=sigma,
            seed=seed,
            v2=math.nan,
            predicted_min=math.nan,
            achieved_min=math.nan,
            circle_distance=math.nan,
            iterations=0,
            converged=False,
            error=f"{error.__class__.__name__}: {error}",
        )


def scan_sigma(
    sigmas: Sequence[float],
    dim: int,
    K: int,
    seeds: Sequence[int],
    opts: Optional[OptimizeOptions] = None,
    quad: Optional[QuadratureSpec] = None,
    threads: Optional[int] = None,
) -> list[ScanRow]:
    """Run :func:`minimize_action` for every ``(σ, seed)`` pair.

    Runs execute concurrently on ``threads`` workers (default ``settings.THREADS``).
    A run that raises is recorded as a failed row. Rows are ordered by ``(σ, seed)``.

    Raises:
        ChoreoDomainError: a σ outside ``(0, 1)``.
    """
    params = {sigma: make_params(sigma, quad) for sigma in sigmas}
    threads = threads or settings.THREADS

    def run(sigma: float, seed: int) -> ScanRow:
        try:
            result = minimize_action(params[sigma], dim, K, seed, opts, quad)
        except ChoreoException as exc:
            logger.error(f"sigma={sigma} seed={seed} failed: {exc}")
            return ScanRow.failed(sigma, seed, exc)
        return ScanRow.from_result(params[sigma], result)

    jobs = [(sigma, seed) for sigma in params for seed in seeds]
    tracer = get_tracer()
    with tracer.start_as_current_span("scan_sigma") as span:
        span.set_attribute("runs", len(jobs))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda job: run(*job), jobs))

    return sorted(rows, key=lambda row: (row.sigma, row.seed))


__all__ = [
    "MinimizeResult",
    "OptimizeOptions",
    "ScanRow",
    "circle_distance",
    "frame_singular_values",
    "minimize_action",
    "random_initial_loop",
    "scan_sigma",
]
