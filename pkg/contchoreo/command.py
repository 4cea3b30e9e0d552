"""Command line front end.

Every command reads its parameters from flags and, optionally, a JSON file given with
``--config``; keys from the file win over flags, flags win over defaults. Exit statuses:
0 success, 2 bad arguments, 3 quadrature or consistency failure, 4 collision, 5 an
optimisation did not converge.
"""
import argparse
from contextlib import contextmanager
import json
import math
import sys
from typing import Any, Callable, Iterator, Optional, TextIO

import numpy as np
from pydantic import BaseModel, Field, ValidationError, validator

from .action import action, kinetic_gap
from .conf import settings
from .continuum import compute_spectrum
from .core.loops import circle_loop
from .core.params import LAMBDA_1, check_sigma, make_params
from .core.quadrature import QuadratureSpec
from .exceptions import (
    ChoreoConsistencyError,
    ChoreoDomainError,
    ChoreoException,
    ChoreoNonConvergenceError,
)
from .logging import logger, set_log_level
from .minimize import OptimizeOptions, random_initial_loop, scan_sigma
from .nbody import (
    choreography_error,
    discrete_force_vs_pv,
    energy,
    momentum,
    ngon_state,
    omega_ngon,
    simulate,
)
from .tracing import get_tracer, initialize_tracer
from .utils.encoder import dumps
from .utils.formats import (
    CHAIN_COLUMNS,
    CONVERGE_COLUMNS,
    write_loop,
    write_scan,
    write_spectrum,
    write_table,
    write_trajectory,
)


class RunConfig(BaseModel):
    """Options shared by every command."""

    #: Compensated, fixed-order reductions.
    reproducible: bool = False
    #: Worker threads for sweeps. Defaults to ``CONTCHOREO_THREADS``.
    threads: Optional[int] = None
    #: Nodes per half interval of the singular quadrature.
    quadrature_nodes: Optional[int] = None

    class Config:
        """Unknown keys are an error."""

        extra = "forbid"

    @validator("threads")
    def validate_threads(cls, value: Optional[int]):
        """At least one worker."""
        if value is not None and value < 1:
            raise ValueError(f"threads must be >= 1 (got {value})")
        return value

    @validator("quadrature_nodes")
    def validate_quadrature_nodes(cls, value: Optional[int]):
        """Rules coarser than 8 nodes are never accurate enough."""
        if value is not None and value < 8:
            raise ValueError(f"quadrature_nodes must be >= 8 (got {value})")
        return value

    def quadrature(self) -> QuadratureSpec:
        """The quadrature described by these options."""
        update: dict[str, Any] = {"reproducible": self.reproducible or settings.REPRODUCIBLE}
        if self.quadrature_nodes is not None:
            update["nodes"] = self.quadrature_nodes
        return QuadratureSpec(**update)


class _SigmaConfig(RunConfig):
    sigma: float

    @validator("sigma")
    def validate_sigma(cls, value: float):
        """σ must lie in ``(0, 1)``."""
        return check_sigma(value)


class ConstantsConfig(_SigmaConfig):
    """``constants``."""

    json_output: Optional[str] = None


class SpectrumConfig(_SigmaConfig):
    """``spectrum``."""

    K: int = Field(default_factory=lambda: settings.FOURIER_MODES)
    output: Optional[str] = None

    @validator("K")
    def validate_modes(cls, value: int):
        """At least one mode."""
        if value < 1:
            raise ValueError(f"K must be >= 1 (got {value})")
        return value


class SimulateConfig(_SigmaConfig):
    """``simulate``."""

    N: int = 12
    periods: float = 1.0
    steps_per_period: int = 4096
    #: Overrides ``steps_per_period`` when given.
    dt: Optional[float] = None
    record_every: int = 4
    output: Optional[str] = None
    summary: Optional[str] = None

    @validator("N")
    def validate_bodies(cls, value: int):
        """At least two bodies."""
        if value < 2:
            raise ValueError(f"N must be >= 2 (got {value})")
        return value

    @validator("periods", "dt")
    def validate_positive(cls, value: Optional[float], field):
        """Durations are positive."""
        if value is not None and not value > 0.0:
            raise ValueError(f"{field.name} must be positive (got {value})")
        return value

    @validator("steps_per_period", "record_every")
    def validate_counts(cls, value: int, field):
        """Counts are positive."""
        if value < 1:
            raise ValueError(f"{field.name} must be >= 1 (got {value})")
        return value


class _OptimizeConfig(RunConfig):
    K: int = Field(default_factory=lambda: settings.FOURIER_MODES)
    dim: int = 2
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    preconditioned: bool = True
    grid: Optional[int] = None
    output: Optional[str] = None
    loop_output: Optional[str] = None

    @validator("K")
    def validate_modes(cls, value: int):
        """At least one mode."""
        if value < 1:
            raise ValueError(f"K must be >= 1 (got {value})")
        return value

    @validator("dim")
    def validate_dim(cls, value: int):
        """Loops live in ``R^d`` with ``d >= 2``."""
        if value < 2:
            raise ValueError(f"dim must be >= 2 (got {value})")
        return value

    def options(self) -> OptimizeOptions:
        """Optimiser options carried by this configuration."""
        values: dict[str, Any] = {
            "max_iterations": self.max_iterations,
            "gradient_tolerance": self.gradient_tolerance,
            "preconditioned": self.preconditioned,
        }
        if self.grid is not None:
            values["grid"] = self.grid
        return OptimizeOptions(**values)


class MinimizeConfig(_OptimizeConfig):
    """``minimize``."""

    sigma: float
    seeds: list[int] = list(range(20))

    @validator("sigma")
    def validate_sigma(cls, value: float):
        """σ must lie in ``(0, 1)``."""
        return check_sigma(value)


class ScanConfig(_OptimizeConfig):
    """``scan``."""

    sigmas: list[float] = [0.25, 0.5, 0.75]
    seeds: list[int] = list(range(5))

    @validator("sigmas", each_item=True)
    def validate_sigmas(cls, value: float):
        """Every σ must lie in ``(0, 1)``."""
        return check_sigma(value)


class ConvergeConfig(_SigmaConfig):
    """``converge``."""

    ladder: list[int] = [2**n for n in range(6, 13)]
    output: Optional[str] = None

    @validator("ladder", each_item=True)
    def validate_ladder(cls, value: int):
        """Every entry is a body count."""
        if value < 2:
            raise ValueError(f"N must be >= 2 (got {value})")
        return value


class ChainConfig(_SigmaConfig):
    """``chain``."""

    K: int = Field(default_factory=lambda: settings.FOURIER_MODES)
    dim: int = 2
    count: int = 100
    seed: int = 0
    grid: Optional[int] = None
    output: Optional[str] = None

    @validator("K", "count")
    def validate_positive(cls, value: int, field):
        """Counts are positive."""
        if value < 1:
            raise ValueError(f"{field.name} must be >= 1 (got {value})")
        return value


@contextmanager
def _output(path: Optional[str]) -> Iterator[TextIO]:
    """Open ``path`` for writing, or hand out stdout when there is none."""
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="") as stream:
        yield stream


def _cmd_constants(cfg: ConstantsConfig) -> int:
    params = make_params(cfg.sigma, cfg.quadrature())
    payload = dumps(
        {
            "sigma": params.sigma,
            "c": params.c,
            "v2": params.v2,
            "predicted_min": params.predicted_minimum,
            "lambda_1": LAMBDA_1,
        }
    )
    sys.stdout.write(payload)
    if cfg.json_output:
        with _output(cfg.json_output) as stream:
            stream.write(payload)
    return 0


def _cmd_spectrum(cfg: SpectrumConfig) -> int:
    quad = cfg.quadrature()
    spectrum = compute_spectrum(make_params(cfg.sigma, quad), cfg.K, quad)
    with _output(cfg.output) as stream:
        write_spectrum(stream, spectrum)

    k_min = int(np.argmin(spectrum.lambda_k)) + 1
    sys.stderr.write(f"lambda_min={spectrum.lambda_min!r} at k={k_min}\n")
    if k_min != 1 or not math.isclose(spectrum.lambda_min, LAMBDA_1, rel_tol=1e-8):
        raise ChoreoConsistencyError(
            f"the smallest eigenvalue should be lambda_1 = 4 pi^2, got "
            f"{spectrum.lambda_min!r} at k={k_min}"
        )
    return 0


def _cmd_simulate(cfg: SimulateConfig) -> int:
    quad = cfg.quadrature()
    params = make_params(cfg.sigma, quad)
    omega = omega_ngon(cfg.N, cfg.sigma)
    omega2 = omega**2
    period = 2.0 * math.pi / omega
    dt = cfg.dt if cfg.dt is not None else period / cfg.steps_per_period
    steps = max(1, round(cfg.periods * period / dt))

    start = ngon_state(cfg.N, cfg.sigma)
    trajectory = simulate(start, dt, steps, cfg.sigma, cfg.record_every, quad.reproducible)
    if cfg.output:
        with _output(cfg.output) as stream:
            write_trajectory(stream, trajectory)

    energies = np.array([energy(state, cfg.sigma) for state in trajectory.states])
    e0 = energies[0]
    tau = period / cfg.N
    summary = {
        "N": cfg.N,
        "sigma": cfg.sigma,
        "omega2": omega2,
        "omega2_limit": 4.0 * math.pi**2 * params.v2,
        "omega2_gap": abs(omega2 - 4.0 * math.pi**2 * params.v2),
        "period": period,
        "dt": dt,
        "steps": steps,
        "energy_drift": float(np.max(np.abs(energies - e0)) / abs(e0)),
        "momentum_drift": float(np.linalg.norm(momentum(trajectory.states[-1]))),
        "choreography_error": (
            choreography_error(trajectory, tau) if trajectory.span >= tau else None
        ),
    }
    payload = dumps(summary)
    sys.stdout.write(payload)
    if cfg.summary:
        with _output(cfg.summary) as stream:
            stream.write(payload)
    return 0


def _run_scan(cfg: _OptimizeConfig, sigmas: list[float], seeds: list[int]) -> int:
    quad = cfg.quadrature()
    rows = scan_sigma(sigmas, cfg.dim, cfg.K, seeds, cfg.options(), quad, cfg.threads)
    with _output(cfg.output) as stream:
        write_scan(stream, rows)

    finished = [row for row in rows if row.result is not None]
    if cfg.loop_output and finished:
        best = min(finished, key=lambda row: row.achieved_min)
        with _output(cfg.loop_output) as stream:
            write_loop(stream, best.result.loop)

    failed = [row for row in rows if not row.converged]
    if failed:
        raise ChoreoNonConvergenceError(
            f"{len(failed)} of {len(rows)} runs did not converge: "
            + ", ".join(f"(sigma={row.sigma}, seed={row.seed})" for row in failed)
        )
    return 0


def _cmd_minimize(cfg: MinimizeConfig) -> int:
    return _run_scan(cfg, [cfg.sigma], cfg.seeds)


def _cmd_scan(cfg: ScanConfig) -> int:
    return _run_scan(cfg, cfg.sigmas, cfg.seeds)


def _cmd_converge(cfg: ConvergeConfig) -> int:
    quad = cfg.quadrature()
    params = make_params(cfg.sigma, quad)
    loop = circle_loop()
    limit = 4.0 * math.pi**2 * params.v2

    rows = []
    for N in cfg.ladder:
        comparison = discrete_force_vs_pv(N, cfg.sigma, loop, 0.0, params, quad)
        omega2 = omega_ngon(N, cfg.sigma) ** 2
        rows.append([N, comparison.gap, omega2, abs(omega2 - limit)])
        logger.info(f"N={N}: force gap {comparison.gap:.6e}")

    with _output(cfg.output) as stream:
        write_table(stream, CONVERGE_COLUMNS, rows)
    return 0


def _cmd_chain(cfg: ChainConfig) -> int:
    quad = cfg.quadrature()
    params = make_params(cfg.sigma, quad)
    spectrum = compute_spectrum(params, cfg.K, quad)

    rows = []
    violations = []
    for seed in range(cfg.seed, cfg.seed + cfg.count):
        loop = random_initial_loop(params, cfg.dim, cfg.K, seed, quad)
        breakdown = action(loop, params, cfg.grid, quad, spectrum)
        gap = kinetic_gap(loop, spectrum)
        rows.append(
            [
                seed,
                breakdown.total,
                breakdown.tilde,
                breakdown.bar,
                breakdown.lower_bound,
                gap,
            ]
        )
        if not breakdown.chain_holds(slack=1e-8) or gap < -1e-8:
            violations.append(seed)

    with _output(cfg.output) as stream:
        write_table(stream, CHAIN_COLUMNS, rows)
    if violations:
        raise ChoreoConsistencyError(f"the action chain fails for seeds {violations}")
    return 0


def _load_config(path: Optional[str]) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise ChoreoDomainError(f"cannot read config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ChoreoDomainError(
            f"config file must hold a JSON object, found {type(data).__name__}"
        )
    return data


def _add_sigma(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--sigma",
        type=float,
        default=argparse.SUPPRESS,
        help="homogeneity exponent of the pair potential, 0 < sigma < 1",
    )


def build_parser() -> argparse.ArgumentParser:
    """The argument parser for every command."""
    parser = argparse.ArgumentParser(description="continuum choreography laboratory")
    parser.add_argument("-v", action="append_const", const="v", help="verbosity level")
    parser.add_argument(
        "--threads",
        type=int,
        default=argparse.SUPPRESS,
        help="worker threads for sweeps (default: CONTCHOREO_THREADS)",
    )
    parser.add_argument(
        "--reproducible",
        action="store_true",
        default=argparse.SUPPRESS,
        help="use compensated, fixed-order reductions",
    )
    parser.add_argument(
        "--quadrature-nodes",
        dest="quadrature_nodes",
        type=int,
        default=argparse.SUPPRESS,
        help="nodes per half interval of the singular quadrature",
    )
    parser.add_argument(
        "--config",
        default=None,
        help="JSON file with command parameters; its keys override flags",
    )

    subparser = parser.add_subparsers(dest="command")
    suppress: dict[str, Any] = {"default": argparse.SUPPRESS}

    constants_parser = subparser.add_parser(
        "constants", help="print c, v2, the predicted minimum and lambda_1"
    )
    _add_sigma(constants_parser)
    constants_parser.add_argument(
        "--json", dest="json_output", help="also write the payload to this file", **suppress
    )
    constants_parser.set_defaults(func=_cmd_constants, config_model=ConstantsConfig)

    spectrum_parser = subparser.add_parser(
        "spectrum", help="coefficients d_k and eigenvalues of the nonlocal operator"
    )
    _add_sigma(spectrum_parser)
    spectrum_parser.add_argument("-K", type=int, help="number of modes", **suppress)
    spectrum_parser.add_argument("--output", help="CSV file (default: stdout)", **suppress)
    spectrum_parser.set_defaults(func=_cmd_spectrum, config_model=SpectrumConfig)

    simulate_parser = subparser.add_parser(
        "simulate", help="integrate the rotating regular N-gon"
    )
    _add_sigma(simulate_parser)
    simulate_parser.add_argument("-N", type=int, help="number of bodies", **suppress)
    simulate_parser.add_argument("--periods", type=float, help="duration", **suppress)
    simulate_parser.add_argument(
        "--steps-per-period", dest="steps_per_period", type=int, help="time steps", **suppress
    )
    simulate_parser.add_argument("--dt", type=float, help="explicit time step", **suppress)
    simulate_parser.add_argument(
        "--record-every", dest="record_every", type=int, help="snapshot stride", **suppress
    )
    simulate_parser.add_argument("--output", help="trajectory CSV file", **suppress)
    simulate_parser.add_argument("--summary", help="summary JSON file", **suppress)
    simulate_parser.set_defaults(func=_cmd_simulate, config_model=SimulateConfig)

    def add_optimizer_flags(optimizer_parser: argparse.ArgumentParser):
        optimizer_parser.add_argument("-K", type=int, help="Fourier modes", **suppress)
        optimizer_parser.add_argument("--dim", type=int, help="ambient dimension", **suppress)
        optimizer_parser.add_argument(
            "--seeds", type=int, nargs="*", help="random initial loops", **suppress
        )
        optimizer_parser.add_argument(
            "--max-iterations", dest="max_iterations", type=int, **suppress
        )
        optimizer_parser.add_argument(
            "--gradient-tolerance", dest="gradient_tolerance", type=float, **suppress
        )
        optimizer_parser.add_argument(
            "--no-preconditioning",
            dest="preconditioned",
            action="store_false",
            help="follow the plain coefficient gradient",
            **suppress,
        )
        optimizer_parser.add_argument("--grid", type=int, help="outer grid size", **suppress)
        optimizer_parser.add_argument(
            "--output", help="scan CSV (default: stdout)", **suppress
        )
        optimizer_parser.add_argument(
            "--loop-output", dest="loop_output", help="best loop CSV", **suppress
        )

    minimize_parser = subparser.add_parser(
        "minimize", help="multistart minimisation of the action"
    )
    _add_sigma(minimize_parser)
    add_optimizer_flags(minimize_parser)
    minimize_parser.set_defaults(func=_cmd_minimize, config_model=MinimizeConfig)

    scan_parser = subparser.add_parser("scan", help="minimise over a list of sigmas")
    scan_parser.add_argument("--sigmas", type=float, nargs="+", **suppress)
    add_optimizer_flags(scan_parser)
    scan_parser.set_defaults(func=_cmd_scan, config_model=ScanConfig)

    converge_parser = subparser.add_parser(
        "converge", help="discrete force against the continuum force along an N ladder"
    )
    _add_sigma(converge_parser)
    converge_parser.add_argument("--ladder", type=int, nargs="+", **suppress)
    converge_parser.add_argument("--output", help="CSV file (default: stdout)", **suppress)
    converge_parser.set_defaults(func=_cmd_converge, config_model=ConvergeConfig)

    chain_parser = subparser.add_parser(
        "chain", help="evaluate the chain of lower bounds on random loops"
    )
    _add_sigma(chain_parser)
    chain_parser.add_argument("-K", type=int, help="Fourier modes", **suppress)
    chain_parser.add_argument("--dim", type=int, help="ambient dimension", **suppress)
    chain_parser.add_argument("--count", type=int, help="number of loops", **suppress)
    chain_parser.add_argument("--seed", type=int, help="first seed", **suppress)
    chain_parser.add_argument("--grid", type=int, help="outer grid size", **suppress)
    chain_parser.add_argument("--output", help="CSV file (default: stdout)", **suppress)
    chain_parser.set_defaults(func=_cmd_chain, config_model=ChainConfig)

    return parser


def run(argv: Optional[list[str]] = None) -> int:
    """Parse ``argv``, run the command and return its exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)

    log_level = 20  # Info
    if args.v:
        log_level = log_level - (len(args.v) * 10)
        if log_level < 10:
            log_level = 10  # DEBUG is the lowest
    set_log_level(log_level)

    if args.command is None:
        parser.print_help()
        return 1

    model = args.config_model
    func: Callable[[Any], int] = args.func
    try:
        values = {key: value for key, value in vars(args).items() if key in model.__fields__}
        values.update(_load_config(args.config))
        cfg = model(**values)
    except ValidationError as e:
        logger.error(f"invalid arguments for {args.command}:\n{e}")
        return 2
    except ChoreoException as e:
        logger.error(f"{e}")
        return e.exit_code

    tracer = get_tracer()
    with tracer.start_as_current_span(f"command.{args.command}") as span:
        try:
            return func(cfg)
        except ChoreoException as e:
            span.record_exception(e)
            logger.error(f"{e}")
            logger.debug(f"{e}", exc_info=e)
            return e.exit_code


def main():
    initialize_tracer()
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        sys.exit(0)
