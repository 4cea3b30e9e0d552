"""Discrete N-body dynamics under the pair potential ``m_i m_j ‖q_i − q_j‖^{-σ}``.

Used to check the continuum limit: the rotating regular N-gon, the velocity Verlet
integrator, and the discrete action of the N-body trajectory built from a loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import trapezoid

from .continuum import pv_force
from .core.loops import FourierLoop, derivative, positions
from .core.params import ModelParams, check_sigma, make_params
from .core.quadrature import QuadratureSpec, reduce_sum
from .exceptions import (
    ChoreoCollisionError,
    ChoreoDomainError,
    ChoreoInfiniteActionError,
)
from .logging import getLogger

logger = getLogger("contchoreo.nbody")

#: Separation below which two bodies are considered to collide.
COLLISION_FLOOR = 1e-9
#: Bodies processed per block when forming pairwise differences.
_BLOCK = 512


@dataclass(frozen=True, eq=False)
class NBodyState:
    """Positions, velocities and masses of ``N`` bodies in ``R^d`` at one instant."""

    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        q = np.array(self.positions, dtype=float)
        p = np.array(self.velocities, dtype=float)
        m = np.array(self.masses, dtype=float)
        if q.ndim != 2 or q.shape[0] < 2 or q.shape[1] < 2:
            raise ChoreoDomainError(f"positions must have shape (N>=2, d>=2), got {q.shape}")
        if p.shape != q.shape:
            raise ChoreoDomainError(f"velocities {p.shape} do not match positions {q.shape}")
        if m.shape != (q.shape[0],) or np.any(m <= 0.0):
            raise ChoreoDomainError("one positive mass per body is required")
        for array in (q, p, m):
            array.setflags(write=False)
        object.__setattr__(self, "positions", q)
        object.__setattr__(self, "velocities", p)
        object.__setattr__(self, "masses", m)

    @property
    def N(self) -> int:
        """Number of bodies."""
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        """Ambient dimension."""
        return self.positions.shape[1]

    def replace(self, **changes) -> "NBodyState":
        """Copy with some fields replaced."""
        values = {
            "positions": self.positions,
            "velocities": self.velocities,
            "masses": self.masses,
            "time": self.time,
        }
        values.update(changes)
        return NBodyState(**values)

    def recentred(self) -> "NBodyState":
        """Move to the frame where centre of mass and total momentum vanish."""
        total = self.masses.sum()
        return self.replace(
            positions=self.positions - center_of_mass(self),
            velocities=self.velocities - momentum(self) / total,
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots of a state at uniformly spaced times."""

    states: list[NBodyState]
    times: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.states) < 1:
            raise ChoreoDomainError("a trajectory needs at least one snapshot")
        times = np.array([state.time for state in self.states])
        if len(times) > 2:
            steps = np.diff(times)
            if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
                raise ChoreoDomainError("trajectory snapshots must be uniformly spaced")
        object.__setattr__(self, "times", times)

    @property
    def span(self) -> float:
        """Time between the first and last snapshot."""
        return float(self.times[-1] - self.times[0])

    @property
    def positions(self) -> np.ndarray:
        """``(snapshots, N, d)``."""
        return np.stack([state.positions for state in self.states])

    @property
    def velocities(self) -> np.ndarray:
        """``(snapshots, N, d)``."""
        return np.stack([state.velocities for state in self.states])


def _differences(q: np.ndarray, rows: slice) -> tuple[np.ndarray, np.ndarray]:
    diff = q[rows, None, :] - q[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    # a body never interacts with itself
    idx = np.arange(dist.shape[0])
    dist[idx, idx + rows.start] = np.inf
    return diff, dist


def _check_separation(dist: np.ndarray, offset: int):
    if np.min(dist) < COLLISION_FLOOR:
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        pair = (int(i + offset), int(j))
        raise ChoreoCollisionError(
            f"bodies {pair[0]} and {pair[1]} collide (distance {dist[i, j]:.3e})", pair=pair
        )


def accelerations(state: NBodyState, sigma: float, reproducible: bool = False) -> np.ndarray:
    """``a_i = −Σ_{j≠i} σ m_j (q_i − q_j)/‖q_i − q_j‖^{2+σ}``.

    Raises:
        ChoreoCollisionError: two bodies are closer than ``1e-9``; ``pair`` names them.
    """
    sigma = check_sigma(sigma)
    q = state.positions
    result = np.empty_like(q)
    for start in range(0, state.N, _BLOCK):
        rows = slice(start, min(start + _BLOCK, state.N))
        diff, dist = _differences(q, rows)
        _check_separation(dist, start)
        terms = diff * (state.masses / dist ** (2.0 + sigma))[..., None]
        result[rows] = -sigma * reduce_sum(np.moveaxis(terms, 1, -1), -1, reproducible)
    return result


def potential(state: NBodyState, sigma: float) -> float:
    """``U = Σ_{i<j} m_i m_j ‖q_i − q_j‖^{-σ}``."""
    sigma = check_sigma(sigma)
    total = 0.0
    for start in range(0, state.N, _BLOCK):
        rows = slice(start, min(start + _BLOCK, state.N))
        _, dist = _differences(state.positions, rows)
        _check_separation(dist, start)
        pairs = state.masses[rows, None] * state.masses[None, :] * dist ** (-sigma)
        total += float(np.sum(pairs))
    # every pair was counted twice
    return 0.5 * total


def kinetic_energy(state: NBodyState) -> float:
    """``Σ m_i ‖q̇_i‖² / 2``."""
    return 0.5 * float(np.sum(state.masses * np.sum(state.velocities**2, axis=-1)))


def energy(state: NBodyState, sigma: float) -> float:
    """Conserved energy ``K − U`` (the interaction is attractive)."""
    return kinetic_energy(state) - potential(state, sigma)


def momentum(state: NBodyState) -> np.ndarray:
    """Total momentum ``Σ m_i q̇_i``."""
    return state.masses @ state.velocities


def center_of_mass(state: NBodyState) -> np.ndarray:
    """``Σ m_i q_i / Σ m_i``."""
    return state.masses @ state.positions / state.masses.sum()


def omega_ngon(N: int, sigma: float) -> float:
    """Angular velocity ``ω`` of the rotating unit N-gon with masses ``1/N``.

    ``ω²(N) = σ/(2N) Σ_{j=1}^{N−1} (2 sin(πj/N))^{-σ}``; ``ω²`` tends to ``σc/2`` as
    ``N → ∞``.
    """
    sigma = check_sigma(sigma)
    if N < 2:
        raise ChoreoDomainError(f"a polygon needs at least two bodies (got {N})")
    j = np.arange(1, N)
    omega2 = sigma / (2.0 * N) * float(np.sum((2.0 * np.sin(np.pi * j / N)) ** (-sigma)))
    return math.sqrt(omega2)


def ngon_state(N: int, sigma: float, dim: int = 2) -> NBodyState:
    """Rigidly rotating regular N-gon on the unit circle with masses ``1/N``.

    Raises:
        ChoreoDomainError: ``dim`` is not 2.
    """
    if dim != 2:
        raise ChoreoDomainError(
            f"the rotating polygon is only set up in the plane (got d={dim})"
        )
    omega = omega_ngon(N, sigma)
    angles = 2.0 * math.pi * np.arange(N) / N
    q = np.column_stack([np.cos(angles), np.sin(angles)])
    p = omega * np.column_stack([-q[:, 1], q[:, 0]])
    return NBodyState(positions=q, velocities=p, masses=np.full(N, 1.0 / N))


def _check_dt(dt: float):
    if not math.isfinite(dt) or dt == 0.0:
        raise ChoreoDomainError(f"time step must be finite and nonzero (got {dt})")


def _verlet(
    state: NBodyState,
    dt: float,
    sigma: float,
    accel: np.ndarray,
    reproducible: bool,
) -> tuple[NBodyState, np.ndarray]:
    half = state.velocities + 0.5 * dt * accel
    moved = state.replace(positions=state.positions + dt * half, time=state.time + dt)
    new_accel = accelerations(moved, sigma, reproducible)
    return moved.replace(velocities=half + 0.5 * dt * new_accel), new_accel


def step(
    state: NBodyState, dt: float, sigma: float, reproducible: bool = False
) -> NBodyState:
    """One velocity Verlet step. A negative ``dt`` runs time backwards."""
    _check_dt(dt)
    accel = accelerations(state, sigma, reproducible)
    return _verlet(state, dt, sigma, accel, reproducible)[0]


def simulate(
    state: NBodyState,
    dt: float,
    steps: int,
    sigma: float,
    record_every: int = 1,
    reproducible: bool = False,
) -> Trajectory:
    """Integrate ``steps`` Verlet steps, keeping every ``record_every``-th state."""
    _check_dt(dt)
    if steps < 0 or record_every < 1:
        raise ChoreoDomainError("steps must be >= 0 and record_every >= 1")

    accel = accelerations(state, sigma, reproducible)
    states = [state]
    for n in range(1, steps + 1):
        state, accel = _verlet(state, dt, sigma, accel, reproducible)
        if n % record_every == 0:
            states.append(state)
    return Trajectory(states)


def _interpolate(times: np.ndarray, values: np.ndarray, at: np.ndarray) -> np.ndarray:
    """Linear interpolation of ``values[snapshot, ...]`` at times ``at``."""
    index = np.clip(np.searchsorted(times, at, side="right") - 1, 0, len(times) - 2)
    frac = (at - times[index]) / (times[index + 1] - times[index])
    frac = frac.reshape(frac.shape + (1,) * (values.ndim - 1))
    return (1.0 - frac) * values[index] + frac * values[index + 1]


def choreography_error(trajectory: Trajectory, tau: float) -> float:
    """``max_t max_i ‖q_{i+1}(t) − q_i(t + τ)‖`` over the recorded times with ``t + τ``
    still inside the trajectory. Positions between snapshots are linearly interpolated.

    Raises:
        ChoreoDomainError: the trajectory is shorter than ``τ``.
    """
    if len(trajectory.states) < 2 or trajectory.span < tau - 1e-12:
        raise ChoreoDomainError(
            f"trajectory spans {trajectory.span:.6g}, shorter than tau={tau:.6g}"
        )
    times = trajectory.times
    q = trajectory.positions
    usable = times + tau <= times[-1] + 1e-12
    shifted = _interpolate(times, q, np.minimum(times[usable] + tau, times[-1]))
    following = np.roll(q[usable], -1, axis=1)
    return float(np.max(np.linalg.norm(following - shifted, axis=-1)))


def discrete_action(trajectory: Trajectory, sigma: float) -> float:
    """``∫₀¹ (K + U) dt`` by the trapezoid rule over the snapshots.

    Raises:
        ChoreoDomainError: the trajectory does not span exactly one unit of time.
        ChoreoInfiniteActionError: two bodies collide along the way.
    """
    if len(trajectory.states) < 2 or abs(trajectory.span - 1.0) > 1e-9:
        raise ChoreoDomainError(f"the action is taken over [0, 1], not {trajectory.span:.6g}")
    try:
        lagrangian = [kinetic_energy(s) + potential(s, sigma) for s in trajectory.states]
    except ChoreoCollisionError as exc:
        raise ChoreoInfiniteActionError(str(exc), pair=exc.pair) from exc
    return float(trapezoid(lagrangian, trajectory.times))


def wave_trajectory(loop: FourierLoop, N: int, v: float, samples: int = 256) -> Trajectory:
    """N bodies of mass ``1/N`` running along ``loop``: ``q_i(t) = y(i/N − vt)``."""
    if N < 2:
        raise ChoreoDomainError(f"need at least two bodies (got {N})")
    if samples < 2:
        raise ChoreoDomainError(f"need at least two snapshots (got {samples})")
    offsets = np.arange(N) / N
    masses = np.full(N, 1.0 / N)
    states = []
    for t in np.linspace(0.0, 1.0, samples + 1):
        s = offsets - v * t
        states.append(
            NBodyState(
                positions=positions(loop, s),
                velocities=-v * derivative(loop, s, 1),
                masses=masses,
                time=float(t),
            )
        )
    return Trajectory(states)


class ForceComparison(NamedTuple):
    """Force on the body at ``s`` in the discrete and the continuous system."""

    discrete: np.ndarray
    continuum: np.ndarray
    gap: float


def discrete_force_vs_pv(
    N: int,
    sigma: float,
    loop: FourierLoop,
    s: float,
    params: Optional[ModelParams] = None,
    quad: Optional[QuadratureSpec] = None,
) -> ForceComparison:
    """Compare ``−Σ_{j≠i} σ (y(s) − y(s_j)) Δs/‖y(s) − y(s_j)‖^{2+σ}`` with ``F(s)``.

    The bodies sit at ``s_j = j/N`` with mass ``Δs = 1/N``; ``s`` must be one of them.

    Raises:
        ChoreoDomainError: ``s`` is not on the body grid.
    """
    sigma = check_sigma(sigma)
    if N < 2:
        raise ChoreoDomainError(f"need at least two bodies (got {N})")
    index = round(s * N)
    if abs(s * N - index) > 1e-9:
        raise ChoreoDomainError(f"s={s} is not a body position for N={N}")
    params = params or make_params(sigma, quad)

    nodes = np.arange(N) / N
    others = np.delete(positions(loop, nodes), index % N, axis=0)
    diff = positions(loop, s) - others
    dist = np.linalg.norm(diff, axis=-1)
    if np.min(dist) < COLLISION_FLOOR:
        raise ChoreoCollisionError(f"the loop passes through s={s} twice")
    discrete = -sigma * np.sum(diff / dist[:, None] ** (2.0 + sigma), axis=0) / N
    continuum = pv_force(loop, s, params, quad)
    return ForceComparison(discrete, continuum, float(np.linalg.norm(discrete - continuum)))


__all__ = [
    "COLLISION_FLOOR",
    "ForceComparison",
    "NBodyState",
    "Trajectory",
    "accelerations",
    "center_of_mass",
    "choreography_error",
    "discrete_action",
    "discrete_force_vs_pv",
    "energy",
    "kinetic_energy",
    "momentum",
    "ngon_state",
    "omega_ngon",
    "potential",
    "simulate",
    "step",
    "wave_trajectory",
]
