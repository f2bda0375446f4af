"""Central difference explicit time integration for M a + K u = f.

Used to empirically bracket the critical time step. Mass solves pick the
cheapest available path: diagonal division, a cached dense Cholesky
factor, or a Woodbury solve for implicit low-rank updates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NotPositiveDefinite, SolveFailure
from .linalg import LowRankUpdate, cholesky, woodbury_solve

__all__ = [
    "MassSolver",
    "TransientState",
    "TransientResult",
    "StabilityVerdict",
    "central_difference_run",
    "stability_bracket",
]

STABLE_FACTOR = 10.0
UNSTABLE_FACTOR = 1e6
DEFAULT_STEPS = 10_000


class MassSolver:
    """Repeated solves with a (scaled) mass matrix.

    Accepts a diagonal as a 1-D array, a dense SPD matrix (Cholesky factor
    cached at construction), or a :class:`LowRankUpdate` (Woodbury path).
    """

    def __init__(self, mass):
        if isinstance(mass, LowRankUpdate):
            self._mode = "woodbury"
            self._update = mass
            return
        mass = np.asarray(mass, dtype=float)
        if mass.ndim == 1:
            if np.any(mass <= 0):
                raise SolveFailure("diagonal mass has nonpositive entries")
            self._mode = "diagonal"
            self._diag = mass
            return
        off = mass - np.diag(np.diag(mass))
        if np.abs(off).max() <= 1e-14 * np.abs(mass).max():
            return self.__init__(np.diag(mass).copy())
        try:
            self._factor = cholesky(mass)
        except NotPositiveDefinite as exc:
            raise SolveFailure(f"mass matrix is not SPD: {exc}") from exc
        self._matrix = mass
        self._mode = "dense"

    @property
    def mode(self):
        return self._mode

    def solve(self, rhs):
        """Solve M x = rhs; rhs may be a vector or a matrix of columns."""
        if self._mode == "diagonal":
            return (rhs.T / self._diag).T
        if self._mode == "dense":
            y = sla.solve_triangular(self._factor, rhs, lower=True)
            return sla.solve_triangular(self._factor.T, y, lower=False)
        return woodbury_solve(self._update, rhs)

    def dot(self, x):
        """Mass matrix times a vector (for energy evaluation)."""
        if self._mode == "diagonal":
            return self._diag * x
        if self._mode == "dense":
            return self._matrix @ x
        upd = self._update
        base = np.asarray(upd.base, dtype=float)
        bx = base * x if base.ndim == 1 else base @ x
        return bx + upd.factors @ (upd.core * (upd.factors.T @ x))


@dataclass
class TransientState:
    """Snapshot of the integrated system."""

    displacement: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    time: float
    step: int


@dataclass
class TransientResult:
    """Per-step scalar traces plus the final state."""

    times: np.ndarray
    response_norms: np.ndarray
    energies: np.ndarray
    final: TransientState
    diverged: bool


@dataclass
class StabilityVerdict:
    """Outcome of one stability probe run."""

    classification: str  # "stable" | "unstable" | "inconclusive"
    growth_factor: float
    steps_run: int
    dt: float


def central_difference_run(
    kbar,
    mbar,
    u0,
    v0,
    dt,
    steps,
    force=None,
    stop_growth=None,
    trace_path=None,
):
    """Standard central difference with consistent start-up.

    u_{-1} = u_0 - dt v_0 + dt^2/2 a_0, then
    u_{k+1} = 2 u_k - u_{k-1} + dt^2 M^{-1}(f - K u_k).

    ``stop_growth`` aborts early once the response norm exceeds that
    multiple of the initial norm (the run is then flagged diverged).
    Energy 0.5 v^T M v + 0.5 u^T K u is evaluated at synchronized
    instants with the midpoint velocity estimate.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    kbar = np.asarray(kbar, dtype=float)
    solver = mbar if isinstance(mbar, MassSolver) else MassSolver(mbar)
    u_prev = np.asarray(u0, dtype=float).copy()
    v0 = np.asarray(v0, dtype=float)
    f = np.zeros_like(u_prev) if force is None else np.asarray(force, dtype=float)

    # the force is constant, so M^{-1} K and M^{-1} f are fixed operators;
    # factoring them out once turns every step into a single matvec
    amat = solver.solve(kbar)
    fhat = solver.solve(f)

    a0 = fhat - amat @ u_prev
    u_minus = u_prev - dt * v0 + 0.5 * dt * dt * a0
    u_old, u = u_minus, u_prev

    norm0 = float(np.linalg.norm(u_prev)) or 1.0
    times = np.empty(steps + 1)
    norms = np.empty(steps + 1)
    energies = np.empty(steps + 1)
    times[0] = 0.0
    norms[0] = np.linalg.norm(u_prev)
    energies[0] = 0.5 * v0 @ solver.dot(v0) + 0.5 * u_prev @ (kbar @ u_prev)

    diverged = False
    k = 0
    v = v0
    a = a0
    for k in range(1, steps + 1):
        a = fhat - amat @ u
        u_new = 2.0 * u - u_old + dt * dt * a
        v = (u_new - u_old) / (2.0 * dt)
        times[k] = k * dt
        norms[k] = np.linalg.norm(u_new)
        energies[k] = 0.5 * v @ solver.dot(v) + 0.5 * u @ (kbar @ u)
        u_old, u = u, u_new
        if not np.isfinite(norms[k]) or (
            stop_growth is not None and norms[k] > stop_growth * norm0
        ):
            diverged = True
            break

    times, norms, energies = times[: k + 1], norms[: k + 1], energies[: k + 1]
    if trace_path is not None:
        from .analysis import write_curve_csv

        write_curve_csv(
            trace_path,
            {"time": times.tolist(), "energy": energies.tolist(), "norm": norms.tolist()},
        )
    final = TransientState(u, v, a, times[-1], len(times) - 1)
    return TransientResult(times, norms, energies, final, diverged)


def _seeded_initial(ndof, seed, highest_mode=None, mass_dot=None, min_component=1e-12):
    """Unit-norm random displacement with a guaranteed highest-mode component."""
    rng = np.random.default_rng(seed)
    for _ in range(100):
        u0 = rng.standard_normal(ndof)
        u0 /= np.linalg.norm(u0)
        if highest_mode is None:
            return u0
        weighted = mass_dot(u0) if mass_dot is not None else u0
        if abs(highest_mode @ weighted) >= min_component:
            return u0
    raise SolveFailure("could not seed a component on the highest mode")


def stability_bracket(
    kbar,
    mbar,
    dt_estimate,
    steps=DEFAULT_STEPS,
    seed=42,
    highest_mode=None,
    factors=(0.99, 1.05),
):
    """Probe stability just below and just above the estimated critical step.

    Runs with a seeded random unit-norm initial displacement. A run is
    stable iff the response norm never exceeds 10x the initial norm over
    all steps, unstable iff it exceeds 1e6x, and inconclusive otherwise.
    Returns one :class:`StabilityVerdict` per factor.
    """
    solver = mbar if isinstance(mbar, MassSolver) else MassSolver(mbar)
    ndof = np.asarray(kbar).shape[0]
    u0 = _seeded_initial(ndof, seed, highest_mode, solver.dot)
    v0 = np.zeros(ndof)

    verdicts = []
    for factor in factors:
        dt = factor * dt_estimate
        result = central_difference_run(
            kbar, solver, u0, v0, dt, steps, stop_growth=UNSTABLE_FACTOR
        )
        growth = float(np.nanmax(result.response_norms)) / float(result.response_norms[0])
        if result.diverged or growth >= UNSTABLE_FACTOR or not np.isfinite(growth):
            classification = "unstable"
            growth = float("inf") if not np.isfinite(growth) else growth
        elif growth <= STABLE_FACTOR:
            classification = "stable"
        else:
            classification = "inconclusive"
        verdicts.append(StabilityVerdict(classification, growth, len(result.times) - 1, dt))
    return tuple(verdicts)
