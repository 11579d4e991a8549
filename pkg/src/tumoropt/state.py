"""Semi-implicit stepping of the tumor-oxygen system and trajectory storage.

Each step solves two linear systems in sequence.  The tumor solve treats the
unknown level implicitly and lags the oxygen field (growth weight, chemo
weight, taxis drift); the oxygen solve then uses the fresh tumor field and
lags only the Michaelis denominator:

    [M/dt + d_u K - W(rho(s') (alpha - u')) + kappa W(c s') - chi C(grad s')] u = M u'/dt
    [M/dt + d_sigma K + gamma M + W(a_ox u / (k_ox + s'))] s
        = M s'/dt + gamma beta M 1 + (1 - s_ctrl) s_c M u

with primes marking the previous time level.  The same operator builders are
reused by the sensitivity and adjoint sweeps so that their transpose
relationship is structural rather than re-derived.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, SolverError, SteppingError
from .fem import (assemble_convection, assemble_mass, assemble_stiffness,
                  assemble_weighted_mass, element_gradients, load_vector,
                  quad_values, solve_sparse)
from .mesh import Mesh
from .model import ModelParams, rho

MICHAELIS_FLOOR = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, T] into ``n_steps`` intervals of length ``dt``."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be nonnegative")

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


@dataclass
class StateTrajectory:
    """Nodal tumor and oxygen fields at every time level, rows = time."""

    mesh: Mesh
    grid: TimeGrid
    u: np.ndarray      # (n_steps + 1, V)
    sigma: np.ndarray  # (n_steps + 1, V)


class StepContext:
    """Per-mesh assembly cache shared by the forward, sensitivity, and
    adjoint sweeps."""

    def __init__(self, mesh: Mesh, params: ModelParams, dt: float):
        self.mesh = mesh
        self.params = params
        self.dt = dt
        self.mass = assemble_mass(mesh)
        self.stiffness = assemble_stiffness(mesh)
        self.mass_over_dt = self.mass / dt
        self.supply = self.params.gamma * self.params.beta * \
            (self.mass @ np.ones(mesh.num_vertices))

    def tumor_operator(self, u_prev, sigma_prev, c_n):
        """Implicit operator of the tumor solve; coefficients at the lagged
        level.  ``c_n`` may be a scalar or per-quadrature (E, 3) values."""
        p = self.params
        sq = quad_values(self.mesh, sigma_prev)
        uq = quad_values(self.mesh, u_prev)
        growth = assemble_weighted_mass(self.mesh, rho(sq, p) * (p.alpha - uq))
        chemo = assemble_weighted_mass(self.mesh, np.asarray(c_n) * sq)
        taxis = assemble_convection(self.mesh, element_gradients(self.mesh,
                                                                 sigma_prev))
        return (self.mass_over_dt + p.d_u * self.stiffness - growth
                + p.kappa * chemo - p.chi * taxis)

    def oxygen_operator(self, u_new, sigma_prev):
        """Implicit operator of the oxygen solve; consumption uses the fresh
        tumor field over the lagged Michaelis denominator."""
        p = self.params
        denom = p.k_ox + quad_values(self.mesh, sigma_prev)
        if np.any(denom < MICHAELIS_FLOOR):
            e, q = np.argwhere(denom < MICHAELIS_FLOOR)[0]
            raise NumericError(
                f"Michaelis denominator below {MICHAELIS_FLOOR:g} at element "
                f"{e}, quadrature point {q}"
            )
        consumption = assemble_weighted_mass(
            self.mesh, p.a_ox * quad_values(self.mesh, u_new) / denom)
        return (self.mass_over_dt + p.d_sigma * self.stiffness
                + p.gamma * self.mass + consumption)

    def oxygen_rhs(self, sigma_prev, u_new, s_n, extra=None):
        p = self.params
        rhs = self.mass_over_dt @ sigma_prev + self.supply
        if np.isscalar(s_n):
            rhs = rhs + (1.0 - s_n) * p.s_c * (self.mass @ u_new)
        else:
            weight = (1.0 - np.asarray(s_n)) * p.s_c * quad_values(self.mesh,
                                                                   u_new)
            rhs = rhs + load_vector(self.mesh, weight)
        if extra is not None:
            rhs = rhs + extra
        return rhs


def step_state(ctx: StepContext, u_prev, sigma_prev, c_n, s_n,
               source_u=None, source_sigma=None):
    """Advance one step; returns (u_next, sigma_next).

    ``source_u``/``source_sigma`` are optional extra load vectors (used by
    manufactured-solution studies); both default to none.
    """
    A_u = ctx.tumor_operator(u_prev, sigma_prev, c_n)
    rhs_u = ctx.mass_over_dt @ u_prev
    if source_u is not None:
        rhs_u = rhs_u + source_u
    u_next = solve_sparse(A_u, rhs_u, hint="general", x0=u_prev)

    A_s = ctx.oxygen_operator(u_next, sigma_prev)
    rhs_s = ctx.oxygen_rhs(sigma_prev, u_next, s_n, extra=source_sigma)
    sigma_next = solve_sparse(A_s, rhs_s, hint="spd", x0=sigma_prev)
    return u_next, sigma_next


def run_state(mesh: Mesh, grid: TimeGrid, u0, sigma0, controls,
              params: ModelParams, source_u=None, source_sigma=None,
              ctx: StepContext | None = None) -> StateTrajectory:
    """Run the forward sweep from projected initial data.

    ``controls`` is a ControlSchedule (or anything with per-step arrays
    ``c`` and ``s`` of length ``grid.n_steps``).  Optional source callables
    ``source_u(t)`` / ``source_sigma(t)`` return extra load vectors for the
    step ending at time t.
    """
    n = grid.n_steps
    c, s = np.asarray(controls.c, dtype=float), np.asarray(controls.s,
                                                           dtype=float)
    if c.shape[0] != n or s.shape[0] != n:
        raise ValueError(
            f"controls have {c.shape[0]}/{s.shape[0]} entries, grid has {n} steps"
        )
    if ctx is None:
        ctx = StepContext(mesh, params, grid.dt)
    V = mesh.num_vertices
    u = np.empty((n + 1, V))
    sigma = np.empty((n + 1, V))
    u[0], sigma[0] = u0, sigma0
    for j in range(n):
        t_next = (j + 1) * grid.dt
        fu = source_u(t_next) if source_u is not None else None
        fs = source_sigma(t_next) if source_sigma is not None else None
        try:
            u[j + 1], sigma[j + 1] = step_state(ctx, u[j], sigma[j],
                                                c[j], s[j],
                                                source_u=fu, source_sigma=fs)
        except (SolverError, NumericError) as exc:
            raise SteppingError(str(exc), step=j + 1) from exc
    return StateTrajectory(mesh=mesh, grid=grid, u=u, sigma=sigma)
