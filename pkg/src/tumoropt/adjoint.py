"""Backward sweep for the costate fields driving the reduced gradient.

The recursion is the exact transpose of the linearized forward step, so the
pairing between a control perturbation and the cost derivative closes to
solver tolerance (the finite-difference and duality tests rely on this).
Consequences of transposing the forward ordering:

  * within a backward step the oxygen costate p2 is solved first, then the
    tumor costate p1 (the forward step computes u before sigma, and the
    oxygen solve depends on the fresh tumor field);
  * the implicit operators at backward step n are the transposes of the
    forward operators of step n, whose coefficients live at level n-1;
  * explicit couplings mix levels n and n+1 exactly where the forward scheme
    lagged its coefficients.

Entry N of the returned trajectory holds the projected terminal data; entry
j < N holds the costate attached to forward step j+1, which is the pairing
partner of the step-(j+1) control values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import ControlSchedule
from .errors import NumericError, SolverError, SteppingError
from .fem import (assemble_convection, assemble_weighted_mass,
                  element_gradients, l2_project, quad_values, solve_sparse)
from .mesh import Mesh
from .model import rho, rho_prime
from .state import StateTrajectory, StepContext, TimeGrid


@dataclass
class AdjointTrajectory:
    """Costate fields (p1, p2); row N is the projected terminal data."""

    mesh: Mesh
    grid: TimeGrid
    p1: np.ndarray
    p2: np.ndarray


def terminal_adjoint(mesh: Mesh, u_final, sigma_final, weights,
                     mass=None):
    """Projected terminal costates l1 u(T) and l2 (sigma(T) - sigma_Omega).

    The products are formed at quadrature level and L2-projected, matching
    how the discrete terminal cost differentiates.
    """
    uq = quad_values(mesh, u_final)
    sq = quad_values(mesh, sigma_final)
    p1_T = l2_project(mesh, weights.l1 * uq, mass=mass)
    p2_T = l2_project(mesh, weights.l2 * (sq - weights.sigma_omega),
                      mass=mass)
    return p1_T, p2_T


def step_adjoint_backward(ctx: StepContext, p1_next, p2_next, weights,
                          u_prev, sigma_prev, u_n, sigma_n, c_n, s_n,
                          u_after=None, sigma_after=None, c_after=None):
    """One backward step: costates attached to the forward step whose lagged
    level is ``(u_prev, sigma_prev)`` and implicit level ``(u_n, sigma_n)``.

    ``*_after`` carry the following step's data and are omitted at the final
    step, where ``(p1_next, p2_next)`` are the projected terminal fields.
    """
    mesh, p = ctx.mesh, ctx.params
    dt = ctx.dt
    sq_prev = quad_values(mesh, sigma_prev)
    sq_n = quad_values(mesh, sigma_n)
    denom = p.k_ox + sq_prev

    rhs2 = ctx.mass_over_dt @ p2_next
    rhs2 += weights.k2 * (ctx.mass @ (sigma_n - weights.sigma_q))
    if u_after is not None:
        uq_n = quad_values(mesh, u_n)
        uq_after = quad_values(mesh, u_after)
        sq_after = quad_values(mesh, sigma_after)
        rhs2 += assemble_weighted_mass(
            mesh, rho_prime(p) * (p.alpha - uq_n) * uq_after) @ p1_next
        rhs2 -= p.kappa * c_after * (
            assemble_weighted_mass(mesh, uq_after) @ p1_next)
        rhs2 += p.chi * (assemble_convection(
            mesh, element_gradients(mesh, p1_next)) @ u_after)
        rhs2 += assemble_weighted_mass(
            mesh, p.a_ox * uq_after * sq_after / (p.k_ox + sq_n) ** 2) @ p2_next
    A_s = ctx.oxygen_operator(u_n, sigma_prev)
    p2_n = solve_sparse(A_s, rhs2, hint="spd", x0=p2_next)

    rhs1 = ctx.mass_over_dt @ p1_next
    rhs1 += weights.k1 * (ctx.mass @ u_n)
    if u_after is not None:
        rhs1 -= assemble_weighted_mass(mesh, rho(sq_n, p) * uq_after) @ p1_next
    rhs1 -= assemble_weighted_mass(mesh, p.a_ox * sq_n / denom) @ p2_n
    rhs1 += (1.0 - s_n) * p.s_c * (ctx.mass @ p2_n)
    A_u_T = ctx.tumor_operator(u_prev, sigma_prev, c_n).T.tocsr()
    p1_n = solve_sparse(A_u_T, rhs1, hint="general", x0=p1_next)
    return p1_n, p2_n


def run_adjoint(states: StateTrajectory, controls: ControlSchedule, weights,
                params, ctx: StepContext | None = None) -> AdjointTrajectory:
    """Backward sweep from the projected terminal data down to step 1."""
    mesh, grid = states.mesh, states.grid
    n = grid.n_steps
    if ctx is None:
        ctx = StepContext(mesh, params, grid.dt)
    V = mesh.num_vertices
    p1 = np.zeros((n + 1, V))
    p2 = np.zeros((n + 1, V))
    u, sigma = states.u, states.sigma
    try:
        p1[n], p2[n] = terminal_adjoint(mesh, u[n], sigma[n], weights,
                                        mass=ctx.mass)
    except SolverError as exc:
        raise SteppingError(str(exc), step=n) from exc
    for j in range(n - 1, -1, -1):
        last = j == n - 1
        try:
            p1[j], p2[j] = step_adjoint_backward(
                ctx, p1[j + 1], p2[j + 1], weights,
                u_prev=u[j], sigma_prev=sigma[j],
                u_n=u[j + 1], sigma_n=sigma[j + 1],
                c_n=controls.c[j], s_n=controls.s[j],
                u_after=None if last else u[j + 2],
                sigma_after=None if last else sigma[j + 2],
                c_after=None if last else controls.c[j + 1],
            )
        except (SolverError, NumericError) as exc:
            raise SteppingError(str(exc), step=j) from exc
    return AdjointTrajectory(mesh=mesh, grid=grid, p1=p1, p2=p2)
