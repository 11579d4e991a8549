"""Directional derivative of the control-to-state map.

The sweep is obtained by differentiating the discrete forward scheme itself
(not by discretizing the continuous linearized system), so together with the
matching adjoint sweep the discrete chain rule holds to solver tolerance.
Coefficients are lagged exactly as the forward step lags them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import ControlSchedule
from .errors import NumericError, SolverError, SteppingError
from .fem import (assemble_convection, assemble_weighted_mass,
                  element_gradients, quad_values, solve_sparse)
from .mesh import Mesh
from .model import rho, rho_prime
from .state import StateTrajectory, StepContext, TimeGrid


@dataclass
class SensitivityTrajectory:
    """Tangent fields (z1, z2) at every time level; both start from zero."""

    mesh: Mesh
    grid: TimeGrid
    z1: np.ndarray
    z2: np.ndarray


def run_sensitivity(states: StateTrajectory, controls: ControlSchedule,
                    delta_c, delta_s, params,
                    ctx: StepContext | None = None) -> SensitivityTrajectory:
    """Forward sweep for the control direction ``(delta_c, delta_s)``."""
    mesh, grid = states.mesh, states.grid
    n = grid.n_steps
    dc = np.asarray(delta_c, dtype=float)
    ds = np.asarray(delta_s, dtype=float)
    if dc.shape[0] != n or ds.shape[0] != n:
        raise ValueError(f"direction arrays must have length {n}")
    if ctx is None:
        ctx = StepContext(mesh, params, grid.dt)
    p = params
    rp = rho_prime(p)
    V = mesh.num_vertices
    z1 = np.zeros((n + 1, V))
    z2 = np.zeros((n + 1, V))
    u, sigma = states.u, states.sigma
    for j in range(n):
        try:
            sq = quad_values(mesh, sigma[j])
            uq = quad_values(mesh, u[j])
            unew_q = quad_values(mesh, u[j + 1])
            snew_q = quad_values(mesh, sigma[j + 1])
            denom = p.k_ox + sq

            A_u = ctx.tumor_operator(u[j], sigma[j], controls.c[j])
            rhs = ctx.mass_over_dt @ z1[j]
            rhs -= assemble_weighted_mass(mesh, rho(sq, p) * unew_q) @ z1[j]
            rhs += assemble_weighted_mass(
                mesh, rp * (p.alpha - uq) * unew_q) @ z2[j]
            rhs -= p.kappa * controls.c[j] * (
                assemble_weighted_mass(mesh, unew_q) @ z2[j])
            rhs += p.chi * (assemble_convection(
                mesh, element_gradients(mesh, z2[j])) @ u[j + 1])
            rhs -= p.kappa * dc[j] * (
                assemble_weighted_mass(mesh, sq) @ u[j + 1])
            z1[j + 1] = solve_sparse(A_u, rhs, hint="general", x0=z1[j])

            A_s = ctx.oxygen_operator(u[j + 1], sigma[j])
            rhs = ctx.mass_over_dt @ z2[j]
            rhs += (1.0 - controls.s[j]) * p.s_c * (ctx.mass @ z1[j + 1])
            rhs -= ds[j] * p.s_c * (ctx.mass @ u[j + 1])
            rhs -= assemble_weighted_mass(
                mesh, p.a_ox * snew_q / denom) @ z1[j + 1]
            rhs += assemble_weighted_mass(
                mesh, p.a_ox * unew_q * snew_q / denom ** 2) @ z2[j]
            z2[j + 1] = solve_sparse(A_s, rhs, hint="spd", x0=z2[j])
        except (SolverError, NumericError) as exc:
            raise SteppingError(str(exc), step=j + 1) from exc
    return SensitivityTrajectory(mesh=mesh, grid=grid, z1=z1, z2=z2)
