"""Therapy cost functional, reduced gradient, and verification pairings.

The running integrals use the right-endpoint rectangle rule over the time
steps (skipping t = 0), the natural pairing for the implicit scheme: with
this choice the reduced gradient below is the exact derivative of the
discrete cost, up to the dt factor absorbed into the optimizer step size.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import AdjointTrajectory
from .control import ControlSchedule
from .fem import quad_values, triple_product
from .sensitivity import SensitivityTrajectory
from .state import StateTrajectory, run_state


@dataclass(frozen=True)
class CostWeights:
    """Weights of the cost: running (k1, k2) field mismatches, (k3, k4)
    therapy doses, terminal (l1, l2) mismatches, and the desired oxygen
    levels sigma_q (running) and sigma_omega (terminal)."""

    k1: float = 1.0
    k2: float = 1.0
    k3: float = 0.01
    k4: float = 0.01
    l1: float = 1.0
    l2: float = 1.0
    sigma_q: float = 1.0
    sigma_omega: float = 1.0

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "k4", "l1", "l2"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")


def evaluate_cost(states: StateTrajectory, controls: ControlSchedule,
                  weights: CostWeights, mass=None) -> float:
    """Discrete cost of a trajectory-control pair."""
    from .fem import assemble_mass

    mesh, grid = states.mesh, states.grid
    if controls.grid != grid:
        raise ValueError("controls and trajectory live on different grids")
    M = assemble_mass(mesh) if mass is None else mass
    dt = grid.dt
    area = mesh.area
    u, sigma = states.u, states.sigma

    running = 0.0
    for j in range(grid.n_steps):
        un = u[j + 1]
        dn = sigma[j + 1] - weights.sigma_q
        running += dt * (0.5 * weights.k1 * (un @ (M @ un))
                         + 0.5 * weights.k2 * (dn @ (M @ dn))
                         + (weights.k3 * controls.c[j]
                            + weights.k4 * controls.s[j]) * area)
    uT = u[-1]
    dT = sigma[-1] - weights.sigma_omega
    terminal = (0.5 * weights.l1 * (uT @ (M @ uT))
                + 0.5 * weights.l2 * (dT @ (M @ dT)))
    return float(running + terminal)


def reduced_gradient(states: StateTrajectory, adjoints: AdjointTrajectory,
                     weights: CostWeights, params, mass=None):
    """Per-step gradient components (d_c, d_s).

    d_c[j] = k3 |Omega| - kappa * int sigma u p1 over step j+1,
    d_s[j] = k4 |Omega| - s_c  * int u p2        over step j+1,

    pairing exactly the fields each control multiplies in the forward step:
    the lagged oxygen (level j) with the fresh tumor (level j+1) and the
    step's costate.  The true derivative of the discrete cost is dt times
    these values.
    """
    from .fem import assemble_mass

    mesh, grid = states.mesh, states.grid
    if adjoints.grid != grid:
        raise ValueError("adjoints and states live on different grids")
    M = assemble_mass(mesh) if mass is None else mass
    area = mesh.area
    n = grid.n_steps
    d_c = np.empty(n)
    d_s = np.empty(n)
    for j in range(n):
        sq_lag = quad_values(mesh, states.sigma[j])
        uq = quad_values(mesh, states.u[j + 1])
        p1q = quad_values(mesh, adjoints.p1[j])
        d_c[j] = weights.k3 * area - params.kappa * triple_product(
            mesh, sq_lag, uq, p1q)
        d_s[j] = weights.k4 * area - params.s_c * float(
            adjoints.p2[j] @ (M @ states.u[j + 1]))
    return d_c, d_s


def fd_gradient_oracle(mesh, grid, u0, sigma0, controls: ControlSchedule,
                       delta_c, delta_s, eps: float, params,
                       weights: CostWeights) -> float:
    """One-sided difference quotient (J(c + eps d) - J(c)) / eps.

    Two full forward solves; no projection is applied, so the caller must
    keep the perturbed controls inside the box.
    """
    base = run_state(mesh, grid, u0, sigma0, controls, params)
    j0 = evaluate_cost(base, controls, weights)
    shifted = controls.replaced(c=controls.c + eps * np.asarray(delta_c),
                                s=controls.s + eps * np.asarray(delta_s))
    moved = run_state(mesh, grid, u0, sigma0, shifted, params)
    j1 = evaluate_cost(moved, shifted, weights)
    return (j1 - j0) / eps


def duality_pairing(states: StateTrajectory, adjoints: AdjointTrajectory,
                    sens: SensitivityTrajectory, delta_c, delta_s,
                    weights: CostWeights, params, mass=None):
    """Both sides of the discrete duality identity.

    Left: the cost sources paired with the tangent fields (running k1/k2
    sums plus terminal l1/l2 terms).  Right: the costates paired with the
    control perturbation.  The two agree to solver tolerance and certify the
    forward, tangent, and backward sweeps jointly.
    """
    from .fem import assemble_mass

    mesh, grid = states.mesh, states.grid
    M = assemble_mass(mesh) if mass is None else mass
    dt = grid.dt
    dc = np.asarray(delta_c, dtype=float)
    ds = np.asarray(delta_s, dtype=float)

    lhs = (weights.l1 * float(sens.z1[-1] @ (M @ states.u[-1]))
           + weights.l2 * float(
               sens.z2[-1] @ (M @ (states.sigma[-1] - weights.sigma_omega))))
    for j in range(grid.n_steps):
        lhs += dt * weights.k1 * float(sens.z1[j + 1] @ (M @ states.u[j + 1]))
        lhs += dt * weights.k2 * float(
            sens.z2[j + 1] @ (M @ (states.sigma[j + 1] - weights.sigma_q)))

    rhs = 0.0
    for j in range(grid.n_steps):
        sq_lag = quad_values(mesh, states.sigma[j])
        uq = quad_values(mesh, states.u[j + 1])
        p1q = quad_values(mesh, adjoints.p1[j])
        rhs -= dt * params.kappa * dc[j] * triple_product(mesh, sq_lag, uq,
                                                          p1q)
        rhs -= dt * params.s_c * ds[j] * float(
            adjoints.p2[j] @ (M @ states.u[j + 1]))
    return lhs, rhs
