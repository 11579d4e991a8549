"""Manufactured-solution convergence studies for the oxygen sub-problem.

The exact solution  sigma(x,y,t) = beta + cos(pi x) cos(pi y) g(t)  has zero
normal derivative on the unit square, so it is compatible with the natural
boundary conditions.  With the tumor field identically zero the oxygen
equation decouples, and the forcing

    f = ccx * (g'(t) + (2 pi^2 d_sigma + gamma) g(t)),   ccx = cos cos

makes sigma exact.  Temporal order is measured on a fixed fine mesh over a
dt sequence; spatial order over a mesh sequence with dt shrunk like h^2 so
the first-order time error refines at the same rate.
"""
from __future__ import annotations

import numpy as np

from .control import ControlSchedule
from .fem import load_vector, quad_values
from .mesh import Mesh, generate_unit_square
from .model import ModelParams
from .state import TimeGrid, run_state

# degree-4 rule (two orbits of 3 points); weights sum to 1, scale by area
_ERR_A = 0.445948490915965
_ERR_B = 0.091576213509771
_ERR_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_ERR_BARY = np.array(
    [[1 - 2 * _ERR_A, _ERR_A, _ERR_A],
     [_ERR_A, 1 - 2 * _ERR_A, _ERR_A],
     [_ERR_A, _ERR_A, 1 - 2 * _ERR_A],
     [1 - 2 * _ERR_B, _ERR_B, _ERR_B],
     [_ERR_B, 1 - 2 * _ERR_B, _ERR_B],
     [_ERR_B, _ERR_B, 1 - 2 * _ERR_B]])


def l2_error(mesh: Mesh, nodal, exact):
    """L2 distance between a P1 field and a callable, degree-4 quadrature."""
    pts = np.einsum("ql,elk->eqk", _ERR_BARY, mesh.vertices[mesh.triangles])
    field = np.einsum("ql,el->eq", _ERR_BARY, np.asarray(nodal)[mesh.triangles])
    diff = field - exact(pts[:, :, 0], pts[:, :, 1])
    return float(np.sqrt(np.einsum("e,q,eq->", mesh.areas, _ERR_W, diff ** 2)))


def _ccx(x, y):
    # amplitude 0.3 keeps the manufactured oxygen positive over the study window
    return 0.3 * np.cos(np.pi * x) * np.cos(np.pi * y)


def run_forced_oxygen(mesh: Mesh, grid: TimeGrid, params: ModelParams):
    """Solve the decoupled, forced oxygen problem; returns sigma at T."""
    rate = 2.0 * np.pi ** 2 * params.d_sigma + params.gamma

    def source(t):
        # g(t) = exp(t): nonzero curvature in time, so the first-order error
        # is actually visible
        g, gp = np.exp(t), np.exp(t)
        pts_x = mesh.quad_points[:, :, 0]
        pts_y = mesh.quad_points[:, :, 1]
        return load_vector(mesh, _ccx(pts_x, pts_y) * (gp + rate * g))

    from .fem import l2_project

    sigma0 = l2_project(mesh, lambda x, y: params.beta + _ccx(x, y))
    u0 = np.zeros(mesh.num_vertices)
    controls = ControlSchedule.constant(grid, 0.0, 0.0)
    states = run_state(mesh, grid, u0, sigma0, controls, params,
                       source_sigma=source)
    return states.sigma[-1]


def temporal_study(params: ModelParams, dts=(0.02, 0.01, 0.005),
                   t_final=0.4, resolution=64):
    """Errors and observed orders over a dt sequence on one fine mesh."""
    mesh = generate_unit_square(resolution, resolution)
    errors = []
    for dt in dts:
        n = round(t_final / dt)
        if abs(n * dt - t_final) > 1e-12:
            raise ValueError(f"t_final {t_final} is not a multiple of dt {dt}")
        sigma_T = run_forced_oxygen(mesh, TimeGrid(dt=dt, n_steps=n), params)
        g = np.exp(t_final)
        errors.append(l2_error(mesh, sigma_T,
                               lambda x, y: params.beta + _ccx(x, y) * g))
    orders = [np.log(errors[i] / errors[i + 1])
              / np.log(dts[i] / dts[i + 1]) for i in range(len(dts) - 1)]
    return np.array(errors), np.array(orders)


def spatial_study(params: ModelParams, resolutions=(8, 16, 32),
                  t_final=0.2, dt_coarse=0.04):
    """Errors and observed orders over mesh halving with dt ~ h^2."""
    errors = []
    hs = []
    for i, n in enumerate(resolutions):
        dt = dt_coarse / 4 ** i
        steps = round(t_final / dt)
        mesh = generate_unit_square(n, n)
        sigma_T = run_forced_oxygen(mesh, TimeGrid(dt=dt, n_steps=steps),
                                    params)
        g = np.exp(t_final)
        errors.append(l2_error(mesh, sigma_T,
                               lambda x, y: params.beta + _ccx(x, y) * g))
        hs.append(1.0 / n)
    orders = [np.log(errors[i] / errors[i + 1]) / np.log(hs[i] / hs[i + 1])
              for i in range(len(errors) - 1)]
    return np.array(hs), np.array(errors), np.array(orders)
