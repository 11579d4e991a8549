"""Experiment runner: builds the problem from a config, runs it, and emits
CSV series, VTK snapshots, rendered figures, and a hashed MANIFEST.

All CSV content is formatted with %.17g so a rerun of the same config in
sequential mode reproduces the files bitwise.
"""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from . import plots
from .adjoint import run_adjoint
from .config import ExperimentConfig
from .control import ControlSchedule, evaluate_budget
from .cost import (duality_pairing, evaluate_cost, fd_gradient_oracle,
                   reduced_gradient)
from .errors import RunnerError
from .fem import assemble_mass
from .mesh import Mesh
from .mms import spatial_study, temporal_study
from .model import initial_oxygen, initial_tumor
from .optimize import ControlProblem, OptimizeResult, optimize
from .sensitivity import run_sensitivity
from .state import StateTrajectory, run_state
from .vtkio import write_vtk


def _fmt(x) -> str:
    return f"{float(x):.17g}"


class ArtifactWriter:
    """Collects emitted files and writes the MANIFEST with content hashes."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise RunnerError(f"cannot create output directory ({exc})",
                              str(out_dir)) from exc
        self.entries = []

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def track(self, name: str):
        digest = hashlib.sha256(self.path(name).read_bytes()).hexdigest()
        self.entries.append((name, digest))

    def write_csv(self, name: str, header, rows):
        target = self.path(name)
        try:
            with open(target, "w") as fh:
                fh.write(",".join(header) + "\n")
                for row in rows:
                    fh.write(",".join(
                        v if isinstance(v, str) else _fmt(v) for v in row)
                        + "\n")
        except OSError as exc:
            raise RunnerError(f"cannot write CSV ({exc})", str(target)) from exc
        self.track(name)

    def finish(self, status="ok"):
        target = self.path("MANIFEST")
        with open(target, "w") as fh:
            fh.write(f"status: {status}\n")
            for name, digest in self.entries:
                fh.write(f"{digest}  {name}\n")


def observables(mesh: Mesh, states: StateTrajectory, weights, mass=None):
    """Per-time-node report columns for a trajectory."""
    M = assemble_mass(mesh) if mass is None else mass
    ones = np.ones(mesh.num_vertices)
    out = {"int_u_sq": [], "max_u": [], "oxy_mismatch": [], "volume": []}
    for u, sigma in zip(states.u, states.sigma):
        d = sigma - weights.sigma_q
        out["int_u_sq"].append(float(u @ (M @ u)))
        out["max_u"].append(float(u.max()))
        out["oxy_mismatch"].append(float(d @ (M @ d)))
        out["volume"].append(float(ones @ (M @ u)))
    return {k: np.array(v) for k, v in out.items()}


def _build_problem(cfg: ExperimentConfig):
    mesh = cfg.build_mesh()
    u0 = initial_tumor(mesh, project=cfg.ic_project)
    sigma0 = initial_oxygen(mesh, cfg.params,
                            satellite_centers=cfg.satellites,
                            project=cfg.ic_project)
    return mesh, u0, sigma0


def _snapshot_steps(n_steps: int, stride: int):
    steps = list(range(0, n_steps + 1, max(stride, 1)))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return steps


def _write_snapshots(writer, mesh, states, stride, prefix="state"):
    for n in _snapshot_steps(states.grid.n_steps, stride):
        name = f"{prefix}_{n:06d}.vtk"
        write_vtk(writer.path(name), mesh,
                  {"u": states.u[n], "sigma": states.sigma[n]},
                  title=f"t={_fmt(n * states.grid.dt)}")
        writer.track(name)


def _timeseries_rows(times, obs):
    for i, t in enumerate(times):
        yield (t, obs["int_u_sq"][i], obs["max_u"][i],
               obs["oxy_mismatch"][i], obs["volume"][i])


_TS_HEADER = ["t", "int_u_sq", "max_u", "oxy_mismatch", "volume"]


def run_uncontrolled(cfg: ExperimentConfig, out_dir=None, stride=None):
    """Zero-therapy forward run: time series, snapshots, figure, MANIFEST."""
    writer = ArtifactWriter(out_dir or cfg.out_dir)
    stride = cfg.stride if stride is None else stride
    try:
        mesh, u0, sigma0 = _build_problem(cfg)
        grid = cfg.grid
        zero = ControlSchedule.constant(grid, 0.0, 0.0)
        states = run_state(mesh, grid, u0, sigma0, zero, cfg.params)
        obs = observables(mesh, states, cfg.weights)
        writer.write_csv("timeseries.csv", _TS_HEADER,
                         _timeseries_rows(grid.times, obs))
        _write_snapshots(writer, mesh, states, stride)
        plots.plot_timeseries(writer.path("timeseries.png"), grid.times, obs)
        writer.track("timeseries.png")
    except Exception as exc:
        writer.finish(status=f"failed: {exc}")
        raise
    writer.finish()
    return writer.out_dir


def _probe_rows(problem, best, perts, which):
    """Cost at the optimum with a constant shift applied to one control.

    No projection or clamping: the probe examines the local landscape of the
    cost itself, and a zero shift must reproduce the optimal cost exactly.
    """
    rows = []
    for pert in perts:
        if which == "c":
            shifted = best.replaced(c=best.c + pert)
        else:
            shifted = best.replaced(s=best.s + pert)
        states = run_state(problem.mesh, problem.grid, problem.u0,
                           problem.sigma0, shifted, problem.params)
        rows.append((pert, evaluate_cost(states, shifted, problem.weights)))
    return rows


def run_optimal_control(cfg: ExperimentConfig, out_dir=None):
    """Full descent experiment with comparison, probe, figures, MANIFEST."""
    writer = ArtifactWriter(out_dir or cfg.out_dir)
    try:
        mesh, u0, sigma0 = _build_problem(cfg)
        grid = cfg.grid
        problem = ControlProblem(mesh=mesh, grid=grid, u0=u0, sigma0=sigma0,
                                 params=cfg.params, weights=cfg.weights,
                                 admissible=cfg.admissible(mesh))
        initial = ControlSchedule.constant(grid, cfg.c0, cfg.s0)
        result = optimize(initial, problem, cfg.adam)
        best = result.best_controls

        t_steps = grid.dt * np.arange(grid.n_steps)
        writer.write_csv(
            "controls.csv",
            ["t", "c_initial", "c_optimal", "s_initial", "s_optimal"],
            ((t_steps[j], initial.c[j], best.c[j], initial.s[j], best.s[j])
             for j in range(grid.n_steps)))
        writer.write_csv(
            "history.csv", ["k", "J", "delta", "lambda", "budget"],
            ((r.k, r.cost, r.delta, r.lam, r.budget) for r in result.history))

        zero = ControlSchedule.constant(grid, 0.0, 0.0)
        plain = run_state(mesh, grid, u0, sigma0, zero, cfg.params)
        controlled = run_state(mesh, grid, u0, sigma0, best, cfg.params)
        obs_plain = observables(mesh, plain, cfg.weights)
        obs_ctrl = observables(mesh, controlled, cfg.weights)
        writer.write_csv(
            "comparison.csv",
            ["t"] + [f"{c}_{tag}" for tag in ("uncontrolled", "controlled")
                     for c in _TS_HEADER[1:]],
            ((t,) + tuple(obs_plain[c][i] for c in _TS_HEADER[1:])
             + tuple(obs_ctrl[c][i] for c in _TS_HEADER[1:])
             for i, t in enumerate(grid.times)))

        rows_c = _probe_rows(problem, best, cfg.perts_c, "c")
        rows_s = _probe_rows(problem, best, cfg.perts_s, "s")
        writer.write_csv("perturbation.csv", ["control", "pert", "J"],
                         [("c", p, j) for p, j in rows_c]
                         + [("s", p, j) for p, j in rows_s])

        plots.plot_controls(writer.path("controls.png"), t_steps,
                            initial.c, best.c, initial.s, best.s)
        writer.track("controls.png")
        plots.plot_history(writer.path("history.png"),
                           [r.k for r in result.history],
                           [r.cost for r in result.history])
        writer.track("history.png")
        plots.plot_timeseries(writer.path("comparison.png"), grid.times,
                              obs_plain, controlled=obs_ctrl)
        writer.track("comparison.png")
        plots.plot_perturbation(writer.path("perturbation.png"),
                                [p for p, _ in rows_c], [j for _, j in rows_c],
                                [p for p, _ in rows_s], [j for _, j in rows_s])
        writer.track("perturbation.png")
        _write_snapshots(writer, mesh, controlled, cfg.stride,
                         prefix="controlled")
    except Exception as exc:
        writer.finish(status=f"failed: {exc}")
        raise
    writer.finish()
    return writer.out_dir, result


def run_probe(cfg: ExperimentConfig, which: str, perts=None, out_dir=None):
    """Optimize, then probe the cost around the optimum for one control."""
    if which not in ("c", "s"):
        raise ValueError("probe control must be 'c' or 's'")
    writer = ArtifactWriter(out_dir or cfg.out_dir)
    try:
        mesh, u0, sigma0 = _build_problem(cfg)
        grid = cfg.grid
        problem = ControlProblem(mesh=mesh, grid=grid, u0=u0, sigma0=sigma0,
                                 params=cfg.params, weights=cfg.weights,
                                 admissible=cfg.admissible(mesh))
        initial = ControlSchedule.constant(grid, cfg.c0, cfg.s0)
        result = optimize(initial, problem, cfg.adam)
        perts = (cfg.perts_c if which == "c" else cfg.perts_s) \
            if perts is None else perts
        rows = _probe_rows(problem, result.best_controls, perts, which)
        writer.write_csv("probe.csv", ["control", "pert", "J"],
                         [(which, p, j) for p, j in rows])
        plots.plot_perturbation(writer.path("probe.png"),
                                [p for p, _ in rows], [j for _, j in rows],
                                [p for p, _ in rows], [j for _, j in rows])
        writer.track("probe.png")
    except Exception as exc:
        writer.finish(status=f"failed: {exc}")
        raise
    writer.finish()
    return writer.out_dir, result


def run_check_gradient(cfg: ExperimentConfig, out_dir=None, seed=0,
                       n_directions=5, epsilons=(1e-3, 1e-4, 1e-5)):
    """Certify the gradient chain on the configured problem.

    For each random admissible direction: the duality identity between the
    tangent and costate pairings, and the adjoint gradient against the
    finite-difference oracle over a range of step sizes.
    """
    writer = ArtifactWriter(out_dir or cfg.out_dir)
    try:
        mesh, u0, sigma0 = _build_problem(cfg)
        grid = cfg.grid
        rng = np.random.default_rng(seed)
        controls = ControlSchedule.constant(grid, cfg.c0, cfg.s0)
        states = run_state(mesh, grid, u0, sigma0, controls, cfg.params)
        adjoints = run_adjoint(states, controls, cfg.weights, cfg.params)
        d_c, d_s = reduced_gradient(states, adjoints, cfg.weights, cfg.params)

        rows = []
        worst_dual = 0.0
        for trial in range(n_directions):
            dc = rng.uniform(-0.3, 0.3, grid.n_steps)
            ds = rng.uniform(-0.3, 0.3, grid.n_steps)
            sens = run_sensitivity(states, controls, dc, ds, cfg.params)
            lhs, rhs = duality_pairing(states, adjoints, sens, dc, ds,
                                       cfg.weights, cfg.params)
            scale = max(abs(lhs), abs(rhs), 1e-300)
            dual_rel = abs(lhs - rhs) / scale
            worst_dual = max(worst_dual, dual_rel)
            pairing = grid.dt * float(d_c @ dc + d_s @ ds)
            for eps in epsilons:
                fd = fd_gradient_oracle(mesh, grid, u0, sigma0, controls,
                                        dc, ds, eps, cfg.params, cfg.weights)
                fd_rel = abs(fd - pairing) / max(abs(fd), 1e-300)
                rows.append((trial, eps, lhs, rhs, dual_rel, pairing, fd,
                             fd_rel))
        writer.write_csv(
            "gradient_check.csv",
            ["trial", "eps", "duality_lhs", "duality_rhs", "duality_rel",
             "adjoint_dot", "fd_quotient", "fd_rel"], rows)
    except Exception as exc:
        writer.finish(status=f"failed: {exc}")
        raise
    writer.finish()
    return writer.out_dir, worst_dual


def run_convergence(cfg: ExperimentConfig, out_dir=None):
    """Manufactured-solution orders for the oxygen sub-problem.

    Uses generated unit squares regardless of the configured mesh; the study
    needs a mesh family, not one mesh.
    """
    writer = ArtifactWriter(out_dir or cfg.out_dir)
    try:
        t_errs, t_orders = temporal_study(cfg.params)
        hs, s_errs, s_orders = spatial_study(cfg.params)
        dts = (0.02, 0.01, 0.005)
        rows = [("temporal", dts[i], t_errs[i],
                 t_orders[i - 1] if i > 0 else "")
                for i in range(len(t_errs))]
        rows += [("spatial", hs[i], s_errs[i],
                  s_orders[i - 1] if i > 0 else "")
                 for i in range(len(s_errs))]
        writer.write_csv("convergence.csv",
                         ["study", "dt_or_h", "l2_error", "observed_order"],
                         rows)
        plots.plot_convergence(writer.path("convergence_temporal.png"), dts,
                               t_errs,
                               f"temporal orders {np.round(t_orders, 3)}",
                               "dt")
        writer.track("convergence_temporal.png")
        plots.plot_convergence(writer.path("convergence_spatial.png"), hs,
                               s_errs,
                               f"spatial orders {np.round(s_orders, 3)}", "h")
        writer.track("convergence_spatial.png")
    except Exception as exc:
        writer.finish(status=f"failed: {exc}")
        raise
    writer.finish()
    return writer.out_dir, (t_orders, s_orders)
