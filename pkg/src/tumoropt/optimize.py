"""Projected Adam descent over the two therapy schedules.

Each iteration runs a forward solve, a backward solve, and the reduced
gradient; the tentative step is projected back onto the admissible set (box
for both controls, box plus budget for the chemotherapy).  The loop stops
when the cost stays stable for ``n_stable`` consecutive iterations or at the
iteration cap, and returns the best iterate seen rather than the last one:
the descent is not monotone.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .adjoint import run_adjoint
from .control import AdmissibleSet, ControlSchedule, clamp_box, project_budget
from .cost import CostWeights, evaluate_cost, reduced_gradient
from .errors import OptimizationError, TumoroptError
from .mesh import Mesh
from .model import ModelParams
from .state import StepContext, TimeGrid, run_state


@dataclass(frozen=True)
class AdamConfig:
    """Moment decays, step size, and the stability stopping rule."""

    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    alpha0: float = 0.1
    alpha_decay: float = 1.0
    tol: float = 1e-6
    n_stable: int = 5
    max_iter: int = 200

    def __post_init__(self):
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("moment decays must lie in [0, 1)")
        if self.epsilon <= 0.0 or self.alpha0 <= 0.0 or self.tol <= 0.0:
            raise ValueError("epsilon, alpha0 and tol must be positive")
        if self.n_stable < 1:
            raise ValueError("n_stable must be at least 1")


@dataclass(frozen=True)
class AdamState:
    """First and second moment vectors for both controls and the shared
    iteration counter (one increment per (c, s) pair update)."""

    m_c: np.ndarray
    v_c: np.ndarray
    m_s: np.ndarray
    v_s: np.ndarray
    k: int = 0

    @classmethod
    def fresh(cls, n: int):
        z = np.zeros(n)
        return cls(m_c=z.copy(), v_c=z.copy(), m_s=z.copy(), v_s=z.copy())

    def advanced(self):
        return replace(self, k=self.k + 1)


def adam_direction(state: AdamState, grad, cfg: AdamConfig, which: str):
    """Update the moments of one control and return its descent direction.

    Bias correction uses ``state.k + 1``; the caller advances ``k`` once
    after updating both controls so the pair shares a single counter.
    """
    g = np.asarray(grad, dtype=float)
    m_old, v_old = (state.m_c, state.v_c) if which == "c" else (state.m_s,
                                                                state.v_s)
    if g.shape != m_old.shape:
        raise ValueError("gradient length does not match the moment vectors")
    t = state.k + 1
    m = cfg.beta1 * m_old + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * v_old + (1.0 - cfg.beta2) * g * g
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    direction = -m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    if which == "c":
        new_state = replace(state, m_c=m, v_c=v)
    else:
        new_state = replace(state, m_s=m, v_s=v)
    return direction, new_state


@dataclass
class IterationRecord:
    """One optimizer iteration: cost, stopping data, and the iterate itself."""

    k: int
    cost: float
    grad_norm: float
    lam: float
    budget: float
    delta: float
    c: np.ndarray
    s: np.ndarray


@dataclass
class ControlProblem:
    """Everything a descent run needs besides the Adam configuration."""

    mesh: Mesh
    grid: TimeGrid
    u0: np.ndarray
    sigma0: np.ndarray
    params: ModelParams
    weights: CostWeights
    admissible: AdmissibleSet


@dataclass
class OptimizeResult:
    best_controls: ControlSchedule
    best_cost: float
    history: list = field(default_factory=list)
    stopped_by_stability: bool = False


def optimize(initial: ControlSchedule, problem: ControlProblem,
             cfg: AdamConfig) -> OptimizeResult:
    """Run the projected descent; returns the best iterate and full history."""
    grid = problem.grid
    ctx = StepContext(problem.mesh, problem.params, grid.dt)
    from .control import evaluate_budget

    c, lam = project_budget(initial.c, problem.admissible, grid)
    s = clamp_box(initial.s)
    controls = ControlSchedule(grid, c, s)

    state = AdamState.fresh(grid.n_steps)
    history: list[IterationRecord] = []
    best_cost = np.inf
    best_controls = controls
    stable = 0
    stopped = False
    prev_cost = None

    for k in range(cfg.max_iter):
        try:
            states = run_state(problem.mesh, grid, problem.u0, problem.sigma0,
                               controls, problem.params, ctx=ctx)
            cost = evaluate_cost(states, controls, problem.weights,
                                 mass=ctx.mass)
            adjoints = run_adjoint(states, controls, problem.weights,
                                   problem.params, ctx=ctx)
            d_c, d_s = reduced_gradient(states, adjoints, problem.weights,
                                        problem.params, mass=ctx.mass)
        except TumoroptError as exc:
            raise OptimizationError(str(exc), iteration=k,
                                    history=history) from exc

        delta = abs(cost - prev_cost) if prev_cost is not None else np.inf
        prev_cost = cost
        grad_norm = max(np.abs(d_c).max(initial=0.0),
                        np.abs(d_s).max(initial=0.0))
        history.append(IterationRecord(
            k=k, cost=cost, grad_norm=grad_norm, lam=lam,
            budget=evaluate_budget(controls.c, grid), delta=delta,
            c=controls.c.copy(), s=controls.s.copy()))
        if cost < best_cost:
            best_cost = cost
            best_controls = controls

        stable = stable + 1 if delta < cfg.tol else 0
        if stable >= cfg.n_stable:
            stopped = True
            break

        dir_c, state = adam_direction(state, d_c, cfg, "c")
        dir_s, state = adam_direction(state, d_s, cfg, "s")
        state = state.advanced()
        alpha = cfg.alpha0 * cfg.alpha_decay ** k
        c, lam = project_budget(controls.c + alpha * dir_c,
                                problem.admissible, grid)
        s = clamp_box(controls.s + alpha * dir_s)
        controls = ControlSchedule(grid, c, s)

    return OptimizeResult(best_controls=best_controls, best_cost=best_cost,
                          history=history, stopped_by_stability=stopped)
