"""Therapy schedules and projection onto the admissible set.

Controls are piecewise constant in time, one value per step interval.  The
chemotherapy schedule obeys pointwise bounds [0, 1] and a global budget on
its time integral; the antiangiogenic schedule only the bounds.  Projection
follows the clip-then-shift characterization: if clipping already meets the
budget the multiplier is zero, otherwise a bisection finds the shift that
makes the budget exactly tight.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SolverError
from .state import TimeGrid

BUDGET_TOL = 1e-10
_MAX_BISECT = 200


@dataclass(frozen=True)
class AdmissibleSet:
    """Box bounds [0, 1] on both controls plus a budget on the chemotherapy
    time integral.

    ``c_max`` is the global budget over the space-time cylinder; with
    spatially constant controls the time-integral bound is
    ``c_max / omega_area``.  All experiments run on unit-area domains, where
    the two coincide.
    """

    c_max: float
    omega_area: float = 1.0

    def __post_init__(self):
        if self.c_max <= 0.0:
            raise ValueError("c_max must be positive")
        if self.omega_area <= 0.0:
            raise ValueError("omega_area must be positive")

    @property
    def time_budget(self) -> float:
        return self.c_max / self.omega_area


@dataclass(frozen=True)
class ControlSchedule:
    """Per-interval values of the two therapies on a uniform time grid."""

    grid: TimeGrid
    c: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        s = np.atleast_1d(np.asarray(self.s, dtype=float))
        if c.shape != (self.grid.n_steps,) or s.shape != (self.grid.n_steps,):
            raise ValueError(
                f"control arrays must have length {self.grid.n_steps}"
            )
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "s", s)

    @classmethod
    def constant(cls, grid: TimeGrid, c0: float, s0: float):
        n = grid.n_steps
        return cls(grid, np.full(n, float(c0)), np.full(n, float(s0)))

    def replaced(self, c=None, s=None):
        return replace(self, c=self.c if c is None else c,
                       s=self.s if s is None else s)


def evaluate_budget(c, grid: TimeGrid) -> float:
    """Time integral of a per-step schedule (exact for the representation)."""
    c = np.asarray(c, dtype=float)
    if c.shape[0] != grid.n_steps:
        raise ValueError(f"expected {grid.n_steps} entries, got {c.shape[0]}")
    return float(grid.dt * c.sum())


def clamp_box(v, upper: float = 1.0) -> np.ndarray:
    """Entrywise clip to [0, upper]; idempotent."""
    return np.clip(np.asarray(v, dtype=float), 0.0, upper)


def project_budget(c, admissible: AdmissibleSet, grid: TimeGrid,
                   weight=None, upper: float = 1.0):
    """Project onto {0 <= c <= upper, integral of weight*c <= budget}.

    Returns ``(projected, lam)`` where ``lam`` is the shift multiplier (zero
    when clipping alone satisfies the budget).  ``weight`` generalizes the
    budget density; the default (uniform weight 1) is the case every
    experiment uses.
    """
    c = np.asarray(c, dtype=float)
    if c.shape[0] != grid.n_steps:
        raise ValueError(f"expected {grid.n_steps} entries, got {c.shape[0]}")
    w = np.ones_like(c) if weight is None else np.asarray(weight, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("budget weight must be strictly positive")
    target = admissible.time_budget

    def shifted_budget(lam):
        return float(grid.dt * (clamp_box(c - lam * w, upper) * w).sum())

    base = shifted_budget(0.0)
    if base <= target + BUDGET_TOL:
        return clamp_box(c, upper), 0.0

    # bracket: the budget is continuous and nonincreasing in the shift, with
    # value 0 at max(c / w), so a root of budget - target lies inside
    lo, hi = 0.0, float((c / w).max())
    val_lo, val_hi = base, shifted_budget(hi)
    for _ in range(_MAX_BISECT):
        lam = 0.5 * (lo + hi)
        val = shifted_budget(lam)
        if val > val_lo + BUDGET_TOL or val < val_hi - BUDGET_TOL:
            raise SolverError("budget is not monotone along the bisection")
        if abs(val - target) <= BUDGET_TOL:
            return clamp_box(c - lam * w, upper), lam
        if val > target:
            lo, val_lo = lam, val
        else:
            hi, val_hi = lam, val
    raise SolverError(
        f"budget bisection failed to converge within {_MAX_BISECT} iterations"
    )
