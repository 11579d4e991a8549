"""Physical parameters, the oxygen-modulated growth rate, and initial data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import l2_project
from .mesh import Mesh


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the tumor-oxygen system.

    Defaults are the reference parameter set used by all experiments:
    tumor diffusivity ``d_u``, carrying capacity ``alpha``, peak growth rate
    ``rho_hat``, hypoxia modulation ``b`` in [0, 1], taxis sensitivity
    ``chi``, cytotoxic intensity ``kappa``; oxygen diffusivity ``d_sigma``,
    Michaelis consumption ``a_ox``/``k_ox``, vascular level ``beta``,
    permeability-density product ``gamma``, angiogenic supply ``s_c``.
    """

    d_u: float = 2.0
    alpha: float = 4.0
    rho_hat: float = 3.5
    b: float = 1.0
    chi: float = 10.0
    kappa: float = 1.0
    d_sigma: float = 0.02
    a_ox: float = 0.6
    k_ox: float = 0.1
    beta: float = 1.0
    gamma: float = 1.0
    s_c: float = 0.4

    def __post_init__(self):
        positive = ["d_u", "alpha", "rho_hat", "chi", "kappa", "d_sigma",
                    "a_ox", "k_ox", "beta", "gamma", "s_c"]
        for name in positive:
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [0, 1]")
        if self.alpha < 1.0:
            raise ValueError("alpha must be >= 1")


def rho(sigma, params: ModelParams):
    """Growth rate (rho_hat/alpha) (s/beta + b (1 - s/beta)).

    Negative oxygen values are clamped to zero before evaluation; the
    discrete scheme can undershoot even though the continuous solution
    stays nonnegative.
    """
    s = np.maximum(np.asarray(sigma, dtype=float), 0.0) / params.beta
    return (params.rho_hat / params.alpha) * (s + params.b * (1.0 - s))


def rho_prime(params: ModelParams) -> float:
    """Exact derivative of the affine growth rate; independent of sigma."""
    return (params.rho_hat / params.alpha) * (1.0 - params.b) / params.beta


def tumor_profile(mesh: Mesh):
    """Pointwise initial tumor density: one Gaussian at the domain center."""
    (xmin, ymin), (xmax, ymax) = mesh.bbox
    xc, yc = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    w = 0.1 * min(xmax - xmin, ymax - ymin)

    def u0(x, y):
        r2 = (x - xc) ** 2 + (y - yc) ** 2
        return 0.6 * np.exp(-r2 / (2.0 * w ** 2))

    return u0


def default_satellites(mesh: Mesh):
    """Off-center oxygen sources creating gradients in two directions."""
    (xmin, ymin), (xmax, ymax) = mesh.bbox
    lx, ly = xmax - xmin, ymax - ymin
    xc, yc = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    return ((xc + 0.25 * lx, yc + 0.10 * ly),
            (xc - 0.20 * lx, yc - 0.15 * ly))


def oxygen_profile(mesh: Mesh, params: ModelParams, satellite_centers=None):
    """Pointwise initial oxygen: background depleted by the tumor plus two
    nearby Gaussian sources of widths 0.08 and 0.025 (times the short box
    side)."""
    (xmin, ymin), (xmax, ymax) = mesh.bbox
    if satellite_centers is None:
        satellite_centers = default_satellites(mesh)
    (x1, y1), (x2, y2) = satellite_centers
    for cx, cy in satellite_centers:
        if not (xmin <= cx <= xmax and ymin <= cy <= ymax):
            raise ValueError(
                f"satellite center ({cx}, {cy}) lies outside the bounding box"
            )
    m = min(xmax - xmin, ymax - ymin)
    w1, w2 = 0.08 * m, 0.025 * m
    u0 = tumor_profile(mesh)
    beta = params.beta

    def sigma0(x, y):
        base = 0.7 * beta * (1.0 - 0.3 * u0(x, y))
        g1 = beta * np.exp(-((x - x1) ** 2 + (y - y1) ** 2) / (2.0 * w1 ** 2))
        g2 = beta * np.exp(-((x - x2) ** 2 + (y - y2) ** 2) / (2.0 * w2 ** 2))
        return base + g1 + g2

    return sigma0


def _discretize(mesh, profile, project):
    if project:
        return l2_project(mesh, profile)
    return profile(mesh.vertices[:, 0], mesh.vertices[:, 1])


def initial_tumor(mesh: Mesh, project: bool = True) -> np.ndarray:
    """Nodal initial tumor density; L2-projected by default, interpolated on
    request (useful in manufactured-solution tests)."""
    return _discretize(mesh, tumor_profile(mesh), project)


def initial_oxygen(mesh: Mesh, params: ModelParams, satellite_centers=None,
                   project: bool = True) -> np.ndarray:
    """Nodal initial oxygen concentration; same convention as initial_tumor."""
    return _discretize(mesh, oxygen_profile(mesh, params, satellite_centers),
                       project)
