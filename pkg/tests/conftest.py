import numpy as np
import pytest

from tumoropt import (ControlSchedule, CostWeights, ModelParams, TimeGrid,
                      generate_unit_square, initial_oxygen, initial_tumor)


@pytest.fixture(scope="session")
def unit_mesh_8():
    return generate_unit_square(8, 8)


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def weights():
    return CostWeights(k1=1.0, k2=1.0, k3=0.01, k4=0.01, l1=1.0, l2=1.0,
                       sigma_q=1.0, sigma_omega=1.0)


@pytest.fixture(scope="session")
def small_problem(unit_mesh_8, params):
    """8x8 mesh, 20 steps: the standard gradient-test configuration."""
    grid = TimeGrid(dt=0.01, n_steps=20)
    u0 = initial_tumor(unit_mesh_8)
    sigma0 = initial_oxygen(unit_mesh_8, params)
    controls = ControlSchedule(grid, np.full(20, 0.5), np.full(20, 0.5))
    return unit_mesh_8, grid, u0, sigma0, controls
