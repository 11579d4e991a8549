import numpy as np
import pytest
import scipy.sparse as sp

from tumoropt import (Mesh, NumericError, SolverError, assemble_convection,
                      assemble_mass, assemble_stiffness,
                      assemble_weighted_mass, element_gradients,
                      generate_unit_square, l2_project, load_vector,
                      quad_values, solve_sparse)
from tumoropt.model import tumor_profile

REF = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
           np.array([[0, 1, 2]]))


def test_mass_reference_element():
    M = assemble_mass(REF).toarray()
    expected = (0.5 / 12.0) * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]])
    np.testing.assert_allclose(M, expected, atol=1e-14)


def test_mass_sums_to_domain_area():
    for n in (2, 5, 13):
        mesh = generate_unit_square(n, n)
        M = assemble_mass(mesh)
        assert M.sum() == pytest.approx(1.0, abs=1e-12)
        ones = np.ones(mesh.num_vertices)
        assert ones @ (M @ ones) == pytest.approx(1.0, abs=1e-12)


def test_stiffness_reference_element():
    K = assemble_stiffness(REF).toarray()
    expected = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    np.testing.assert_allclose(K, expected, atol=1e-14)


def test_stiffness_annihilates_constants():
    mesh = generate_unit_square(6, 4)
    K = assemble_stiffness(mesh)
    assert np.abs(K @ np.ones(mesh.num_vertices)).max() < 1e-12


def test_stiffness_positive_semidefinite():
    mesh = generate_unit_square(4, 4)
    K = assemble_stiffness(mesh)
    rng = np.random.default_rng(42)
    for _ in range(100):
        x = rng.standard_normal(mesh.num_vertices)
        assert x @ (K @ x) >= -1e-12


def test_weighted_mass_consistent_with_mass():
    mesh = generate_unit_square(5, 5)
    M = assemble_mass(mesh)
    W1 = assemble_weighted_mass(mesh, lambda x, y: np.ones_like(x))
    assert abs(W1 - M).max() < 1e-12
    W3 = assemble_weighted_mass(mesh, lambda x, y: 3.0 * np.ones_like(x))
    assert abs(W3 - 3.0 * M).max() < 1e-12


def test_weighted_mass_linear_weight_reference_element():
    # oracle: integral of x over the reference triangle is 1/6, and the sum
    # of all entries of W equals int x * (sum phi)^2 = int x
    W = assemble_weighted_mass(REF, lambda x, y: x)
    assert W.sum() == pytest.approx(1.0 / 6.0, abs=1e-14)


def test_weighted_mass_rejects_nonfinite():
    mesh = generate_unit_square(2, 2)
    with pytest.raises(NumericError, match="element"):
        assemble_weighted_mass(mesh, lambda x, y: np.full_like(x, np.inf))


def test_convection_zero_field():
    mesh = generate_unit_square(3, 3)
    C = assemble_convection(mesh, np.zeros((mesh.num_triangles, 2)))
    assert abs(C).max() == 0.0


def test_convection_constant_field_telescopes():
    # sum_i (C 1)_i = int b . grad(sum phi_i) = 0
    mesh = generate_unit_square(4, 3)
    C = assemble_convection(mesh, np.array([0.7, -1.3]))
    ones = np.ones(mesh.num_vertices)
    assert abs((C @ ones).sum()) < 1e-13


def test_convection_reference_element_analytic():
    # C_ij = (d phi_i / dx) * int phi_j = grad_x(i) * area / 3
    C = assemble_convection(REF, np.array([1.0, 0.0])).toarray()
    gx = REF.grad_basis[0, :, 0]
    expected = np.outer(gx, np.full(3, 0.5 / 3.0))
    np.testing.assert_allclose(C, expected, atol=1e-15)


def test_convection_pairing_identity():
    # a^T C(w) b equals the directly assembled scalar
    # sum_e int b_h (w . grad a_h), the transpose pairing the costate
    # scheme relies on
    mesh = generate_unit_square(5, 4)
    rng = np.random.default_rng(3)
    a = rng.standard_normal(mesh.num_vertices)
    b = rng.standard_normal(mesh.num_vertices)
    w = rng.standard_normal((mesh.num_triangles, 2))
    C = assemble_convection(mesh, w)
    direct = 0.0
    bq = quad_values(mesh, b)
    grads_a = element_gradients(mesh, a)
    wdot = np.einsum("ek,ek->e", w, grads_a)
    direct = float(np.einsum("e,eq->", mesh.areas / 3.0 * wdot, bq))
    assert a @ (C @ b) == pytest.approx(direct, rel=1e-12)


def test_quad_values_and_gradients_exact_for_linears():
    mesh = generate_unit_square(3, 3)
    nodal = 2.0 * mesh.vertices[:, 0] - 0.5 * mesh.vertices[:, 1] + 1.0
    vals = quad_values(mesh, nodal)
    expected = (2.0 * mesh.quad_points[:, :, 0]
                - 0.5 * mesh.quad_points[:, :, 1] + 1.0)
    np.testing.assert_allclose(vals, expected, atol=1e-14)
    grads = element_gradients(mesh, nodal)
    np.testing.assert_allclose(grads,
                               np.tile([2.0, -0.5], (mesh.num_triangles, 1)),
                               atol=1e-13)


def test_l2_project_reproduces_constants_and_linears():
    mesh = generate_unit_square(6, 6)
    ones = l2_project(mesh, lambda x, y: np.ones_like(x))
    np.testing.assert_allclose(ones, 1.0, atol=1e-10)
    xs = l2_project(mesh, lambda x, y: x)
    np.testing.assert_allclose(xs, mesh.vertices[:, 0], atol=1e-10)


def test_l2_project_preserves_quadrature_integral():
    # Galerkin orthogonality against the constant test function: the
    # projected field carries the same integral as the quadrature of f
    mesh = generate_unit_square(10, 10)
    f = tumor_profile(mesh)
    q = l2_project(mesh, f)
    M = assemble_mass(mesh)
    lhs = (M @ q).sum()
    rhs = load_vector(mesh, f).sum()
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_solve_sparse_identity():
    b = np.array([3.0, -1.0, 2.0])
    x = solve_sparse(sp.identity(3, format="csr"), b)
    np.testing.assert_allclose(x, b, atol=1e-12)


def test_solve_sparse_mass_known_solution():
    mesh = generate_unit_square(5, 5)
    M = assemble_mass(mesh)
    ones = np.ones(mesh.num_vertices)
    x = solve_sparse(M, M @ ones, hint="spd")
    np.testing.assert_allclose(x, ones, atol=1e-10)


def test_solve_sparse_heat_operator_constant():
    mesh = generate_unit_square(6, 6)
    M = assemble_mass(mesh)
    K = assemble_stiffness(mesh)
    A = (M + 0.008 * K).tocsr()
    ones = np.ones(mesh.num_vertices)
    x = solve_sparse(A, M @ ones, hint="spd")
    np.testing.assert_allclose(x, ones, atol=1e-10)


def test_solve_sparse_zero_rhs():
    mesh = generate_unit_square(3, 3)
    M = assemble_mass(mesh)
    x = solve_sparse(M, np.zeros(mesh.num_vertices))
    assert np.linalg.norm(M @ x) <= 1e-12


def test_solve_sparse_dimension_mismatch():
    with pytest.raises(ValueError):
        solve_sparse(sp.identity(3, format="csr"), np.ones(4))


def test_solve_sparse_singular_system_reports_residual():
    # singular matrix with incompatible right-hand side cannot meet the
    # residual target by any method
    A = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(SolverError):
        solve_sparse(A, np.array([1.0, 1.0]), maxiter=50)


def test_nonsymmetric_solve_via_general_hint():
    mesh = generate_unit_square(5, 5)
    M = assemble_mass(mesh)
    C = assemble_convection(mesh, np.array([1.0, 0.4]))
    A = (M + 0.05 * C).tocsr()
    rng = np.random.default_rng(11)
    x_ref = rng.standard_normal(mesh.num_vertices)
    x = solve_sparse(A, A @ x_ref, hint="general")
    np.testing.assert_allclose(x, x_ref, atol=1e-8)
