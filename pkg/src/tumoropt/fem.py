"""P1 assembly, L2 projection, and the sparse linear solve used everywhere.

Constant-coefficient mass and stiffness matrices are assembled from their
closed-form element matrices.  Everything with a variable coefficient goes
through the 3-point edge-midpoint rule (degree-2 exact), which reproduces the
exact mass matrix when the weight is 1, so the two paths agree entrywise.

Nodal fields are plain float arrays of length ``mesh.num_vertices``; every
solve checks the result for NaN/Inf before returning it.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericError, SolverError
from .mesh import Mesh, QUAD_PHI

# local (i, j) index pattern for scattering 3x3 element matrices
_ROWS = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
_COLS = np.array([0, 1, 2, 0, 1, 2, 0, 1, 2])

_MASS_REF = np.array([
    [2.0, 1.0, 1.0],
    [1.0, 2.0, 1.0],
    [1.0, 1.0, 2.0],
]) / 12.0


def _scatter(mesh: Mesh, element_matrices: np.ndarray) -> sp.csr_matrix:
    """Accumulate (E, 3, 3) element matrices into a V x V CSR matrix."""
    tris = mesh.triangles
    rows = tris[:, _ROWS].ravel()
    cols = tris[:, _COLS].ravel()
    vals = element_matrices.reshape(-1, 9).ravel()
    n = mesh.num_vertices
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Mass matrix M_ij = (phi_i, phi_j), assembled exactly."""
    Ke = mesh.areas[:, None, None] * _MASS_REF[None, :, :]
    return _scatter(mesh, Ke)


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """Stiffness matrix K_ij = (grad phi_i, grad phi_j); K @ 1 = 0 (pure Neumann)."""
    g = mesh.grad_basis
    Ke = mesh.areas[:, None, None] * np.einsum("eik,ejk->eij", g, g)
    return _scatter(mesh, Ke)


def quad_values(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """Evaluate a nodal field at the (E, 3) quadrature points."""
    return np.einsum("ql,el->eq", QUAD_PHI, nodal[mesh.triangles])


def element_gradients(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """Piecewise-constant gradient (E, 2) of a nodal P1 field."""
    return np.einsum("el,elk->ek", nodal[mesh.triangles], mesh.grad_basis)


def _weight_at_quad(mesh, weight):
    if callable(weight):
        pts = mesh.quad_points
        w = np.asarray(weight(pts[:, :, 0], pts[:, :, 1]), dtype=float)
        w = np.broadcast_to(w, (mesh.num_triangles, 3))
    else:
        w = np.broadcast_to(np.asarray(weight, dtype=float),
                            (mesh.num_triangles, 3))
    if not np.isfinite(w).all():
        e, q = np.argwhere(~np.isfinite(w))[0]
        raise NumericError(
            f"weight is not finite at element {e}, quadrature point {q}"
        )
    return w


def assemble_weighted_mass(mesh: Mesh, weight) -> sp.csr_matrix:
    """Weighted mass W_ij = sum_e sum_q w_q weight(x_q) phi_i(x_q) phi_j(x_q).

    ``weight`` is either a vectorized callable ``weight(x, y)`` or an array
    broadcastable to (E, 3) of values at the quadrature points.
    """
    w = _weight_at_quad(mesh, weight)
    scale = mesh.areas / 3.0
    Ke = np.einsum("e,eq,qi,qj->eij", scale, w, QUAD_PHI, QUAD_PHI)
    return _scatter(mesh, Ke)


def assemble_convection(mesh: Mesh, vector_field) -> sp.csr_matrix:
    """Convection matrix C_ij = sum_e int_e phi_j (b_e . grad phi_i).

    ``vector_field`` is (E, 2), constant per element (a (2,) constant is
    broadcast).  Rows are indexed by the test function carrying the gradient,
    so ``C @ u`` pairs the interpolant of ``u`` against ``b . grad phi_i``.
    """
    b = np.broadcast_to(np.asarray(vector_field, dtype=float),
                        (mesh.num_triangles, 2))
    if not np.isfinite(b).all():
        e = int(np.argwhere(~np.isfinite(b))[0][0])
        raise NumericError(f"vector field is not finite on element {e}")
    dot = np.einsum("ek,eik->ei", b, mesh.grad_basis)  # b . grad phi_i
    colsum = QUAD_PHI.sum(axis=0)  # integral weights of phi_j under the rule
    Ke = (mesh.areas / 3.0)[:, None, None] * dot[:, :, None] * colsum[None, None, :]
    return _scatter(mesh, Ke)


def load_vector(mesh: Mesh, f) -> np.ndarray:
    """Load vector b_i = int f phi_i under the 3-point rule.

    ``f`` is a vectorized callable ``f(x, y)`` or an array broadcastable to
    (E, 3) of values at the quadrature points.
    """
    w = _weight_at_quad(mesh, f)
    contrib = np.einsum("e,eq,qi->ei", mesh.areas / 3.0, w, QUAD_PHI)
    b = np.zeros(mesh.num_vertices)
    np.add.at(b, mesh.triangles, contrib)
    return b


def triple_product(mesh: Mesh, *quad_fields) -> float:
    """Integral of a pointwise product of fields given at quadrature points."""
    prod = np.ones((mesh.num_triangles, 3))
    for f in quad_fields:
        prod = prod * np.broadcast_to(np.asarray(f, dtype=float), prod.shape)
    return float(np.einsum("e,eq->", mesh.areas / 3.0, prod))


def l2_project(mesh: Mesh, f, mass: sp.csr_matrix | None = None) -> np.ndarray:
    """L2 projection onto the P1 space: solve M q = (f, phi_i)."""
    M = assemble_mass(mesh) if mass is None else mass
    b = load_vector(mesh, f)
    return solve_sparse(M, b, hint="spd")


def solve_sparse(A, b, hint="general", rtol=1e-12, maxiter=None, x0=None):
    """Solve A x = b to a relative residual of ``rtol``.

    The default target is two orders tighter than the 1e-10 the callers
    rely on, so identities built from several solves (transpose pairings,
    linearity in sources) still close at 1e-10.  ``hint="spd"`` uses
    diagonally preconditioned CG, ``"general"`` BiCGStab (the state and
    adjoint operators are nonsymmetric through the taxis terms).  The
    iteration cap defaults to 10 V.  If the iteration stalls the system is
    refactored directly; a solve that still misses the residual target
    raises ``SolverError`` with the achieved residual.
    """
    A = A.tocsr()
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape[0] != A.shape[1] or b.shape[0] != n:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b has {b.shape}")
    if maxiter is None:
        maxiter = 10 * n
    bnorm = np.linalg.norm(b)

    if bnorm == 0.0 and x0 is None:
        return np.zeros(n)

    diag = A.diagonal().copy()
    diag[diag == 0.0] = 1.0
    precond = spla.LinearOperator((n, n), matvec=lambda v: v / diag)
    method = spla.cg if hint == "spd" else spla.bicgstab
    try:
        x, _ = method(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter,
                      M=precond)
    except TypeError:  # older scipy spelled the keyword 'tol'
        x, _ = method(A, b, x0=x0, tol=rtol, atol=0.0, maxiter=maxiter,
                      M=precond)

    if _residual_ok(A, x, b, bnorm, rtol):
        return _checked(x)

    try:
        x = spla.splu(A.tocsc()).solve(b)
    except RuntimeError as exc:
        raise SolverError(f"direct factorization failed: {exc}") from exc
    if _residual_ok(A, x, b, bnorm, rtol):
        return _checked(x)
    achieved = np.linalg.norm(A @ x - b) / (bnorm if bnorm > 0 else 1.0)
    raise SolverError("linear solve missed the residual target",
                      residual=achieved)


def _residual_ok(A, x, b, bnorm, rtol):
    if x is None or not np.isfinite(x).all():
        return False
    r = np.linalg.norm(A @ x - b)
    if bnorm == 0.0:
        return r <= 1e-12
    return r <= rtol * bnorm


def _checked(x):
    if not np.isfinite(x).all():
        raise SolverError("solution contains non-finite entries")
    return x
