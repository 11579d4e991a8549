"""Conforming P1 triangulations: structured generation, file import, geometry.

A mesh is immutable after construction.  All derived geometry needed by the
assembly routines (signed areas, constant basis gradients, quadrature points)
is precomputed once and stored read-only.
"""
from __future__ import annotations

import collections
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshFormatError, MeshValidationError

# Edge-midpoint quadrature on the reference triangle: the three points are the
# midpoints of local edges (0,1), (1,2), (2,0), each with weight area/3.  The
# rule integrates quadratics exactly.  PHI[q, i] is basis function i at point q.
QUAD_PHI = np.array([
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
])


@dataclass(frozen=True)
class Mesh:
    """Triangulation of a 2D polygonal domain.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (E, 3) int array, counterclockwise vertex indices
    boundary_edges : (B, 2) int array, edges owned by exactly one triangle
    areas : (E,) triangle areas (all positive)
    grad_basis : (E, 3, 2) constant gradient of each local P1 basis function
    quad_points : (E, 3, 2) coordinates of the edge-midpoint quadrature points
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray = field(default=None)

    def __post_init__(self):
        verts = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        tris = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)

        _validate_indices(verts, tris)
        areas, grads = _geometry(verts, tris)
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise MeshValidationError(
                f"triangle {bad} has non-positive signed area {areas[bad]:.3e}"
            )
        boundary = _conformity_boundary(tris)
        if self.boundary_edges is None:
            object.__setattr__(self, "boundary_edges", boundary)
        else:
            be = np.asarray(self.boundary_edges, dtype=np.int64)
            if _edge_set(be) != _edge_set(boundary):
                raise MeshValidationError(
                    "declared boundary edges disagree with the edge-count map"
                )
            object.__setattr__(self, "boundary_edges", be)

        quad = np.einsum("ql,elk->eqk", QUAD_PHI, verts[tris])
        object.__setattr__(self, "areas", areas)
        object.__setattr__(self, "grad_basis", grads)
        object.__setattr__(self, "quad_points", quad)
        _check_area_additivity(self)
        for arr in (self.vertices, self.triangles, self.boundary_edges,
                    self.areas, self.grad_basis, self.quad_points):
            arr.setflags(write=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def bbox(self):
        """((xmin, ymin), (xmax, ymax)) of the vertex set."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def area(self) -> float:
        """Total domain area (sum of triangle areas)."""
        return float(self.areas.sum())


def _validate_indices(verts, tris):
    if tris.size == 0:
        raise MeshValidationError("mesh has no triangles")
    if tris.min() < 0 or tris.max() >= verts.shape[0]:
        bad = int(np.argmax((tris < 0) | (tris >= verts.shape[0])) // 3)
        raise MeshValidationError(
            f"triangle {bad} references a vertex index outside [0, {verts.shape[0]})"
        )
    degenerate = (tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) \
        | (tris[:, 0] == tris[:, 2])
    if degenerate.any():
        raise MeshValidationError(
            f"triangle {int(np.argmax(degenerate))} repeats a vertex"
        )


def _geometry(verts, tris):
    """Signed areas and constant P1 basis gradients, vectorized over elements."""
    p = verts[tris]  # (E, 3, 2)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    # grad phi_i = (y_j - y_k, x_k - x_j) / (2A) with (i, j, k) cyclic
    x, y = p[:, :, 0], p[:, :, 1]
    nxt = [1, 2, 0]
    prv = [2, 0, 1]
    gx = y[:, nxt] - y[:, prv]
    gy = x[:, prv] - x[:, nxt]
    grads = np.stack([gx, gy], axis=2) / (2.0 * areas)[:, None, None]
    return areas, grads


def _edge_set(edges):
    return {tuple(sorted(e)) for e in edges.tolist()}


def _conformity_boundary(tris):
    """Edge-count conformity check; returns the boundary edges.

    Every edge must be owned by one triangle (boundary) or two (interior).
    """
    owners = collections.defaultdict(list)
    for t, (a, b, c) in enumerate(tris.tolist()):
        for u, v in ((a, b), (b, c), (c, a)):
            owners[(u, v) if u < v else (v, u)].append(t)
    boundary = []
    for edge, ts in owners.items():
        if len(ts) > 2:
            raise MeshValidationError(
                f"edge {edge} shared by triangles {ts[0]} and {ts[1]} and more: "
                "triangulation is not conforming"
            )
        if len(ts) == 1:
            boundary.append(edge)
    boundary.sort()
    return np.array(boundary, dtype=np.int64).reshape(-1, 2)


def _check_area_additivity(mesh):
    """Sum of triangle areas must match the shoelace area of the boundary."""
    oriented = _oriented_boundary(mesh.triangles, mesh.boundary_edges)
    v = mesh.vertices
    a, b = oriented[:, 0], oriented[:, 1]
    poly = 0.5 * np.sum(v[a, 0] * v[b, 1] - v[b, 0] * v[a, 1])
    total = mesh.areas.sum()
    if abs(total - poly) > 1e-12 * max(abs(poly), 1.0):
        raise MeshValidationError(
            f"triangle areas sum to {total!r} but the boundary encloses {poly!r}"
        )


def _oriented_boundary(tris, boundary_edges):
    """Boundary edges oriented as traversed by their owning (ccw) triangle."""
    wanted = _edge_set(boundary_edges)
    out = []
    for a, b, c in tris.tolist():
        for u, v in ((a, b), (b, c), (c, a)):
            if (min(u, v), max(u, v)) in wanted:
                out.append((u, v))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def generate_unit_square(nx: int, ny: int) -> Mesh:
    """Structured triangulation of [0,1]^2 with (nx+1)(ny+1) vertices.

    Each cell is split along its lower-left to upper-right diagonal, so the
    mesh is deterministic and regression tests stay byte-stable.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"nx and ny must be >= 1, got ({nx}, {ny})")
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return Mesh(vertices, np.array(tris, dtype=np.int64))


def element_geometry(mesh: Mesh, e: int):
    """(area, grad_basis) of triangle ``e``; gradients are (3, 2)."""
    if not 0 <= e < mesh.num_triangles:
        raise ValueError(f"element index {e} outside [0, {mesh.num_triangles})")
    return float(mesh.areas[e]), np.array(mesh.grad_basis[e])


def load_mesh(path, fmt: str) -> Mesh:
    """Import a triangulation from disk.

    ``fmt`` selects the parser: ``"node-ele"`` (two ASCII files sharing a
    basename, 1-based indices) or ``"vtk-legacy-ascii"`` (UNSTRUCTURED_GRID
    with POINTS and triangle cells; z coordinates are dropped).  Clockwise
    triangles are reoriented rather than rejected.
    """
    path = str(path)
    if fmt == "node-ele":
        verts, tris = _read_node_ele(path)
    elif fmt == "vtk-legacy-ascii":
        verts, tris = _read_vtk_legacy(path)
    else:
        raise ValueError(f"unknown mesh format {fmt!r}")
    tris = _reorient(verts, tris)
    return Mesh(verts, tris)


def _reorient(verts, tris):
    if tris.size and (tris.min() < 0 or tris.max() >= verts.shape[0]):
        bad = int(np.argmax((tris < 0) | (tris >= verts.shape[0])) // 3)
        raise MeshValidationError(
            f"triangle {bad} references a vertex index outside "
            f"[0, {verts.shape[0]})"
        )
    p = verts[tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    flipped = tris.copy()
    neg = signed < 0.0
    flipped[neg] = flipped[neg][:, [0, 2, 1]]
    return flipped


def _read_node_ele(path):
    base = path[:-5] if path.endswith(".node") else path
    node_path, ele_path = base + ".node", base + ".ele"
    verts = _parse_node(node_path)
    tris = _parse_ele(ele_path, verts.shape[0])
    return verts, tris


def _parse_node(path):
    lines = _read_lines(path)
    try:
        header = lines[0][1].split()
        count = int(header[0])
    except (IndexError, ValueError) as exc:
        raise MeshFormatError("bad .node header", path, 1) from exc
    verts = np.empty((count, 2))
    seen = 0
    for lineno, text in lines[1:]:
        parts = text.split()
        if len(parts) < 3:
            raise MeshFormatError("expected 'index x y'", path, lineno)
        try:
            idx = int(parts[0]) - 1
            verts[idx] = (float(parts[1]), float(parts[2]))
        except (ValueError, IndexError) as exc:
            raise MeshFormatError(f"bad vertex line: {text!r}", path, lineno) from exc
        seen += 1
    if seen != count:
        raise MeshFormatError(
            f"header promised {count} vertices, file holds {seen}", path, 1
        )
    return verts


def _parse_ele(path, num_vertices):
    lines = _read_lines(path)
    try:
        count = int(lines[0][1].split()[0])
    except (IndexError, ValueError) as exc:
        raise MeshFormatError("bad .ele header", path, 1) from exc
    tris = np.empty((count, 3), dtype=np.int64)
    seen = 0
    for lineno, text in lines[1:]:
        parts = text.split()
        if len(parts) < 4:
            raise MeshFormatError("expected 'index v1 v2 v3'", path, lineno)
        try:
            idx = int(parts[0]) - 1
            tris[idx] = [int(p) - 1 for p in parts[1:4]]
        except (ValueError, IndexError) as exc:
            raise MeshFormatError(f"bad element line: {text!r}", path, lineno) from exc
        seen += 1
    if seen != count:
        raise MeshFormatError(
            f"header promised {count} triangles, file holds {seen}", path, 1
        )
    return tris


def _read_lines(path):
    """Non-empty, non-comment lines with their 1-based line numbers."""
    try:
        with open(path) as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise MeshFormatError(str(exc), path) from exc
    out = []
    for lineno, text in enumerate(raw, start=1):
        stripped = text.split("#", 1)[0].strip()
        if stripped:
            out.append((lineno, stripped))
    if not out:
        raise MeshFormatError("file is empty", path, 1)
    return out


def _read_vtk_legacy(path):
    lines = _read_lines(path)
    tokens = []  # flat token stream with line numbers
    for lineno, text in lines:
        for tok in text.split():
            tokens.append((lineno, tok))

    def find_keyword(word):
        for k, (_, tok) in enumerate(tokens):
            if tok.upper() == word:
                return k
        raise MeshFormatError(f"missing {word} section", path, tokens[-1][0])

    k = find_keyword("POINTS")
    try:
        npts = int(tokens[k + 1][1])
    except (ValueError, IndexError) as exc:
        raise MeshFormatError("bad POINTS count", path, tokens[k][0]) from exc
    coords = []
    pos = k + 3  # skip count and dtype
    for i in range(3 * npts):
        lineno, tok = tokens[pos + i]
        try:
            coords.append(float(tok))
        except ValueError as exc:
            raise MeshFormatError(f"bad coordinate {tok!r}", path, lineno) from exc
    verts = np.array(coords).reshape(npts, 3)[:, :2]

    k = find_keyword("CELLS")
    try:
        ncells = int(tokens[k + 1][1])
    except (ValueError, IndexError) as exc:
        raise MeshFormatError("bad CELLS count", path, tokens[k][0]) from exc
    pos = k + 3
    cells = []
    for _ in range(ncells):
        lineno, tok = tokens[pos]
        try:
            arity = int(tok)
            cells.append([int(tokens[pos + 1 + j][1]) for j in range(arity)])
        except (ValueError, IndexError) as exc:
            raise MeshFormatError("bad cell record", path, lineno) from exc
        pos += arity + 1

    k = find_keyword("CELL_TYPES")
    pos = k + 2
    tris = []
    for c in range(ncells):
        lineno, tok = tokens[pos + c]
        try:
            ctype = int(tok)
        except ValueError as exc:
            raise MeshFormatError(f"bad cell type {tok!r}", path, lineno) from exc
        if ctype == 5:  # VTK_TRIANGLE
            if len(cells[c]) != 3:
                raise MeshFormatError(
                    f"triangle cell {c} has {len(cells[c])} vertices", path, lineno
                )
            tris.append(cells[c])
    if not tris:
        raise MeshFormatError("no triangle cells (type 5) found", path, 1)
    return verts, np.array(tris, dtype=np.int64)
