"""Legacy ASCII VTK output for field snapshots.

The layout is fixed so golden-file tests can compare bytes: one header
block, POINTS with a zero z-coordinate, triangle CELLS, then one SCALARS
section per field in the order given.  Floats are written with repr-stable
%.17g formatting.
"""
from __future__ import annotations

from .mesh import Mesh


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_vtk(path, mesh: Mesh, fields: dict, title: str = "tumoropt snapshot"):
    """Write nodal scalar ``fields`` (name -> array) on ``mesh`` to ``path``."""
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_vertices} double",
    ]
    for x, y in mesh.vertices:
        lines.append(f"{_fmt(x)} {_fmt(y)} 0")
    ntri = mesh.num_triangles
    lines.append(f"CELLS {ntri} {4 * ntri}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {ntri}")
    lines.extend(["5"] * ntri)
    lines.append(f"POINT_DATA {mesh.num_vertices}")
    for name, values in fields.items():
        if len(values) != mesh.num_vertices:
            raise ValueError(f"field {name!r} has {len(values)} values, "
                             f"mesh has {mesh.num_vertices} vertices")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(v) for v in values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
