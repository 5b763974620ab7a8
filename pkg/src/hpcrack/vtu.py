"""ASCII VTU (XML unstructured grid) writer for solution snapshots.

Emits leaf quads with the point displacement vector (z padded to 0),
cell-wise polynomial degree, and cell-wise Kelly indicator.  The slit
vertices are duplicated in the mesh, so crack opening renders directly.
"""

from __future__ import annotations

import numpy as np

from .adaptivity import CellIndicators
from .fespace import FeFunction

VTK_QUAD = 9


def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in values)


def write_vtu(path, u: FeFunction, indicators: CellIndicators | None = None):
    """Write the displacement field and cell data to an ASCII .vtu file."""
    space = u.space
    mesh = space.mesh
    leaves = space.leaf_order
    used = []
    remap = {}
    for cid in leaves:
        for vid in mesh.cells[cid].verts:
            if vid not in remap:
                remap[vid] = len(used)
                used.append(vid)

    u2 = u.coefficients.reshape(space.n_scalar, 2)
    points, disp = [], []
    for vid in used:
        x, y, _ = mesh.verts[vid]
        points.extend((x, y, 0.0))
        s = space.vertex_dof[vid]
        disp.extend((u2[s, 0], u2[s, 1], 0.0))

    conn, offsets = [], []
    for cid in leaves:
        sw, se, nw, ne = mesh.cells[cid].verts
        conn.extend((remap[sw], remap[se], remap[ne], remap[nw]))
        offsets.append(len(conn))
    degrees = [space.degrees[cid] for cid in leaves]
    if indicators is not None:
        eta = indicators.eta
    else:
        eta = np.zeros(len(leaves))

    lines = [
        '<?xml version="1.0"?>',
        '<VTKFile type="UnstructuredGrid" version="0.1" byte_order="LittleEndian">',
        "  <UnstructuredGrid>",
        f'    <Piece NumberOfPoints="{len(used)}" NumberOfCells="{len(leaves)}">',
        "      <Points>",
        '        <DataArray type="Float64" NumberOfComponents="3" format="ascii">',
        "          " + _fmt(points),
        "        </DataArray>",
        "      </Points>",
        "      <Cells>",
        '        <DataArray type="Int32" Name="connectivity" format="ascii">',
        "          " + " ".join(str(c) for c in conn),
        "        </DataArray>",
        '        <DataArray type="Int32" Name="offsets" format="ascii">',
        "          " + " ".join(str(o) for o in offsets),
        "        </DataArray>",
        '        <DataArray type="UInt8" Name="types" format="ascii">',
        "          " + " ".join(str(VTK_QUAD) for _ in leaves),
        "        </DataArray>",
        "      </Cells>",
        '      <PointData Vectors="displacement">',
        '        <DataArray type="Float64" Name="displacement" NumberOfComponents="3" format="ascii">',
        "          " + _fmt(disp),
        "        </DataArray>",
        "      </PointData>",
        "      <CellData>",
        '        <DataArray type="Int32" Name="degree" format="ascii">',
        "          " + " ".join(str(d) for d in degrees),
        "        </DataArray>",
        '        <DataArray type="Float64" Name="kelly_eta" format="ascii">',
        "          " + _fmt(eta),
        "        </DataArray>",
        "      </CellData>",
        "    </Piece>",
        "  </UnstructuredGrid>",
        "</VTKFile>",
    ]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
