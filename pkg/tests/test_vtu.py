import xml.etree.ElementTree as ET

import numpy as np

from conftest import interpolate, make_mesh, make_space

from hpcrack.adaptivity import estimate
from hpcrack.fespace import zero_function
from hpcrack.vtu import write_vtu


def _load(path):
    tree = ET.parse(path)
    root = tree.getroot()
    assert root.tag == "VTKFile"
    assert root.attrib["type"] == "UnstructuredGrid"
    piece = root.find("UnstructuredGrid/Piece")
    return piece


class TestVtu:
    def test_schema_counts(self, tmp_path):
        space = make_space(make_mesh(2, refine_rounds=[lambda m, c: c == 0]), p=2)
        f = interpolate(space, lambda x, y: x * 0.01, lambda x, y: y * 0.01)
        path = tmp_path / "snap.vtu"
        write_vtu(path, f, estimate(f))
        piece = _load(path)
        n_pts = int(piece.attrib["NumberOfPoints"])
        n_cells = int(piece.attrib["NumberOfCells"])
        assert n_cells == len(space.leaf_order)
        points = piece.find("Points/DataArray").text.split()
        assert len(points) == 3 * n_pts
        conn = piece.find("Cells/DataArray[@Name='connectivity']").text.split()
        assert len(conn) == 4 * n_cells
        types = piece.find("Cells/DataArray[@Name='types']").text.split()
        assert set(types) == {"9"}
        offs = [int(o) for o in piece.find("Cells/DataArray[@Name='offsets']").text.split()]
        assert offs == [4 * (k + 1) for k in range(n_cells)]

    def test_point_data_and_cell_data(self, tmp_path):
        space = make_space(make_mesh(2), p=1)
        f = interpolate(space, lambda x, y: x, lambda x, y: -y)
        path = tmp_path / "snap.vtu"
        write_vtu(path, f)
        piece = _load(path)
        disp = piece.find("PointData/DataArray[@Name='displacement']")
        vals = np.array([float(v) for v in disp.text.split()]).reshape(-1, 3)
        assert np.allclose(vals[:, 2], 0.0)
        pts = np.array(
            [float(v) for v in piece.find("Points/DataArray").text.split()]
        ).reshape(-1, 3)
        assert np.allclose(vals[:, 0], pts[:, 0])
        assert np.allclose(vals[:, 1], -pts[:, 1])
        degree = piece.find("CellData/DataArray[@Name='degree']")
        assert set(degree.text.split()) == {"1"}

    def test_slit_points_duplicated(self, tmp_path):
        space = make_space(make_mesh(4), p=1)
        f = zero_function(space)
        path = tmp_path / "snap.vtu"
        write_vtu(path, f)
        piece = _load(path)
        pts = np.array(
            [float(v) for v in piece.find("Points/DataArray").text.split()]
        ).reshape(-1, 3)
        on_slit = [p for p in pts if p[1] == 0.5 and p[0] > 0.5]
        coords = {(p[0], p[1]) for p in on_slit}
        assert len(on_slit) == 2 * len(coords)
