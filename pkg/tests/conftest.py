import numpy as np
import pytest

from hpcrack import quadrature as quad
from hpcrack.fespace import FeFunction, distribute_dofs
from hpcrack.mesh import REFINE_H, RefinementFlags, build_initial_mesh, refine


def make_mesh(n0=2, refine_rounds=()):
    """Initial mesh, optionally refined; each round is a cell-id predicate."""
    mesh = build_initial_mesh(n0)
    for pred in refine_rounds:
        flags = RefinementFlags({c: REFINE_H for c in mesh.leaf_ids() if pred(mesh, c)})
        mesh = refine(mesh, flags)
    return mesh


def make_space(mesh, p=1, degrees=None, p_max=6):
    if degrees is None:
        degrees = {c: p for c in mesh.leaf_ids()}
    return distribute_dofs(mesh, degrees, p_max=p_max)


def interpolate(space, fx, fy):
    """Entity interpolant: every scalar DOF takes the field value at its node."""
    coeffs = np.zeros(space.n_dofs)
    u2 = coeffs.reshape(space.n_scalar, 2)
    xs = space.dof_pos[:, 0]
    ys = space.dof_pos[:, 1]
    u2[:, 0] = fx(xs, ys)
    u2[:, 1] = fy(xs, ys)
    return FeFunction(space, coeffs)


def eval_on_cell(space, cid, coeffs, pts):
    """Evaluate the local polynomial of one cell at physical points."""
    x0, y0, hx, hy = space.mesh.cell_box(cid)
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    ref = np.empty_like(pts)
    ref[:, 0] = np.clip(2.0 * (pts[:, 0] - x0) / hx - 1.0, -1.0, 1.0)
    ref[:, 1] = np.clip(2.0 * (pts[:, 1] - y0) / hy - 1.0, -1.0, 1.0)
    tab = quad.tabulate_at(space.degrees[cid], ref)
    return tab.values @ space.local_values(cid, coeffs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
