"""Variable-degree tensor-product spaces on the slit quad mesh.

Scalar DOFs live on entities: one per mesh vertex, q-1 per face trace
of degree q, (p-1)^2 per cell interior.  The trace degree of a face is
the minimum of the adjacent cell degrees (minimum rule; for a hanging
face the minimum over the coarse cell and both fine children).  Cell
local nodes that do not coincide with an entity DOF (higher-degree
edge nodes against a lower-degree trace, and all fine-side nodes of
hanging faces) are affine combinations of the face trace DOFs; these
weights live in a per-cell gather operator, so local values are always
`gather @ global`.  Hanging midpoint vertices and Dirichlet data are
kept as explicit affine constraints in a ConstraintSet.

The displacement field is vector valued with two components per scalar
DOF, interleaved as vector_dof = 2*scalar_dof + component.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import quadrature as quad
from .mesh import FACES, SIDE_LOWER, SIDE_UPPER, SlitQuadMesh, _OPPOSITE

logger = logging.getLogger(__name__)

P_MAX_DEFAULT = 6

DIRICHLET_PRIORITY = ("bottom", "top", "left", "right", "crack_upper", "crack_lower")


class HpSpace:
    """Global DOF layout for one mesh generation and degree assignment."""

    def __init__(self, mesh: SlitQuadMesh, degrees: dict[int, int], p_max: int = P_MAX_DEFAULT):
        self.mesh = mesh
        self.p_max = p_max
        leafs = mesh.leaf_ids()
        for cid in leafs:
            p = degrees.get(cid)
            if p is None or not 1 <= p <= p_max:
                raise ValueError(f"cell {cid}: degree {p} outside [1, {p_max}]")
        self.degrees = {cid: degrees[cid] for cid in leafs}
        self.leaf_order = list(leafs)

        self.vertex_dof: dict[int, int] = {}
        self._positions: list[tuple[float, float]] = []
        self._sides: list[int] = []
        self.boundary_dofs: dict[str, list[int]] = {}
        self._face_layers: dict[tuple[int, int], tuple[int, tuple[int, ...]]] = {}
        self.hanging: list[tuple[int, tuple[tuple[int, float], ...]]] = []
        self.cell_gather: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

        self._build()
        self.dof_pos = np.array(self._positions)
        self.dof_side = np.array(self._sides, dtype=np.int8)
        self.n_scalar = len(self._positions)
        self.n_dofs = 2 * self.n_scalar
        self._group_cache: dict[int, tuple[np.ndarray, sp.csr_matrix, sp.csr_matrix]] = {}

    # -- construction ---------------------------------------------------

    def _new_dof(self, x: float, y: float, side: int) -> int:
        self._positions.append((x, y))
        self._sides.append(side)
        return len(self._positions) - 1

    def _vertex_dof(self, vid: int) -> int:
        s = self.vertex_dof.get(vid)
        if s is None:
            x, y, side = self.mesh.verts[vid]
            s = self._new_dof(x, y, side)
            self.vertex_dof[vid] = s
        return s

    def _layer(self, key: tuple[int, int], q: int) -> tuple[int, ...]:
        """Get-or-create the q-1 interior trace DOFs of a face location."""
        hit = self._face_layers.get(key)
        if hit is not None:
            stored_q, dofs = hit
            if stored_q != q:
                raise AssertionError(f"inconsistent trace degree at face {key}")
            return dofs
        x0, y0, s0 = self.mesh.verts[key[0]]
        x1, y1, s1 = self.mesh.verts[key[1]]
        side = s0 if s0 != 0 else s1
        nodes = quad.lobatto_nodes(q)[1:q] if q > 1 else np.empty(0)
        dofs = tuple(
            self._new_dof(
                x0 + (t + 1.0) * 0.5 * (x1 - x0),
                y0 + (t + 1.0) * 0.5 * (y1 - y0),
                side,
            )
            for t in nodes
        )
        self._face_layers[key] = (q, dofs)
        return dofs

    def _trace_masters(self, key: tuple[int, int], q: int):
        """Master DOFs of a face trace: endpoint vertices plus layer."""
        layer = self._layer(key, q)
        return (self._vertex_dof(key[0]),) + layer + (self._vertex_dof(key[1]),)

    def _face_setup(self, cid: int):
        """Per-face trace info for one leaf: (key, q, mode, half)."""
        mesh = self.mesh
        p = self.degrees[cid]
        out = {}
        for info in mesh.face_neighbors(cid):
            face = info.face
            if info.kind == "boundary":
                key = mesh.face_endpoints(cid, face)
                out[face] = (key, p, "identified", 0, info)
            elif info.kind == "equal":
                key = mesh.face_endpoints(cid, face)
                q = min(p, self.degrees[info.cells[0]])
                mode = "identified" if q == p else "trace_full"
                out[face] = (key, q, mode, 0, info)
            elif info.kind == "finer":
                key = mesh.face_endpoints(cid, face)
                q = min(p, self.degrees[info.cells[0]], self.degrees[info.cells[1]])
                mode = "identified" if q == p else "trace_full"
                out[face] = (key, q, mode, 0, info)
            else:  # coarser: this cell is one half of the neighbor's face
                coarse = info.cells[0]
                cface = _OPPOSITE[face]
                key = mesh.face_endpoints(coarse, cface)
                fine = mesh.face_neighbors(coarse)
                kids = next(fi.cells for fi in fine if fi.face == cface)
                q = min(self.degrees[coarse], self.degrees[kids[0]], self.degrees[kids[1]])
                half = kids.index(cid)
                out[face] = (key, q, "trace_sub", half, info)
        return out

    def _build(self):
        mesh = self.mesh
        seen_tags: dict[str, set[int]] = {}
        hanging_done: set[int] = set()

        for cid in self.leaf_order:
            p = self.degrees[cid]
            m = (p + 1) * (p + 1)
            nodes_p = quad.lobatto_nodes(p)
            faces = self._face_setup(cid)
            sw, se, nw, ne = mesh.cells[cid].verts
            corner = {(0, 0): sw, (p, 0): se, (0, p): nw, (p, p): ne}
            x0, y0, hx, hy = mesh.cell_box(cid)

            rows_cols: list[np.ndarray] = []
            rows_wts: list[np.ndarray] = []
            counts = np.empty(m, dtype=np.int64)

            for b in range(p + 1):
                for a in range(p + 1):
                    n = b * (p + 1) + a
                    if (a in (0, p)) and (b in (0, p)):
                        cols = np.array([self._vertex_dof(corner[(a, b)])])
                        wts = np.array([1.0])
                    elif b == 0 or b == p or a == 0 or a == p:
                        if b == 0:
                            face, t = "bottom", nodes_p[a]
                        elif b == p:
                            face, t = "top", nodes_p[a]
                        elif a == 0:
                            face, t = "left", nodes_p[b]
                        else:
                            face, t = "right", nodes_p[b]
                        key, q, mode, half, _ = faces[face]
                        if mode == "identified":
                            layer = self._layer(key, q)
                            idx = (a if b in (0, p) else b) - 1
                            cols = np.array([layer[idx]])
                            wts = np.array([1.0])
                        else:
                            if mode == "trace_sub":
                                t = (t - 1.0) * 0.5 if half == 0 else (t + 1.0) * 0.5
                            masters = self._trace_masters(key, q)
                            lw = quad.lagrange_values(quad.lobatto_nodes(q), np.array([t]))[0]
                            cols = np.array(masters)
                            wts = lw.copy()
                    else:
                        xi = nodes_p[a]
                        eta = nodes_p[b]
                        s = self._new_dof(
                            x0 + (xi + 1.0) * 0.5 * hx, y0 + (eta + 1.0) * 0.5 * hy, 0
                        )
                        cols = np.array([s])
                        wts = np.array([1.0])
                    rows_cols.append(cols)
                    rows_wts.append(wts)
                    counts[n] = len(cols)

            indptr = np.zeros(m + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            self.cell_gather[cid] = (
                indptr,
                np.concatenate(rows_cols),
                np.concatenate(rows_wts),
            )

            # Boundary tags and hanging-vertex constraints for this cell.
            for face in FACES:
                key, q, mode, half, info = faces[face]
                if info.kind == "boundary":
                    tag = info.tag
                    bucket = self.boundary_dofs.setdefault(tag, [])
                    seen = seen_tags.setdefault(tag, set())
                    for s in (self._vertex_dof(key[0]),) + self._layer(key, q) + (
                        self._vertex_dof(key[1]),
                    ):
                        if s not in seen:
                            seen.add(s)
                            bucket.append(s)
                elif info.kind == "finer":
                    c1, c2 = info.cells
                    common = set(mesh.face_endpoints(c1, _OPPOSITE[face])) & set(
                        mesh.face_endpoints(c2, _OPPOSITE[face])
                    )
                    (hv,) = common
                    sdof = self._vertex_dof(hv)
                    if sdof not in hanging_done:
                        hanging_done.add(sdof)
                        masters = self._trace_masters(key, q)
                        lw = quad.lagrange_values(
                            quad.lobatto_nodes(q), np.array([0.0])
                        )[0]
                        self.hanging.append(
                            (sdof, tuple(zip(masters, (float(w) for w in lw))))
                        )

    # -- grouped access for vectorized assembly --------------------------

    def groups(self) -> dict[int, np.ndarray]:
        out: dict[int, list[int]] = {}
        for cid in self.leaf_order:
            out.setdefault(self.degrees[cid], []).append(cid)
        return {p: np.array(cids, dtype=np.int64) for p, cids in sorted(out.items())}

    def group_ops(self, p: int):
        """(cell ids, scalar gather, vector gather) for all degree-p cells."""
        if p not in self._group_cache:
            cids = self.groups()[p]
            m = (p + 1) * (p + 1)
            indptrs, cols, wts = [], [], []
            offset = 0
            full_indptr = [np.array([0])]
            for cid in cids:
                indptr, c, w = self.cell_gather[cid]
                full_indptr.append(indptr[1:] + offset)
                offset += indptr[-1]
                cols.append(c)
                wts.append(w)
            G = sp.csr_matrix(
                (np.concatenate(wts), np.concatenate(cols), np.concatenate(full_indptr)),
                shape=(len(cids) * m, self.n_scalar),
            )
            G2 = sp.kron(G, sp.identity(2, format="csr"), format="csr")
            self._group_cache[p] = (cids, G, G2)
        return self._group_cache[p]

    def local_values(self, cid: int, coeffs: np.ndarray) -> np.ndarray:
        """Nodal values (m, 2) of a coefficient vector on one cell."""
        indptr, cols, wts = self.cell_gather[cid]
        u2 = coeffs.reshape(self.n_scalar, 2)
        m = len(indptr) - 1
        out = np.empty((m, 2))
        for n in range(m):
            lo, hi = indptr[n], indptr[n + 1]
            out[n] = wts[lo:hi] @ u2[cols[lo:hi]]
        return out


@dataclass
class FeFunction:
    """Coefficient vector interpreted against an HpSpace."""

    space: HpSpace
    coefficients: np.ndarray

    def copy(self) -> "FeFunction":
        return FeFunction(self.space, self.coefficients.copy())


def zero_function(space: HpSpace) -> FeFunction:
    return FeFunction(space, np.zeros(space.n_dofs))


def distribute_dofs(mesh: SlitQuadMesh, cell_degrees: dict[int, int], p_max: int = P_MAX_DEFAULT) -> HpSpace:
    """Deterministic global DOF numbering for the given degree map."""
    return HpSpace(mesh, cell_degrees, p_max=p_max)


@dataclass
class ConstraintSet:
    """Flattened affine constraints: dof = sum(w * master) + inhomogeneity.

    Covers hanging midpoint vertices and Dirichlet data.  `matrix` maps
    free DOFs to the full vector, `inhom` carries the Dirichlet values,
    so any admissible coefficient vector is matrix @ u_free + inhom.
    """

    n_dofs: int
    rows: dict[int, tuple[tuple[int, ...], tuple[float, ...], float]]
    free: np.ndarray = field(init=False)
    matrix: sp.csr_matrix = field(init=False)
    inhom: np.ndarray = field(init=False)

    def __post_init__(self):
        self.free = np.array(
            [d for d in range(self.n_dofs) if d not in self.rows], dtype=np.int64
        )
        pos = {int(d): k for k, d in enumerate(self.free)}
        data, ri, ci = [], [], []
        b = np.zeros(self.n_dofs)
        for d in range(self.n_dofs):
            row = self.rows.get(d)
            if row is None:
                ri.append(d)
                ci.append(pos[d])
                data.append(1.0)
            else:
                masters, weights, inh = row
                b[d] = inh
                for mdof, w in zip(masters, weights):
                    ri.append(d)
                    ci.append(pos[int(mdof)])
                    data.append(w)
        self.matrix = sp.csr_matrix(
            (data, (ri, ci)), shape=(self.n_dofs, len(self.free))
        )
        self.inhom = b

    @property
    def n_free(self) -> int:
        return len(self.free)

    def distribute(self, vec: np.ndarray) -> np.ndarray:
        """Overwrite constrained entries from masters + inhomogeneity."""
        return self.matrix @ vec[self.free] + self.inhom

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        """Homogeneous lift of a free-DOF increment to the full vector."""
        return self.matrix @ reduced

    def reduce_vector(self, full: np.ndarray) -> np.ndarray:
        return self.matrix.T @ full

    def reduce_matrix(self, K: sp.spmatrix) -> sp.csr_matrix:
        return (self.matrix.T @ K @ self.matrix).tocsr()


def _resolve(rows, dof, cache):
    """Flatten one constraint so no master is itself constrained."""
    if dof in cache:
        return cache[dof]
    masters, weights, inh = rows[dof]
    out: dict[int, float] = {}
    total_inh = inh
    for mdof, w in zip(masters, weights):
        if mdof in rows:
            sub, sub_inh = _resolve(rows, mdof, cache)
            total_inh += w * sub_inh
            for sdof, sw in sub.items():
                out[sdof] = out.get(sdof, 0.0) + w * sw
        else:
            out[mdof] = out.get(mdof, 0.0) + w
    cache[dof] = (out, total_inh)
    return cache[dof]


def _normalize_value(value, pos):
    if callable(value):
        return value(pos[0], pos[1])
    return value


def build_constraints(space: HpSpace, dirichlet_spec: dict) -> ConstraintSet:
    """Hanging-node and Dirichlet constraints for a space.

    dirichlet_spec maps boundary tags to either an (gx, gy) pair (entries
    may be None to leave a component free) or a callable (x, y) -> (gx, gy).
    Conflicting prescriptions at shared corners resolve by the fixed tag
    priority bottom > top > left > right > crack_upper > crack_lower; the
    losing value is logged.
    """
    raw: dict[int, tuple[tuple[int, ...], tuple[float, ...], float]] = {}
    for sdof, masters in space.hanging:
        for comp in (0, 1):
            raw[2 * sdof + comp] = (
                tuple(2 * m + comp for m, _ in masters),
                tuple(w for _, w in masters),
                0.0,
            )

    for tag in DIRICHLET_PRIORITY:
        if tag not in dirichlet_spec:
            continue
        value = dirichlet_spec[tag]
        for s in space.boundary_dofs.get(tag, []):
            gval = _normalize_value(value, space.dof_pos[s])
            for comp in (0, 1):
                g = gval[comp]
                if g is None:
                    continue
                vd = 2 * s + comp
                if vd in raw:
                    prev = raw[vd]
                    if prev[0] == () and abs(prev[2] - g) > 1e-14:
                        logger.info(
                            "dirichlet conflict at dof %d (%.6g, %.6g): "
                            "keeping %.6g from higher-priority tag, dropping %.6g from %s",
                            vd, space.dof_pos[s][0], space.dof_pos[s][1],
                            prev[2], g, tag,
                        )
                    continue
                raw[vd] = ((), (), float(g))

    cache: dict[int, tuple[dict[int, float], float]] = {}
    flat: dict[int, tuple[tuple[int, ...], tuple[float, ...], float]] = {}
    for dof in raw:
        combo, inh = _resolve(raw, dof, cache)
        items = sorted(combo.items())
        flat[dof] = (
            tuple(d for d, _ in items),
            tuple(w for _, w in items),
            inh,
        )
    return ConstraintSet(n_dofs=space.n_dofs, rows=flat)


# -- point evaluation -----------------------------------------------------


def locate_cell(mesh: SlitQuadMesh, x: float, y: float, side: str | None = None) -> int:
    """Leaf cell containing (x, y); `side` breaks ties on horizontal lines.

    side='below' prefers the cell with ymax == y at ties (required for
    points on the lower crack flank); default prefers the cell above.
    """
    tol = 1e-12
    if not (-tol <= x <= 1.0 + tol and -tol <= y <= 1.0 + tol):
        raise ValueError(f"point ({x}, {y}) outside the unit square")
    x = min(max(x, 0.0), 1.0)
    y = min(max(y, 0.0), 1.0)
    below = side == "below"
    n0 = mesh.n0
    i = min(int(x * n0), n0 - 1)
    j = min(int(y * n0), n0 - 1)
    if below and y * n0 == j and j > 0:
        j -= 1
    cid = mesh._key_to_cell[(0, i, j)]
    while not mesh.cells[cid].is_leaf:
        x0, y0, hx, hy = mesh.cell_box(cid)
        xm, ym = x0 + 0.5 * hx, y0 + 0.5 * hy
        a = 1 if x >= xm else 0
        if y > ym:
            b = 1
        elif y < ym:
            b = 0
        else:
            b = 0 if below else 1
        cid = mesh.cells[cid].children[b * 2 + a]
    return cid


def evaluate(f: FeFunction, point, side: str | None = None) -> np.ndarray:
    """Displacement vector at a point (side required on the open slit)."""
    u, _ = evaluate_with_gradient(f, point, side)
    return u


def evaluate_with_gradient(f: FeFunction, point, side: str | None = None):
    """(u (2,), grad_u (2,2)) at a point; grad[i, d] = du_i/dx_d."""
    space = f.space
    x, y = float(point[0]), float(point[1])
    cid = locate_cell(space.mesh, x, y, side)
    x0, y0, hx, hy = space.mesh.cell_box(cid)
    xi = min(max(2.0 * (x - x0) / hx - 1.0, -1.0), 1.0)
    eta = min(max(2.0 * (y - y0) / hy - 1.0, -1.0), 1.0)
    p = space.degrees[cid]
    tab = quad.tabulate_at(p, [(xi, eta)])
    u_loc = space.local_values(cid, f.coefficients)
    u = tab.values[0] @ u_loc
    grad_ref = np.einsum("nd,ni->id", tab.gradients[0], u_loc)
    grad = grad_ref * np.array([2.0 / hx, 2.0 / hy])[None, :]
    return u, grad


def transfer(old: FeFunction, new_space: HpSpace) -> FeFunction:
    """Interpolate a function onto the next space generation.

    Every target DOF is nodal, so the transfer evaluates the old field at
    each DOF position (on the correct crack flank for slit entities).
    Children of refined cells therefore carry the parent polynomial, and
    nested refinements (pure p-raise, h-refine of polynomial data)
    reproduce the old field exactly.
    """
    old_mesh = old.space.mesh
    if new_space.mesh is not old_mesh and new_space.mesh.parent_mesh is not old_mesh:
        raise ValueError(
            "generation mismatch: new space does not derive from the old mesh"
        )
    sides = {0: None, SIDE_UPPER: "above", SIDE_LOWER: "below"}
    coeffs = np.empty(new_space.n_dofs)
    u2 = coeffs.reshape(new_space.n_scalar, 2)
    by_cell: dict[int, list[int]] = {}
    for s in range(new_space.n_scalar):
        x, y = new_space.dof_pos[s]
        side = sides[int(new_space.dof_side[s])]
        cid = locate_cell(old_mesh, x, y, side)
        by_cell.setdefault(cid, []).append(s)
    for cid, sdofs in by_cell.items():
        x0, y0, hx, hy = old_mesh.cell_box(cid)
        pts = np.empty((len(sdofs), 2))
        for k, s in enumerate(sdofs):
            pts[k, 0] = min(max(2.0 * (new_space.dof_pos[s][0] - x0) / hx - 1.0, -1.0), 1.0)
            pts[k, 1] = min(max(2.0 * (new_space.dof_pos[s][1] - y0) / hy - 1.0, -1.0), 1.0)
        tab = quad.tabulate_at(old.space.degrees[cid], pts)
        u_loc = old.space.local_values(cid, old.coefficients)
        u2[sdofs] = tab.values @ u_loc
    return FeFunction(new_space, coeffs)
