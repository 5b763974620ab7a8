"""Global residual and consistent tangent of the discrete problem.

Entries follow the Newton convention: residual_i = -[a(u; phi_i) - L(phi_i)]
for every free test function, and K_ij is the Gateaux derivative of the
semilinear form, so K @ delta = residual is the Newton step.  Constrained
DOFs (hanging vertices, Dirichlet) are condensed symmetrically through the
ConstraintSet, and cell-local trace interpolation is folded in by the
per-degree gather operators, so assembled objects live on free DOFs only.

Cells are processed in deterministic degree-group order with a fixed
chunk size, so repeated assembly of the same state is bitwise
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import quadrature as quad
from .errors import InadmissibleStrain
from .fespace import ConstraintSet, FeFunction, HpSpace
from .material import MaterialParams, critical_thresholds, vol_response_arrays

# Quadrature order: the volumetric term is non-polynomial, two extra
# points beyond exactness for Q_p keep the variational crime negligible.
QUAD_EXTRA = 2

_CHUNK = 512


@dataclass
class LoadSpec:
    """Body force and Neumann tractions.

    body_force(x, y) -> (fx, fy) operates on numpy arrays; tractions maps
    boundary tags to callables with the same convention.  Both default to
    zero (the shipped crack scenarios are displacement driven, crack
    faces traction-free).
    """

    body_force: object | None = None
    tractions: dict[str, object] = field(default_factory=dict)


ZERO_LOADS = LoadSpec()


def _group_geometry(space: HpSpace, cids: np.ndarray, rule: quad.QuadRule):
    boxes = np.array([space.mesh.cell_box(c) for c in cids])
    scale = 2.0 / boxes[:, 2:4]
    measure = rule.weights[None, :] * (boxes[:, 2] * boxes[:, 3] / 4.0)[:, None]
    return boxes, scale, measure


def _strain_state(cids, tab, scale, u_loc, params, permissive):
    """Strains and volumetric response at all quadrature points of a group.

    With permissive=True only pole proximity (non-evaluable states) is
    fatal; off-branch or non-monotone states still raise otherwise.
    """
    grad = np.einsum("cni,qnd,cd->cqid", u_loc, tab.gradients, scale)
    exx = grad[:, :, 0, 0]
    eyy = grad[:, :, 1, 1]
    exy = 0.5 * (grad[:, :, 0, 1] + grad[:, :, 1, 0])
    xi = exx + eyy
    f_val, f_deriv, admissible, evaluable = vol_response_arrays(xi, params)
    bad = ~evaluable if permissive else ~admissible
    if bad.any():
        c, q = np.argwhere(bad)[0]
        raise InadmissibleStrain(
            xi[c, q], critical_thresholds(params)[2],
            cell=int(cids[c]), qpoint=int(q),
        )
    return exx, eyy, exy, xi, f_val, f_deriv


def first_inadmissible(u: FeFunction, params: MaterialParams):
    """(xi, cell, qpoint) of the first inadmissible state, or None."""
    space = u.space
    u2 = u.coefficients.reshape(space.n_scalar, 2)
    for p in sorted(space.groups()):
        cids, G, _ = space.group_ops(p)
        m = (p + 1) * (p + 1)
        tab = quad.tabulate(p, p + QUAD_EXTRA)
        boxes = np.array([space.mesh.cell_box(c) for c in cids])
        scale = 2.0 / boxes[:, 2:4]
        u_loc = (G @ u2).reshape(len(cids), m, 2)
        grad = np.einsum("cni,qnd,cd->cqid", u_loc, tab.gradients, scale)
        xi = grad[:, :, 0, 0] + grad[:, :, 1, 1]
        _, _, admissible, _ = vol_response_arrays(xi, params)
        if not admissible.all():
            c, q = np.argwhere(~admissible)[0]
            return float(xi[c, q]), int(cids[c]), int(q)
    return None


def check_admissible(u: FeFunction, params: MaterialParams) -> bool:
    """True when every quadrature-point volumetric state is admissible."""
    return first_inadmissible(u, params) is None


def assemble_residual(
    u: FeFunction,
    params: MaterialParams,
    constraints: ConstraintSet,
    loads: LoadSpec = ZERO_LOADS,
    permissive: bool = False,
) -> np.ndarray:
    """Condensed residual vector -R(u; phi) over free DOFs.

    u is assumed to satisfy the inhomogeneous Dirichlet constraints (use
    ConstraintSet.distribute on the initial guess).  Raises
    InadmissibleStrain with the offending cell/quadrature point when the
    volumetric state leaves the elliptic regime; permissive=True relaxes
    this to pole proximity only (used for warm starts that interpolation
    pushed marginally across the admissible boundary).
    """
    space = u.space
    u2 = u.coefficients.reshape(space.n_scalar, 2)
    r_full = np.zeros((space.n_scalar, 2))
    for p in sorted(space.groups()):
        cids_all, G_all, _ = space.group_ops(p)
        m = (p + 1) * (p + 1)
        rule = quad.gauss_rule(p + QUAD_EXTRA)
        tab = quad.tabulate(p, p + QUAD_EXTRA)
        u_loc_all = (G_all @ u2).reshape(len(cids_all), m, 2)
        for lo in range(0, len(cids_all), _CHUNK):
            sel = slice(lo, min(lo + _CHUNK, len(cids_all)))
            cids = cids_all[sel]
            boxes, scale, meas = _group_geometry(space, cids, rule)
            u_loc = u_loc_all[sel]
            exx, eyy, exy, xi, f_val, _ = _strain_state(
                cids, tab, scale, u_loc, params, permissive
            )
            inv_e1 = 1.0 / params.e1
            vol = -params.e2 * f_val * xi
            t = np.empty(exx.shape + (2, 2))
            t[:, :, 0, 0] = inv_e1 * exx + vol
            t[:, :, 1, 1] = inv_e1 * eyy + vol
            t[:, :, 0, 1] = inv_e1 * exy
            t[:, :, 1, 0] = t[:, :, 0, 1]
            r_loc = -np.einsum("cq,cqid,qnd,cd->cni", meas, t, tab.gradients, scale)
            if loads.body_force is not None:
                px = boxes[:, 0:1] + (rule.points[None, :, 0] + 1.0) * 0.5 * boxes[:, 2:3]
                py = boxes[:, 1:2] + (rule.points[None, :, 1] + 1.0) * 0.5 * boxes[:, 3:4]
                fx, fy = loads.body_force(px, py)
                fvals = np.stack(np.broadcast_arrays(fx, fy), axis=-1)
                r_loc += np.einsum("cq,cqi,qn->cni", meas, fvals, tab.values)
            rows = slice(lo * m, lo * m + len(cids) * m)
            r_full += G_all[rows].T @ r_loc.reshape(len(cids) * m, 2)
    if loads.tractions:
        _add_tractions(space, loads, r_full)
    r = constraints.reduce_vector(r_full.ravel())
    if not np.isfinite(r).all():
        raise FloatingPointError("non-finite residual entries")
    return r


def _add_tractions(space: HpSpace, loads: LoadSpec, r_full: np.ndarray):
    """Accumulate boundary traction work into the full residual."""
    mesh = space.mesh
    for cid in space.leaf_order:
        for info in mesh.face_neighbors(cid):
            if info.kind != "boundary" or info.tag not in loads.tractions:
                continue
            g = loads.tractions[info.tag]
            p = space.degrees[cid]
            n1d = p + QUAD_EXTRA
            gx, gw = quad.gauss_points_1d(n1d)
            x0, y0, hx, hy = mesh.cell_box(cid)
            if info.face in ("bottom", "top"):
                eta = -1.0 if info.face == "bottom" else 1.0
                ref = np.column_stack([gx, np.full_like(gx, eta)])
                phys_x = x0 + (gx + 1.0) * 0.5 * hx
                phys_y = np.full_like(gx, y0 if info.face == "bottom" else y0 + hy)
                jac = hx / 2.0
            else:
                xi = -1.0 if info.face == "left" else 1.0
                ref = np.column_stack([np.full_like(gx, xi), gx])
                phys_x = np.full_like(gx, x0 if info.face == "left" else x0 + hx)
                phys_y = y0 + (gx + 1.0) * 0.5 * hy
                jac = hy / 2.0
            tab = quad.tabulate_at(p, ref)
            tx, ty = g(phys_x, phys_y)
            tvals = np.stack(np.broadcast_arrays(tx, ty), axis=-1)
            r_loc = np.einsum("q,qi,qn->ni", gw * jac, tvals, tab.values)
            indptr, cols, wts = space.cell_gather[cid]
            for n in range(len(indptr) - 1):
                seg = slice(indptr[n], indptr[n + 1])
                r_full[cols[seg]] += wts[seg, None] * r_loc[n][None, :]


def assemble_tangent(
    u: FeFunction,
    params: MaterialParams,
    constraints: ConstraintSet,
    permissive: bool = False,
) -> sp.csr_matrix:
    """Condensed consistent tangent matrix on free DOFs.

    The volumetric coefficient is the Gateaux-consistent f(xi) + xi f'(xi);
    the matrix is symmetric by construction of the bilinear form.
    """
    space = u.space
    u2 = u.coefficients.reshape(space.n_scalar, 2)
    n_free = constraints.n_free
    K = sp.csr_matrix((n_free, n_free))
    inv_2e1 = 0.5 / params.e1
    for p in sorted(space.groups()):
        cids_all, G_all, G2_all = space.group_ops(p)
        m = (p + 1) * (p + 1)
        rule = quad.gauss_rule(p + QUAD_EXTRA)
        tab = quad.tabulate(p, p + QUAD_EXTRA)
        u_loc_all = (G_all @ u2).reshape(len(cids_all), m, 2)
        P_all = (G2_all @ constraints.matrix).tocsr()
        for lo in range(0, len(cids_all), _CHUNK):
            sel = slice(lo, min(lo + _CHUNK, len(cids_all)))
            cids = cids_all[sel]
            nc = len(cids)
            _, scale, meas = _group_geometry(space, cids, rule)
            exx, eyy, exy, xi, f_val, f_deriv = _strain_state(
                cids, tab, scale, u_loc_all[sel], params, permissive
            )
            c_v = f_val + xi * f_deriv
            g = np.einsum("qnd,cd->cqnd", tab.gradients, scale)
            dot = np.einsum("cq,cqnd,cqmd->cnm", meas, g, g)
            dpair = np.einsum("cq,cqnd,cqme->cndme", meas, g, g)
            dvol = np.einsum("cq,cq,cqnd,cqme->cndme", meas, c_v, g, g)
            k = np.zeros((nc, m, 2, m, 2))
            for i in range(2):
                k[:, :, i, :, i] += inv_2e1 * dot
            k += inv_2e1 * np.transpose(dpair, (0, 1, 4, 3, 2))
            k -= params.e2 * dvol
            kb = k.reshape(nc, 2 * m, 2 * m)
            blocks = sp.bsr_matrix(
                (kb, np.arange(nc), np.arange(nc + 1)),
                shape=(nc * 2 * m, nc * 2 * m),
            )
            P = P_all[lo * 2 * m : (lo * 2 * m) + nc * 2 * m]
            K = K + (P.T @ blocks @ P).tocsr()
    return K
