"""Error estimation, smoothness classification, and hp refinement.

h-refinement is driven by the Kelly indicator

    eta_K^2 = (h_K / 24) * sum_faces int_F [d(u_h)/dn]^2 ds

summed over components (boundary and crack faces contribute nothing; at
hanging faces the jump is taken sub-face-wise against the coarse trace).
The h-vs-p decision uses the decay exponent of total-degree groups of
tensor Legendre coefficients: rapid decay marks a cell smooth, slow
decay singular.  Marking is fixed-fraction by eta with deterministic
tie-breaking on cell id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature as quad
from .fespace import (
    ConstraintSet,
    FeFunction,
    HpSpace,
    build_constraints,
    distribute_dofs,
    transfer,
)
from .mesh import RAISE_P, REFINE_H, RefinementFlags, refine

# Smoothness sentinels: +inf = maximally smooth (coefficients below noise),
# -inf = cannot be classified smooth (degree-1 cells have a single mode).
SIGMA_SMOOTH = math.inf
SIGMA_NONSMOOTH = -math.inf

COEFF_FLOOR = 1e-14


@dataclass
class CellIndicators:
    """Per-leaf Kelly values and smoothness exponents."""

    space: HpSpace
    leaf_ids: np.ndarray
    eta: np.ndarray
    sigma: np.ndarray

    @property
    def global_eta(self) -> float:
        return float(np.sqrt(np.sum(self.eta**2)))

    def eta_of(self, cid: int) -> float:
        return float(self.eta[self._index(cid)])

    def sigma_of(self, cid: int) -> float:
        return float(self.sigma[self._index(cid)])

    def _index(self, cid: int) -> int:
        hit = np.nonzero(self.leaf_ids == cid)[0]
        if len(hit) == 0:
            raise KeyError(f"cell {cid} is not a leaf of this space")
        return int(hit[0])


def _normal_deriv(space: HpSpace, u2: np.ndarray, cid: int, pts: np.ndarray, axis: int):
    """d(u)/dn rows (nq, 2) of the local polynomial at physical points."""
    x0, y0, hx, hy = space.mesh.cell_box(cid)
    ref = np.empty_like(pts)
    ref[:, 0] = np.clip(2.0 * (pts[:, 0] - x0) / hx - 1.0, -1.0, 1.0)
    ref[:, 1] = np.clip(2.0 * (pts[:, 1] - y0) / hy - 1.0, -1.0, 1.0)
    p = space.degrees[cid]
    tab = quad.tabulate_at(p, ref)
    u_loc = space.local_values(cid, u2)
    scale = 2.0 / hx if axis == 0 else 2.0 / hy
    return scale * np.einsum("qn,ni->qi", tab.gradients[:, :, axis], u_loc)


def kelly_indicators(u: FeFunction, sigma: np.ndarray | None = None) -> CellIndicators:
    """Kelly flux-jump indicator for every leaf cell."""
    space = u.space
    mesh = space.mesh
    leaf_ids = np.array(space.leaf_order, dtype=np.int64)
    index = {cid: k for k, cid in enumerate(space.leaf_order)}
    acc = np.zeros(len(leaf_ids))
    coeffs = u.coefficients

    for cid in space.leaf_order:
        for info in mesh.face_neighbors(cid):
            if info.kind == "boundary" or info.kind == "coarser":
                continue
            if info.kind == "equal" and info.cells[0] < cid:
                continue
            for nb in info.cells:
                # Integration interval: the fine side's face for hanging
                # pairs, the shared face otherwise.
                owner = nb if info.kind == "finer" else cid
                x0, y0, hx, hy = mesh.cell_box(owner)
                axis = 1 if info.face in ("bottom", "top") else 0
                length = hx if axis == 1 else hy
                cx0, cy0, chx, chy = mesh.cell_box(cid)
                if info.face == "bottom":
                    line = cy0
                elif info.face == "top":
                    line = cy0 + chy
                elif info.face == "left":
                    line = cx0
                else:
                    line = cx0 + chx
                n1d = max(space.degrees[cid], space.degrees[nb]) + 2
                gx, gw = quad.gauss_points_1d(n1d)
                pts = np.empty((len(gx), 2))
                if axis == 1:
                    pts[:, 0] = x0 + (gx + 1.0) * 0.5 * length
                    pts[:, 1] = line
                else:
                    pts[:, 0] = line
                    pts[:, 1] = y0 + (gx + 1.0) * 0.5 * length
                da = _normal_deriv(space, coeffs.reshape(space.n_scalar, 2), cid, pts, axis)
                db = _normal_deriv(space, coeffs.reshape(space.n_scalar, 2), nb, pts, axis)
                jump2 = np.sum((da - db) ** 2, axis=1)
                integral = float(np.sum(gw * jump2) * (length / 2.0))
                acc[index[cid]] += integral
                acc[index[nb]] += integral

    diam = np.array([mesh.cell_diameter(c) for c in leaf_ids])
    eta = np.sqrt(diam / 24.0 * acc)
    if sigma is None:
        sigma = np.full(len(leaf_ids), SIGMA_NONSMOOTH)
    return CellIndicators(space=space, leaf_ids=leaf_ids, eta=eta, sigma=sigma)


def legendre_smoothness(u: FeFunction) -> np.ndarray:
    """Per-leaf decay exponent of total-degree Legendre coefficient groups.

    For each cell and displacement component the tensor coefficients
    a_ij (i + j <= p) are grouped by k = i + j, A_k = max |a_ij|, and
    sigma is the negated least-squares slope of log A_k vs log k over
    the nonzero groups; the cell takes the minimum over components.
    Degree-1 cells classify as SIGMA_NONSMOOTH, cells whose coefficients
    vanish beyond round-off as SIGMA_SMOOTH.
    """
    space = u.space
    u2 = u.coefficients.reshape(space.n_scalar, 2)
    sigma = np.empty(len(space.leaf_order))
    index = {cid: k for k, cid in enumerate(space.leaf_order)}

    for p, cids in space.groups().items():
        if p == 1:
            for cid in cids:
                sigma[index[cid]] = SIGMA_NONSMOOTH
            continue
        _, G, _ = space.group_ops(p)
        m = (p + 1) * (p + 1)
        n1d = p + 1
        rule = quad.gauss_rule(n1d)
        tab = quad.tabulate(p, n1d)
        u_loc = (G @ u2).reshape(len(cids), m, 2)
        vals = np.einsum("cni,qn->cqi", u_loc, tab.values)
        lx = np.polynomial.legendre.legvander(rule.points[:, 0], p)
        ly = np.polynomial.legendre.legvander(rule.points[:, 1], p)
        norm = np.outer(2.0 * np.arange(p + 1) + 1.0, 2.0 * np.arange(p + 1) + 1.0) / 4.0
        coeff = np.einsum("q,cqk,qi,qj->cijk", rule.weights, vals, lx, ly) * norm[None, :, :, None]
        for c, cid in enumerate(cids):
            worst = SIGMA_SMOOTH
            for comp in (0, 1):
                ks, amps = [], []
                for k in range(1, p + 1):
                    a_k = max(
                        abs(coeff[c, i, k - i, comp]) for i in range(k + 1)
                    )
                    if a_k >= COEFF_FLOOR:
                        ks.append(k)
                        amps.append(a_k)
                if len(ks) < 2:
                    s = SIGMA_SMOOTH
                else:
                    slope = np.polyfit(np.log(ks), np.log(amps), 1)[0]
                    s = -float(slope)
                worst = min(worst, s)
            sigma[index[cid]] = worst
    return sigma


def estimate(u: FeFunction) -> CellIndicators:
    """Kelly eta and Legendre sigma in one pass."""
    return kelly_indicators(u, sigma=legendre_smoothness(u))


def mark(
    ind: CellIndicators,
    refine_fraction: float,
    sigma_threshold: float = 2.0,
) -> RefinementFlags:
    """Fixed-fraction marking with the h-vs-p decision.

    The top refine_fraction of leaves by eta (ties to the lower cell id)
    are selected; a selected cell is enriched when its decay exponent
    exceeds sigma_threshold and its degree can still grow, subdivided
    otherwise.
    """
    if not 0.0 < refine_fraction <= 1.0:
        raise ValueError(f"refine_fraction must lie in (0, 1], got {refine_fraction}")
    space = ind.space
    n = len(ind.leaf_ids)
    count = int(math.floor(refine_fraction * n + 0.5))
    order = sorted(range(n), key=lambda k: (-ind.eta[k], ind.leaf_ids[k]))
    flags = RefinementFlags()
    for k in order[:count]:
        cid = int(ind.leaf_ids[k])
        p = space.degrees[cid]
        if ind.sigma[k] > sigma_threshold and p < space.p_max:
            flags.flags[cid] = RAISE_P
        else:
            flags.flags[cid] = REFINE_H
    return flags


@dataclass
class AdaptSettings:
    refine_fraction: float = 0.3
    sigma_threshold: float = 2.0
    p_max: int = 6


@dataclass
class AdaptResult:
    space: HpSpace
    constraints: ConstraintSet
    u0: FeFunction
    flags: RefinementFlags
    indicators: CellIndicators


def apply_marks(
    u: FeFunction,
    flags: RefinementFlags,
    dirichlet_spec: dict,
    p_max: int,
) -> tuple[HpSpace, ConstraintSet, FeFunction]:
    """Refine/enrich per flags, rebuild constraints, transfer the solution."""
    space = u.space
    new_mesh = refine(space.mesh, flags)
    raised = set(flags.raise_set())
    new_degrees: dict[int, int] = {}
    for cid in new_mesh.leaf_ids():
        cell = new_mesh.cells[cid]
        src = cell.parent if cid >= len(space.mesh.cells) else cid
        base = space.degrees[src]
        if src in raised:
            base = min(base + 1, p_max)
        new_degrees[cid] = base
    new_space = distribute_dofs(new_mesh, new_degrees, p_max=p_max)
    new_cons = build_constraints(new_space, dirichlet_spec)
    u0 = transfer(u, new_space)
    u0.coefficients = new_cons.distribute(u0.coefficients)
    return new_space, new_cons, u0


def adapt_cycle(
    u: FeFunction,
    constraints: ConstraintSet,
    dirichlet_spec: dict,
    settings: AdaptSettings = AdaptSettings(),
    indicators: CellIndicators | None = None,
) -> AdaptResult:
    """One Estimate -> Mark -> Refine -> Transfer step of the outer loop."""
    if indicators is None:
        indicators = estimate(u)
    flags = mark(indicators, settings.refine_fraction, settings.sigma_threshold)
    if not flags.flags:
        return AdaptResult(u.space, constraints, u.copy(), flags, indicators)
    new_space, new_cons, u0 = apply_marks(u, flags, dirichlet_spec, settings.p_max)
    return AdaptResult(new_space, new_cons, u0, flags, indicators)
