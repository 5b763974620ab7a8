"""Gauss-Legendre rules and tensor-product shape functions on [-1,1]^2.

The nodal basis uses Gauss-Lobatto points, which keeps hanging-node and
minimum-rule interpolation weights simple and stays well conditioned up
to the maximum degree used here (p = 6).  Cells are axis-aligned
rectangles, so the reference map is affine with a diagonal gradient
transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_GAUSS_POINTS = 16


@dataclass(frozen=True)
class QuadRule:
    """Tensor-product quadrature on the reference cell [-1,1]^2."""

    points: np.ndarray  # (nq, 2)
    weights: np.ndarray  # (nq,)


@dataclass(frozen=True)
class Tabulation:
    """Shape-function values/gradients at the points of a rule.

    values[q, n] and gradients[q, n, d] for the (p+1)^2 scalar tensor
    Lagrange functions, node index n = b*(p+1) + a for node (xi_a, eta_b).
    """

    degree: int
    values: np.ndarray
    gradients: np.ndarray


@lru_cache(maxsize=None)
def gauss_points_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    if not 1 <= n <= MAX_GAUSS_POINTS:
        raise ValueError(f"gauss rule order must be in [1, {MAX_GAUSS_POINTS}], got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> QuadRule:
    """n x n tensor Gauss-Legendre rule, exact for Q_{2n-1}."""
    x, w = gauss_points_1d(n)
    xx, yy = np.meshgrid(x, x, indexing="xy")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    wts = np.outer(w, w).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadRule(points=pts, weights=wts)


@lru_cache(maxsize=None)
def lobatto_nodes(p: int) -> np.ndarray:
    """The p+1 Gauss-Lobatto points on [-1, 1]."""
    if p < 1:
        raise ValueError(f"degree must be >= 1, got {p}")
    if p == 1:
        nodes = np.array([-1.0, 1.0])
    else:
        coeffs = np.zeros(p + 1)
        coeffs[p] = 1.0
        interior = np.polynomial.legendre.Legendre(coeffs).deriv().roots()
        nodes = np.concatenate([[-1.0], np.sort(interior.real), [1.0]])
    nodes.setflags(write=False)
    return nodes


def lagrange_values(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """values[q, i] = L_i(x_q) for the Lagrange basis on `nodes`."""
    x = np.asarray(x, dtype=float)
    n = len(nodes)
    vals = np.ones((x.size, n))
    for i in range(n):
        for j in range(n):
            if j != i:
                vals[:, i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
    return vals


def lagrange_derivs(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """derivs[q, i] = L_i'(x_q)."""
    x = np.asarray(x, dtype=float)
    n = len(nodes)
    out = np.zeros((x.size, n))
    for i in range(n):
        for k in range(n):
            if k == i:
                continue
            term = np.ones(x.size) / (nodes[i] - nodes[k])
            for j in range(n):
                if j != i and j != k:
                    term *= (x - nodes[j]) / (nodes[i] - nodes[j])
            out[:, i] += term
    return out


@lru_cache(maxsize=None)
def tabulate(p: int, n_gauss: int) -> Tabulation:
    """Tensor Lagrange basis of degree p at the n_gauss^2 rule points."""
    return tabulate_at(p, gauss_rule(n_gauss).points)


def tabulate_at(p: int, points) -> Tabulation:
    """Tabulate the degree-p basis at arbitrary reference points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    nodes = lobatto_nodes(p)
    vx = lagrange_values(nodes, pts[:, 0])
    vy = lagrange_values(nodes, pts[:, 1])
    dx = lagrange_derivs(nodes, pts[:, 0])
    dy = lagrange_derivs(nodes, pts[:, 1])
    m = (p + 1) * (p + 1)
    nq = pts.shape[0]
    vals = np.empty((nq, m))
    grads = np.empty((nq, m, 2))
    for b in range(p + 1):
        for a in range(p + 1):
            n = b * (p + 1) + a
            vals[:, n] = vx[:, a] * vy[:, b]
            grads[:, n, 0] = dx[:, a] * vy[:, b]
            grads[:, n, 1] = vx[:, a] * dy[:, b]
    vals.setflags(write=False)
    grads.setflags(write=False)
    return Tabulation(degree=p, values=vals, gradients=grads)


def map_to_physical(box: tuple[float, float, float, float], rule: QuadRule):
    """Physical quadrature data for an axis-aligned rectangle.

    Returns (points (nq,2), grad_scale (2,), measure (nq,)): reference
    gradients multiply componentwise by grad_scale = (2/hx, 2/hy) and the
    measure per point is weight * hx*hy/4.
    """
    x0, y0, hx, hy = box
    if hx <= 0.0 or hy <= 0.0:
        raise ValueError(f"degenerate cell with sides ({hx}, {hy})")
    pts = np.empty_like(rule.points)
    pts[:, 0] = x0 + (rule.points[:, 0] + 1.0) * 0.5 * hx
    pts[:, 1] = y0 + (rule.points[:, 1] + 1.0) * 0.5 * hy
    scale = np.array([2.0 / hx, 2.0 / hy])
    measure = rule.weights * (hx * hy / 4.0)
    return pts, scale, measure
