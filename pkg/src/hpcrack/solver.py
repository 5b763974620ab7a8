"""Damped Newton-Raphson with backtracking line search.

The step acceptance test is the sufficient-decrease inequality
||R(u + alpha*delta)|| <= (1 - gamma*alpha) ||R(u)||; trial states that
leave the admissible constitutive regime count as failed decrease and
backtrack.  The linear sub-solver is a sparse LU factorization with
iterative refinement to meet its residual contract.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import quadrature as quad
from .assembly import LoadSpec, ZERO_LOADS, assemble_residual, assemble_tangent
from .errors import InadmissibleStrain, LineSearchStalled, MaxIterations, SingularMatrix
from .fespace import ConstraintSet, FeFunction
from .material import MaterialParams, vol_response_arrays

logger = logging.getLogger(__name__)

LINEAR_RTOL = 1e-10
_REFINE_STEPS = 3


@dataclass(frozen=True)
class NewtonSettings:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_iters: int = 50
    gamma: float = 1e-4      # sufficient-decrease parameter
    rho: float = 0.5         # backtracking reduction factor
    min_alpha: float = 2.0 ** -20

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")


@dataclass
class NewtonReport:
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    step_lengths: list[float] = field(default_factory=list)
    converged: bool = False


def solve_linear(K: sp.spmatrix, r: np.ndarray) -> np.ndarray:
    """Solve K delta = r to a relative residual of 1e-10.

    Uses sparse LU with a few refinement sweeps; raises SingularMatrix on
    factorization breakdown or if the residual contract cannot be met
    (loss of ellipticity shows up here).
    """
    rnorm = np.linalg.norm(r)
    if rnorm == 0.0:
        return np.zeros_like(r)
    try:
        lu = spla.splu(K.tocsc())
        delta = lu.solve(r)
    except RuntimeError as exc:
        raise SingularMatrix(str(exc)) from exc
    if not np.isfinite(delta).all():
        raise SingularMatrix("factorization produced non-finite entries")
    for _ in range(_REFINE_STEPS):
        resid = r - K @ delta
        if np.linalg.norm(resid) <= LINEAR_RTOL * rnorm:
            return delta
        delta = delta + lu.solve(resid)
    resid = np.linalg.norm(r - K @ delta)
    if resid > LINEAR_RTOL * rnorm:
        raise SingularMatrix(
            f"linear residual {resid:.3e} above {LINEAR_RTOL:.0e} * ||r|| after refinement"
        )
    return delta


@dataclass
class NonlinearProblem:
    """Bundles the discrete operator: space, constraints, material, loads."""

    constraints: ConstraintSet
    params: MaterialParams
    loads: LoadSpec = ZERO_LOADS

    def residual(self, u: FeFunction, permissive: bool = False) -> np.ndarray:
        return assemble_residual(
            u, self.params, self.constraints, self.loads, permissive=permissive
        )

    def tangent(self, u: FeFunction, permissive: bool = False) -> sp.csr_matrix:
        return assemble_tangent(u, self.params, self.constraints, permissive=permissive)

    def min_vol_stiffness(self, u: FeFunction) -> float:
        """Smallest sampled volumetric tangent stiffness (diagnostic)."""
        space = u.space
        u2 = u.coefficients.reshape(space.n_scalar, 2)
        worst = np.inf
        for p in sorted(space.groups()):
            cids, G, _ = space.group_ops(p)
            tab = quad.tabulate(p, p + 2)
            boxes = np.array([space.mesh.cell_box(c) for c in cids])
            scale = 2.0 / boxes[:, 2:4]
            u_loc = (G @ u2).reshape(len(cids), (p + 1) ** 2, 2)
            grad = np.einsum("cni,qnd,cd->cqid", u_loc, tab.gradients, scale)
            xi = grad[:, :, 0, 0] + grad[:, :, 1, 1]
            f_val, f_deriv, _, _ = vol_response_arrays(xi, self.params)
            stiff = 1.0 / self.params.e1 - self.params.e2 * (f_val + xi * f_deriv)
            worst = min(worst, float(stiff.min()))
        return worst


def newton_solve(
    problem: NonlinearProblem,
    u0: FeFunction,
    settings: NewtonSettings = NewtonSettings(),
) -> tuple[FeFunction, NewtonReport]:
    """Newton iteration from u0 (must satisfy the Dirichlet constraints).

    Inadmissible trial states count as failed sufficient decrease and
    backtrack, so every accepted iterate is admissible.  A warm start
    that interpolation pushed marginally outside the admissible set is
    tolerated: its residual and tangent are evaluated permissively and
    the first accepted step restores feasibility (for a transferred
    near-solution the full Newton step does); if no step can reach the
    admissible set the line search stalls honestly.

    Returns the converged state and a report; raises LineSearchStalled
    or MaxIterations (both carrying the partial report).
    """
    cons = problem.constraints
    u = u0.copy()
    report = NewtonReport()
    at_off_start = False
    try:
        r = problem.residual(u)
    except InadmissibleStrain:
        r = problem.residual(u, permissive=True)
        at_off_start = True
        logger.info("newton warm start marginally inadmissible; restoring feasibility")
    norm0 = float(np.linalg.norm(r))
    report.residual_history.append(norm0)
    if norm0 <= settings.abs_tol:
        if at_off_start:
            _raise_first_inadmissible(problem, u)
        report.converged = True
        return u, report

    for k in range(settings.max_iters):
        try:
            delta = solve_linear(problem.tangent(u, permissive=at_off_start), r)
        except SingularMatrix as exc:
            raise SingularMatrix(
                exc.detail,
                beta=problem.params.beta,
                min_vol_stiffness=problem.min_vol_stiffness(u),
            ) from exc
        delta_full = cons.expand(delta)
        rnorm = report.residual_history[-1]
        alpha = 1.0
        while True:
            trial = FeFunction(u.space, u.coefficients + alpha * delta_full)
            try:
                r_trial = problem.residual(trial)
                trial_norm = float(np.linalg.norm(r_trial))
                accepted = trial_norm <= (1.0 - settings.gamma * alpha) * rnorm
            except InadmissibleStrain:
                accepted = False
            if accepted:
                break
            alpha *= settings.rho
            if alpha < settings.min_alpha:
                raise LineSearchStalled(report, alpha)
        u = trial
        r = r_trial
        at_off_start = False
        report.iterations = k + 1
        report.residual_history.append(trial_norm)
        report.step_lengths.append(alpha)
        logger.info(
            "newton iter=%d residual=%.17g alpha=%.17g", k + 1, trial_norm, alpha
        )
        if trial_norm < max(settings.rel_tol * norm0, settings.abs_tol):
            report.converged = True
            return u, report
    raise MaxIterations(report)


def _raise_first_inadmissible(problem, u):
    from .assembly import first_inadmissible
    from .material import critical_thresholds

    info = first_inadmissible(u, problem.params)
    if info is not None:
        xi, cell, qp = info
        raise InadmissibleStrain(
            xi, critical_thresholds(problem.params)[2], cell=cell, qpoint=qp
        )
