"""Outer adaptive loop: solve, estimate, record, mark, refine, transfer.

Each cycle performs a Newton solve on the current space (warm started
from the transferred previous solution; the very first solve starts
from the linear beta = 0 state), computes indicators, and adapts.  The
loop stops after the configured cycle count, when the global estimator
drops below eps_tol, or when the DOF cap is hit.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import adaptivity, scenarios
from .adaptivity import AdaptSettings, CellIndicators
from .fespace import build_constraints, distribute_dofs, zero_function
from .mesh import build_initial_mesh
from .solver import NewtonReport, NonlinearProblem, newton_solve

logger = logging.getLogger(__name__)

RUN_CSV_HEADER = "cycle,n_dofs,global_eta,max_p,min_h,newton_iters"


@dataclass
class CycleRow:
    cycle: int
    n_dofs: int
    global_eta: float
    max_p: int
    min_h: float
    newton_iters: int


@dataclass
class RunRecord:
    config: scenarios.ScenarioConfig
    rows: list[CycleRow] = field(default_factory=list)
    early_stop: bool = False
    # final-state handles for downstream extraction
    space: object = None
    constraints: object = None
    solution: object = None
    indicators: CellIndicators | None = None
    reports: list[NewtonReport] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(RUN_CSV_HEADER + "\n")
        for r in self.rows:
            buf.write(
                f"{r.cycle},{r.n_dofs},{r.global_eta:.17g},{r.max_p},"
                f"{r.min_h:.17g},{r.newton_iters}\n"
            )
        return buf.getvalue()


def run(config: scenarios.ScenarioConfig, on_cycle=None) -> RunRecord:
    """Execute the staggered hp-adaptive Newton scheme for one scenario.

    on_cycle(cycle, solution, indicators), when given, fires after each
    cycle's solve+estimate (used by the CLI to snapshot VTU files).
    """
    record = RunRecord(config=config)
    mesh = build_initial_mesh(config.n0)
    degrees = {cid: config.p0 for cid in mesh.leaf_ids()}
    space = distribute_dofs(mesh, degrees, p_max=config.p_max)
    dirichlet, loads = scenarios.setup(config)
    cons = build_constraints(space, dirichlet)
    params = config.material
    adapt_settings = AdaptSettings(
        refine_fraction=config.refine_fraction,
        sigma_threshold=config.sigma_threshold,
        p_max=config.p_max,
    )

    # Initial guess: the linear beta = 0 solution on the coarse space.
    u = zero_function(space)
    u.coefficients = cons.distribute(u.coefficients)
    linear = NonlinearProblem(cons, params.with_beta(0.0), loads)
    u, report = newton_solve(linear, u, config.newton)
    if params.beta != 0.0:
        problem = NonlinearProblem(cons, params, loads)
        u, report = newton_solve(problem, u, config.newton)

    for cycle in range(config.cycles):
        ind = adaptivity.estimate(u)
        min_h = min(space.mesh.cell_diameter(c) for c in space.leaf_order)
        max_p = max(space.degrees.values())
        record.rows.append(
            CycleRow(
                cycle=cycle,
                n_dofs=space.n_dofs,
                global_eta=ind.global_eta,
                max_p=max_p,
                min_h=min_h,
                newton_iters=report.iterations,
            )
        )
        record.space, record.constraints = space, cons
        record.solution, record.indicators = u, ind
        record.reports.append(report)
        if on_cycle is not None:
            on_cycle(cycle, u, ind)
        logger.info(
            "cycle=%d n_dofs=%d global_eta=%.6e max_p=%d min_h=%.3e newton_iters=%d",
            cycle, space.n_dofs, ind.global_eta, max_p, min_h, report.iterations,
        )
        if cycle == config.cycles - 1:
            break
        if config.eps_tol > 0.0 and ind.global_eta < config.eps_tol:
            record.early_stop = True
            break
        result = adaptivity.adapt_cycle(u, cons, dirichlet, adapt_settings, indicators=ind)
        if config.max_dofs is not None and result.space.n_dofs > config.max_dofs:
            record.early_stop = True
            break
        space, cons, u = result.space, result.constraints, result.u0
        problem = NonlinearProblem(cons, params, loads)
        u, report = newton_solve(problem, u, config.newton)
    return record


def sweep_beta(config: scenarios.ScenarioConfig, betas=None) -> dict[float, RunRecord]:
    """Run the scenario once per beta, sharing every other setting."""
    if betas is None:
        betas = config.beta_list
    out = {}
    for beta in betas:
        cfg = replace(config, material=config.material.with_beta(float(beta)))
        out[float(beta)] = run(cfg)
    return out


def fit_rate(record: RunRecord | list[CycleRow]) -> float:
    """Least-squares convergence rate of the estimator against DOFs.

    Fits log(global_eta) vs log(n_dofs) over the last max(4, cycles//2)
    rows and returns the negated slope, so a decaying estimator yields a
    positive rate.
    """
    rows = record.rows if isinstance(record, RunRecord) else record
    if len(rows) < 4:
        raise ValueError(f"need at least 4 recorded cycles to fit a rate, have {len(rows)}")
    window = max(4, len(rows) // 2)
    tail = rows[-window:]
    logn = np.log([r.n_dofs for r in tail])
    loge = np.log([r.global_eta for r in tail])
    return -float(np.polyfit(logn, loge, 1)[0])
