"""The three crack-loading boundary value problems and field extraction.

All scenarios clamp the bottom edge and drive the top edge with a
prescribed displacement: (0, v_bar) for tensile/Mode I, (u_bar, 0) for
shear/Mode II, (u_bar, v_bar) for mixed mode.  Left/right edges and
both crack flanks are traction-free; body forces vanish.  Field
profiles are sampled along the uncracked ligament y = 0.5, x in
[0, 0.5), stopping delta_tip short of the singular tip vertex.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import material as mat
from .assembly import LoadSpec
from .fespace import FeFunction, evaluate, evaluate_with_gradient
from .solver import NewtonSettings

MODES = ("tensile", "shear", "mixed")

TIP_X = 0.5
SLIT_Y = 0.5


@dataclass
class ScenarioConfig:
    mode: str = "tensile"
    u_bar: float = 0.01
    v_bar: float = 0.01
    material: mat.MaterialParams = field(default_factory=mat.default_material)
    beta_list: tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0)
    n0: int = 8
    cycles: int = 8
    p0: int = 2
    p_max: int = 6
    refine_fraction: float = 0.3
    sigma_threshold: float = 2.0
    eps_tol: float = 0.0
    max_dofs: int | None = None
    n_samples: int = 64
    delta_tip: float = 1e-3
    newton: NewtonSettings = field(default_factory=NewtonSettings)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")

    @property
    def top_value(self) -> tuple[float, float]:
        if self.mode == "tensile":
            return (0.0, self.v_bar)
        if self.mode == "shear":
            return (self.u_bar, 0.0)
        return (self.u_bar, self.v_bar)


@dataclass
class LigamentSample:
    x: float
    ux: float
    t22: float
    eps22: float
    sed: float


def setup(config: ScenarioConfig) -> tuple[dict, LoadSpec]:
    """Dirichlet spec and loads for one scenario.

    Only bottom and top edges are constrained; everything else (left,
    right, crack flanks) is homogeneous Neumann, which assembly applies
    by doing nothing.
    """
    dirichlet = {"bottom": (0.0, 0.0), "top": config.top_value}
    return dirichlet, LoadSpec()


def ligament_extract(
    u: FeFunction,
    params: mat.MaterialParams,
    n_samples: int = 64,
    delta_tip: float = 1e-3,
) -> list[LigamentSample]:
    """Fields along the uncracked ligament approaching the tip.

    Samples x uniformly in [0, 0.5 - delta_tip] at y = 0.5 (this segment
    is continuous, so no crack side is involved); strain comes from the
    displacement gradient, stress from the constitutive law, SED from
    0.5 T:eps.  Gradients at inter-cell points are one-sided
    (deterministically from the cell below).
    """
    xs = np.linspace(0.0, TIP_X - delta_tip, n_samples)
    out = []
    for x in xs:
        vec, grad = evaluate_with_gradient(u, (float(x), SLIT_Y), side="below")
        eps = mat.SymTensor2(
            xx=grad[0, 0], yy=grad[1, 1], xy=0.5 * (grad[0, 1] + grad[1, 0])
        )
        t = mat.stress(eps, params)
        out.append(
            LigamentSample(
                x=float(x),
                ux=float(vec[0]),
                t22=float(t.yy),
                eps22=float(eps.yy),
                sed=float(mat.strain_energy_density(eps, t)),
            )
        )
    return out


def crack_jump(u: FeFunction, x: float) -> tuple[float, float]:
    """Displacement jump (upper minus lower flank) at (x, 0.5), x in (0.5, 1)."""
    if not TIP_X < x < 1.0:
        raise ValueError(f"x={x} is outside the open slit segment (0.5, 1.0)")
    above = evaluate(u, (x, SLIT_Y), side="above")
    below = evaluate(u, (x, SLIT_Y), side="below")
    return float(above[0] - below[0]), float(above[1] - below[1])


def jump_profile(u: FeFunction, xs: Iterable[float]) -> list[tuple[float, float, float]]:
    return [(float(x), *crack_jump(u, float(x))) for x in xs]
