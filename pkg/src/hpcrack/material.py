"""Density-dependent nonlinear constitutive law and its consistent tangent.

The stress law is

    T(eps) = (1/E1) eps - E2 * f(xi) * xi * I,      xi = tr(eps),
    f(xi)  = (1 + beta*xi) / (E1 + d*E2*(1 + beta*xi)),

a nonlinear volumetric perturbation of isotropic linear elasticity
(recovered exactly at beta = 0).  The module also provides the
linear-fractional response functions phi1/phi2 used for parameter
exploration, their pole locations, and the strain-energy-density
postprocessor.  All functions are pure; scalar formulas accept numpy
arrays elementwise where noted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InadmissibleStrain, PoleProximity

# Absolute guard for the O(1)-normalized pole factors of phi1/phi2.
PHI_DENOM_TOL = 1e-12
# Relative guard for the constitutive denominator E1 + d*E2*(1 + beta*xi).
DENOM_TOL_REL = 1e-12

#: Sentinel returned by critical_thresholds for a non-existent threshold.
UNBOUNDED = math.inf


@dataclass(frozen=True)
class MaterialParams:
    """Constitutive constants.

    e1, e2 are the compliance coefficients (e1 = (1+nu)/E > 0,
    e2 = -nu/E for the linear-elastic limit), beta the volumetric
    nonlinearity parameter, d the constitutive dimension constant.
    a1, a2, a3 only enter the phi1/phi2 response-function exploration.
    """

    e1: float
    e2: float
    beta: float = 0.0
    d: int = 2
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0

    def __post_init__(self):
        if not self.e1 > 0:
            raise ValueError(f"e1 must be positive, got {self.e1}")
        if self.d not in (2, 3):
            raise ValueError(f"d must be 2 or 3, got {self.d}")
        if self.e1 + self.d * self.e2 == 0:
            raise ValueError("e1 + d*e2 must be nonzero")

    def with_beta(self, beta: float) -> "MaterialParams":
        return replace(self, beta=beta)

    @property
    def denom_tol(self) -> float:
        return DENOM_TOL_REL * abs(self.e1 + self.d * self.e2)


def from_young_poisson(E: float, nu: float, beta: float = 0.0, d: int = 2) -> MaterialParams:
    """Map engineering constants to (e1, e2) compliance coefficients."""
    return MaterialParams(e1=(1.0 + nu) / E, e2=-nu / E, beta=beta, d=d)


def default_material(beta: float = 0.0) -> MaterialParams:
    """Default solid: E = 1, nu = 0.3, hence e1 = 1.3, e2 = -0.3, d = 2."""
    return from_young_poisson(1.0, 0.3, beta=beta, d=2)


def lame_constants(E: float, nu: float) -> tuple[float, float]:
    """Lame constants (lambda, mu) of the linear-elastic limit."""
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


@dataclass(frozen=True)
class SymTensor2:
    """Symmetric 2x2 tensor with three stored components."""

    xx: float
    yy: float
    xy: float = 0.0

    @property
    def trace(self) -> float:
        return self.xx + self.yy

    def dot(self, other: "SymTensor2") -> float:
        """Frobenius inner product; the xy component counts twice."""
        return self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def __add__(self, other: "SymTensor2") -> "SymTensor2":
        return SymTensor2(self.xx + other.xx, self.yy + other.yy, self.xy + other.xy)

    def __sub__(self, other: "SymTensor2") -> "SymTensor2":
        return SymTensor2(self.xx - other.xx, self.yy - other.yy, self.xy - other.xy)

    def __mul__(self, a: float) -> "SymTensor2":
        return SymTensor2(a * self.xx, a * self.yy, a * self.xy)

    __rmul__ = __mul__


@dataclass(frozen=True)
class VolumetricState:
    """f(xi), f'(xi) and the ellipticity flag at one volumetric strain."""

    xi: float
    f_val: float
    f_deriv: float
    admissible: bool


@dataclass(frozen=True)
class TangentOperator:
    """Consistent derivative of the stress law at a fixed strain state.

    Applies  d_eps -> inv_e1 * d_eps + vol_coeff * tr(d_eps) * I  with
    vol_coeff = -e2 * (f(xi) + xi*f'(xi)).
    """

    inv_e1: float
    vol_coeff: float

    def apply(self, d_eps: SymTensor2) -> SymTensor2:
        tr = d_eps.trace
        return SymTensor2(
            self.inv_e1 * d_eps.xx + self.vol_coeff * tr,
            self.inv_e1 * d_eps.yy + self.vol_coeff * tr,
            self.inv_e1 * d_eps.xy,
        )


def _phi_denominator(tr_t, p: MaterialParams):
    """The two pole factors shared by phi1 and phi2."""
    c2 = p.a3 - p.e1 * p.a1 - p.d * p.e2 * p.a2
    return 1.0 + p.a3 * tr_t, 1.0 + c2 * tr_t


def phi1(tr_t: float, p: MaterialParams) -> float:
    """First linear-fractional response function.

    Raises PoleProximity when either denominator factor falls within
    PHI_DENOM_TOL of zero, i.e. tr_t at or near T_cr1 or T_cr2.
    """
    d1, d2 = _phi_denominator(tr_t, p)
    if abs(d1) < PHI_DENOM_TOL or abs(d2) < PHI_DENOM_TOL:
        raise PoleProximity(tr_t, d1 if abs(d1) < abs(d2) else d2)
    num = 1.0 + (p.a3 + (p.a1 - p.a2) * p.e2 * p.d) * tr_t
    return num / (d1 * d2)


def phi2(tr_t: float, p: MaterialParams) -> float:
    """Second linear-fractional response function (companion of phi1)."""
    d1, d2 = _phi_denominator(tr_t, p)
    if abs(d1) < PHI_DENOM_TOL or abs(d2) < PHI_DENOM_TOL:
        raise PoleProximity(tr_t, d1 if abs(d1) < abs(d2) else d2)
    num = 1.0 + (p.a3 + (p.a1 - p.a2) * p.e1) * tr_t
    return num / (d1 * d2)


def critical_thresholds(p: MaterialParams) -> tuple[float, float, float]:
    """Pole locations (t_cr1, t_cr2) of phi1/phi2 and the critical
    volumetric strain xi_crit of the stress law.

    Components without a finite threshold return the UNBOUNDED sentinel
    (a3 = 0, degenerate second factor, or beta*e2 = 0 respectively).
    """
    t_cr1 = -1.0 / p.a3 if p.a3 != 0.0 else UNBOUNDED
    c2 = p.a3 - p.e1 * p.a1 - p.d * p.e2 * p.a2
    t_cr2 = -1.0 / c2 if c2 != 0.0 else UNBOUNDED
    dd = p.d * p.e2 * p.beta
    xi_crit = -(p.e1 + p.d * p.e2) / dd if dd != 0.0 else UNBOUNDED
    return t_cr1, t_cr2, xi_crit


def vol_response(xi, p: MaterialParams):
    """Scalar volumetric function f(xi), its derivative, and admissibility.

    f(xi)  = (1 + beta*xi) / (E1 + d*E2*(1 + beta*xi))
    f'(xi) = beta*E1 / (E1 + d*E2*(1 + beta*xi))^2

    The closed-form derivative is validated against finite differences in
    the test suite.  Admissibility requires the denominator to stay away
    from zero ON THE BRANCH CONNECTED TO xi = 0 (states across the pole
    are non-physical even when the denominator is large again) together
    with the volumetric monotonicity condition 1/E1 - E2*(f + xi*f') > 0.
    """
    num = 1.0 + p.beta * xi
    den = p.e1 + p.d * p.e2 * num
    den0 = p.e1 + p.d * p.e2
    same_branch = den * den0 > 0.0
    if abs(den) <= p.denom_tol or not same_branch:
        return VolumetricState(xi=xi, f_val=math.inf, f_deriv=math.inf, admissible=False)
    f_val = num / den
    f_deriv = p.beta * p.e1 / (den * den)
    stiff = 1.0 / p.e1 - p.e2 * (f_val + xi * f_deriv)
    return VolumetricState(xi=xi, f_val=f_val, f_deriv=f_deriv, admissible=stiff > 0.0)


def vol_response_arrays(xi: np.ndarray, p: MaterialParams):
    """Vectorized f, f', admissibility and evaluability masks.

    evaluable only requires the denominator to clear the pole tolerance
    (either branch); admissible additionally demands the zero-connected
    branch and the monotonicity bound, matching the scalar vol_response.
    """
    num = 1.0 + p.beta * xi
    den = p.e1 + p.d * p.e2 * num
    den0 = p.e1 + p.d * p.e2
    evaluable = np.abs(den) > p.denom_tol
    safe = np.where(evaluable, den, 1.0)
    f_val = num / safe
    f_deriv = p.beta * p.e1 / (safe * safe)
    stiff = 1.0 / p.e1 - p.e2 * (f_val + xi * f_deriv)
    admissible = evaluable & (den * den0 > 0.0) & (stiff > 0.0)
    return f_val, f_deriv, admissible, evaluable


def stress(eps: SymTensor2, p: MaterialParams) -> SymTensor2:
    """Cauchy stress T = (1/E1) eps - E2 f(xi) xi I at xi = tr(eps)."""
    xi = eps.trace
    state = vol_response(xi, p)
    if not state.admissible:
        raise InadmissibleStrain(xi, critical_thresholds(p)[2])
    vol = -p.e2 * state.f_val * xi
    inv_e1 = 1.0 / p.e1
    return SymTensor2(inv_e1 * eps.xx + vol, inv_e1 * eps.yy + vol, inv_e1 * eps.xy)


def tangent(eps: SymTensor2, p: MaterialParams) -> TangentOperator:
    """Consistent (Gateaux) tangent of the stress law at eps.

    The volumetric derivative of f(xi)*xi in direction d_xi is
    [f(xi) + xi f'(xi)] * d_xi; the resulting bilinear form is symmetric.
    """
    xi = eps.trace
    state = vol_response(xi, p)
    if not state.admissible:
        raise InadmissibleStrain(xi, critical_thresholds(p)[2])
    c_v = state.f_val + xi * state.f_deriv
    return TangentOperator(inv_e1=1.0 / p.e1, vol_coeff=-p.e2 * c_v)


def strain_energy_density(eps: SymTensor2, t: SymTensor2) -> float:
    """Pointwise energy surrogate 0.5 * (T : eps)."""
    return 0.5 * t.dot(eps)
