"""Exception types shared across the solver stack."""


class HpCrackError(Exception):
    """Base class for all solver-specific failures."""


class PoleProximity(HpCrackError):
    """A response-function denominator is at or numerically near a pole."""

    def __init__(self, tr_t, denom):
        self.tr_t = tr_t
        self.denom = denom
        super().__init__(
            f"response function evaluated at tr(T)={tr_t:.6g}: "
            f"denominator factor {denom:.3e} within pole tolerance"
        )


class InadmissibleStrain(HpCrackError):
    """Volumetric strain outside the elliptic regime of the constitutive law.

    Carries the offending volumetric strain and the critical value; when
    raised from assembly, also the cell id and quadrature point index.
    """

    def __init__(self, xi, xi_crit, cell=None, qpoint=None):
        self.xi = xi
        self.xi_crit = xi_crit
        self.cell = cell
        self.qpoint = qpoint
        loc = "" if cell is None else f" (cell {cell}, qp {qpoint})"
        super().__init__(
            f"inadmissible volumetric strain xi={xi:.6g}, "
            f"xi_crit={xi_crit:.6g}{loc}"
        )


class SolverError(HpCrackError):
    """Base class for nonlinear/linear solver failures."""


class SingularMatrix(SolverError):
    """Linear sub-solve failed; usually signals loss of ellipticity."""

    def __init__(self, detail, beta=None, min_vol_stiffness=None):
        self.detail = detail
        self.beta = beta
        self.min_vol_stiffness = min_vol_stiffness
        extra = ""
        if beta is not None:
            extra = f" [beta={beta:.6g}, min_vol_stiffness={min_vol_stiffness:.6g}]"
        super().__init__(f"singular tangent system: {detail}{extra}")


class LineSearchStalled(SolverError):
    """Backtracking reduced the step below min_alpha without Armijo decrease."""

    def __init__(self, report, alpha):
        self.report = report
        self.alpha = alpha
        super().__init__(
            f"line search stalled at alpha={alpha:.3e} "
            f"after {report.iterations} Newton iterations"
        )


class MaxIterations(SolverError):
    """Newton iteration budget exhausted without convergence."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"Newton did not converge in {report.iterations} iterations "
            f"(last residual {report.residual_history[-1]:.3e})"
        )
