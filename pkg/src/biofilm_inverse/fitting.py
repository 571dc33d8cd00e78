"""Least-squares estimation of the model constants from flux and biomass data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ResidualEvaluationError
from .forward import solve_forward
from .lm import central_jacobian, fd_jacobian, levenberg_marquardt
from .model import PARAM_NAMES, Grid, ManufacturedCase, ParamVector, ProblemData, SampledData
from .observables import MeasurementSet, biomass, boundary_flux, measurements_from_case

# box bounds used by the fits
DEFAULT_LOWER = {"d1": 1e-10, "d2": 1e-10, "K1": 1e-10, "K2": 0.0, "K3": 1e-10, "K4": 1e-10, "a": 0.0, "b": 1.0}
DEFAULT_UPPER = {name: 1e10 for name in PARAM_NAMES}

FLAVORS = ("flux", "flux+biomass")
WEIGHTINGS = ("trapezoid", "sum")

K2_CONSTANT = 0.454822555


def k2_reduction(K3: float, K4: float) -> float:
    """Decay rate K2 implied by (K3, K4) through the integrated biofilm
    balance of the first manufactured case at t = 0."""
    if K4 <= 0:
        raise DomainError(f"K4 must be positive, got {K4}")
    root = math.sqrt(5.0 + 4.0 * K4)
    bracket = 1.0 - 6.0 * K4 + 24.0 * K4 * (K4 + 1.0) / root * math.atanh(1.0 / root)
    return K2_CONSTANT + K3 * bracket


def time_weights(grid: Grid, weighting: str = "trapezoid") -> np.ndarray:
    """Per-level weights w_n of the discrete misfit sum(w_n r_n^2).

    ``trapezoid`` approximates the L2(0, T) norm; ``sum`` is the plain sum
    of squares over time levels.
    """
    if weighting == "trapezoid":
        w = np.full(grid.N, grid.dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w
    if weighting == "sum":
        return np.ones(grid.N)
    raise DomainError(f"unknown weighting {weighting!r}; choose from {WEIGHTINGS}")


@dataclass(frozen=True)
class FitProblem:
    """Everything needed to evaluate residuals for a candidate parameter set.

    ``known`` supplies the values of the parameters that are not in
    ``unknowns``. With ``reduce_k2`` set, K2 is never free: it is computed
    from K3 and K4 at every evaluation.
    """

    data: ProblemData
    grid: Grid
    measurements: MeasurementSet
    known: ParamVector
    unknowns: tuple = ("a", "b")
    flavor: str = "flux"
    reduce_k2: bool = False
    weighting: str = "trapezoid"
    lower: dict = field(default_factory=dict)
    upper: dict = field(default_factory=dict)

    def __post_init__(self):
        unknowns = tuple(self.unknowns)
        object.__setattr__(self, "unknowns", unknowns)
        bad = [u for u in unknowns if u not in PARAM_NAMES]
        if bad or len(set(unknowns)) != len(unknowns) or not unknowns:
            raise DomainError(f"invalid unknown set {unknowns!r}")
        if self.flavor not in FLAVORS:
            raise DomainError(f"unknown objective flavor {self.flavor!r}; choose from {FLAVORS}")
        if self.weighting not in WEIGHTINGS:
            raise DomainError(f"unknown weighting {self.weighting!r}; choose from {WEIGHTINGS}")
        if self.reduce_k2 and "K2" in unknowns:
            raise DomainError("K2 cannot be an unknown when the K2 reduction is enabled")
        if self.flavor == "flux+biomass" and not self.measurements.has_biomass:
            raise DomainError("flux+biomass objective needs biomass measurements")
        t = self.measurements.times
        if t.shape != (self.grid.N,) or not np.allclose(t, self.grid.t, rtol=0, atol=1e-12):
            raise DomainError("measurement times must coincide with the solver time grid")
        lower = dict(DEFAULT_LOWER)
        lower.update(self.lower)
        upper = dict(DEFAULT_UPPER)
        upper.update(self.upper)
        for name in PARAM_NAMES:
            if lower[name] < DEFAULT_LOWER[name] or upper[name] < lower[name]:
                raise DomainError(f"bounds for {name} [{lower[name]}, {upper[name]}] leave the admissible set")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if isinstance(self.data, ProblemData):
            object.__setattr__(self, "_sampled", self.data.sample(self.grid))
        else:
            object.__setattr__(self, "_sampled", self.data)
        object.__setattr__(self, "_sqrt_w", np.sqrt(time_weights(self.grid, self.weighting)))

    @property
    def sampled(self) -> SampledData:
        return self._sampled

    def lower_array(self) -> np.ndarray:
        return np.array([self.lower[u] for u in self.unknowns])

    def upper_array(self) -> np.ndarray:
        return np.array([self.upper[u] for u in self.unknowns])

    def pack(self, X: ParamVector) -> np.ndarray:
        return np.array([getattr(X, u) for u in self.unknowns])

    def unpack(self, z) -> ParamVector:
        """Full parameter vector from the free values ``z``."""
        values = self.known.to_dict()
        values.update(zip(self.unknowns, (float(v) for v in z)))
        if self.reduce_k2:
            values["K2"] = k2_reduction(values["K3"], values["K4"])
        return ParamVector(**values)


def _split(prob: FitProblem, X: ParamVector):
    try:
        sol = solve_forward(prob.sampled, X, prob.grid)
    except Exception as exc:
        raise ResidualEvaluationError(X.to_array(), exc) from exc
    sw = prob._sqrt_w
    r_flux = sw * (boundary_flux(sol, X.d1) - prob.measurements.flux)
    r_bio = None
    if prob.flavor == "flux+biomass":
        r_bio = sw * (biomass(sol) - prob.measurements.biomass)
    return r_flux, r_bio


def residuals(X: ParamVector, prob: FitProblem) -> np.ndarray:
    """Stacked weighted misfits ``sqrt(w_n) (computed - measured)``; flux first, then biomass."""
    r_flux, r_bio = _split(prob, X)
    if r_bio is None:
        return r_flux
    return np.concatenate([r_flux, r_bio])


def objective(X: ParamVector, prob: FitProblem) -> float:
    r = residuals(X, prob)
    return float(r @ r)


def free_residuals(prob: FitProblem):
    """Residual map over the free unknowns only, as used by the optimiser."""

    def fun(z):
        return residuals(prob.unpack(z), prob)

    return fun


def jacobian_check(prob: FitProblem, X: ParamVector, step: float = 1e-5):
    """Forward-difference and central-difference Jacobians at ``X`` (free unknowns)."""
    fun = free_residuals(prob)
    z = prob.pack(X)
    r0 = fun(z)
    J_fd, _ = fd_jacobian(fun, z, r0, prob.lower_array(), prob.upper_array())
    J_c = central_jacobian(fun, z, step)
    return J_fd, J_c


def flux_sensitivities(prob: FitProblem, X: ParamVector, names=("K2", "K3"), step: float = 1e-6):
    """Partial derivatives of the computed flux q0(t_n) w.r.t. the named parameters."""
    out = {}
    sol0 = solve_forward(prob.sampled, X, prob.grid)
    q0 = boundary_flux(sol0, X.d1)
    for name in names:
        h = max(step, step * abs(getattr(X, name)))
        Xp = X.replace(**{name: getattr(X, name) + h})
        q = boundary_flux(solve_forward(prob.sampled, Xp, prob.grid), Xp.d1)
        out[name] = (q - q0) / h
    return out


@dataclass(frozen=True)
class ScanResult:
    a_values: np.ndarray
    b_values: np.ndarray
    values: np.ndarray  # values[i, j] = H(a_i, b_j)
    argmin: tuple
    minimum: float


def grid_scan(prob: FitProblem, a_range=(0.0, 4.0), b_range=(1.0, 4.0), counts=(41, 31)) -> ScanResult:
    """Objective on a uniform (a, b) lattice; ties go to the first lattice index."""
    if not set(prob.unknowns) <= {"a", "b"}:
        raise DomainError(f"grid_scan needs only a and b unknown, got {prob.unknowns!r}")
    na, nb = counts
    a_values = np.linspace(a_range[0], a_range[1], na) if na > 1 else np.array([float(a_range[0])])
    b_values = np.linspace(b_range[0], b_range[1], nb) if nb > 1 else np.array([float(b_range[0])])
    values = np.empty((na, nb))
    for i, a in enumerate(a_values):
        for j, b in enumerate(b_values):
            values[i, j] = objective(prob.known.replace(a=a, b=b), prob)
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    return ScanResult(a_values, b_values, values, (float(a_values[i]), float(b_values[j])), float(values[i, j]))


@dataclass(frozen=True)
class FitReport:
    params: ParamVector
    objective: float
    trace: tuple
    flux_norm: float
    biomass_norm: float | None
    iterations: int
    nfev: int
    termination: str
    jacobian_condition: float
    unknowns: tuple

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "unknowns": list(self.unknowns),
            "objective": self.objective,
            "flux_residual_norm": self.flux_norm,
            "biomass_residual_norm": self.biomass_norm,
            "iterations": self.iterations,
            "function_evaluations": self.nfev,
            "termination": self.termination,
            "jacobian_condition": self.jacobian_condition,
            "trace": list(self.trace),
        }


def fit(prob: FitProblem, x0, *, xtol=1e-10, ftol=1e-14, max_iter=400, callback=None) -> FitReport:
    """Bounded Levenberg-Marquardt fit of the free unknowns.

    ``x0`` is either a ParamVector or the free values in ``prob.unknowns``
    order. Hitting the iteration limit is reported, not raised.
    """
    z0 = prob.pack(x0) if isinstance(x0, ParamVector) else np.asarray(x0, dtype=float)
    lo, hi = prob.lower_array(), prob.upper_array()
    if z0.shape != lo.shape or np.any(z0 < lo) or np.any(z0 > hi):
        raise DomainError(f"initial guess {z0!r} outside the bounds")
    fun = free_residuals(prob)
    result = levenberg_marquardt(fun, z0, lo, hi, xtol=xtol, ftol=ftol, max_iter=max_iter, callback=callback)
    X = prob.unpack(result.x)
    r_flux, r_bio = _split(prob, X)
    J = result.jacobian
    cond = float(np.linalg.cond(J)) if J is not None else math.nan
    return FitReport(
        params=X,
        objective=result.cost,
        trace=tuple(result.trace),
        flux_norm=float(np.linalg.norm(r_flux)),
        biomass_norm=None if r_bio is None else float(np.linalg.norm(r_bio)),
        iterations=result.iterations,
        nfev=result.nfev,
        termination=result.termination,
        jacobian_condition=cond,
        unknowns=prob.unknowns,
    )


def reduced_fit(prob: FitProblem, x0, **kwargs) -> FitReport:
    """Fit with K2 eliminated through :func:`k2_reduction`."""
    if not prob.reduce_k2:
        raise DomainError("reduced_fit needs a problem built with reduce_k2=True")
    return fit(prob, x0, **kwargs)


def case_problem(case: ManufacturedCase, dx: float, unknowns=("a", "b"), flavor="flux", reduce_k2=False,
                 weighting="trapezoid", measurements: MeasurementSet | None = None, known: ParamVector | None = None,
                 lower=None, upper=None) -> FitProblem:
    """FitProblem for a manufactured case, with analytic measurements by default."""
    grid = case.grid(dx)
    if measurements is None:
        measurements = measurements_from_case(case, grid, with_biomass=case.exact_biomass is not None)
    return FitProblem(
        data=case.data,
        grid=grid,
        measurements=measurements,
        known=known or case.params,
        unknowns=tuple(unknowns),
        flavor=flavor,
        reduce_k2=reduce_k2,
        weighting=weighting,
        lower=dict(lower or {}),
        upper=dict(upper or {}),
    )
