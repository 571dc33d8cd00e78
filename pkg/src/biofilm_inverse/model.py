"""Domain types, constitutive functions and manufactured test cases.

The model couples a substrate concentration ``S`` and a biofilm volume
fraction ``M`` on the unit interval::

    S_t = d1 S_xx - K1 S M / (K4 + S) + F
    M_t = d2 (lam(M) M_x)_x - K2 M + K3 S M / (K4 + S) + G
    lam(M) = M**b / (1 - M)**a

with Dirichlet data on both ends and initial profiles at ``t = 0``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, MeasurementFormatError, SingularityError

PARAM_NAMES = ("d1", "d2", "K1", "K2", "K3", "K4", "a", "b")

# (lower, lower_inclusive) per parameter, in PARAM_NAMES order
_ADMISSIBLE = {
    "d1": (0.0, False),
    "d2": (0.0, False),
    "K1": (0.0, False),
    "K2": (0.0, True),
    "K3": (0.0, False),
    "K4": (0.0, False),
    "a": (0.0, True),
    "b": (1.0, True),
}

COMPAT_TOL = 1e-12

ScalarField = Union[Callable, np.ndarray]


@dataclass(frozen=True)
class ParamVector:
    """The eight model constants, validated against the admissible set."""

    d1: float
    d2: float
    K1: float
    K2: float
    K3: float
    K4: float
    a: float
    b: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = float(getattr(self, name))
            object.__setattr__(self, name, value)
            lo, inclusive = _ADMISSIBLE[name]
            if not math.isfinite(value):
                raise DomainError(f"{name}={value!r} is not finite")
            if value < lo or (value == lo and not inclusive):
                bound = ">=" if inclusive else ">"
                raise DomainError(f"{name}={value!r} violates {name} {bound} {lo}")

    @classmethod
    def from_array(cls, values) -> "ParamVector":
        values = [float(v) for v in values]
        if len(values) != 8:
            raise DomainError(f"expected 8 parameters, got {len(values)}")
        return cls(*values)

    @classmethod
    def from_dict(cls, mapping) -> "ParamVector":
        return cls(**{name: mapping[name] for name in PARAM_NAMES})

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES])

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def replace(self, **changes) -> "ParamVector":
        values = self.to_dict()
        values.update(changes)
        return ParamVector(**values)


@dataclass(frozen=True)
class Grid:
    """Uniform space-time mesh with ``I`` nodes on [0, 1] and ``N`` levels on [0, T]."""

    I: int
    N: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.I) != self.I or self.I <= 2:
            raise DomainError(f"I must be an integer > 2, got {self.I!r}")
        if int(self.N) != self.N or self.N <= 2:
            raise DomainError(f"N must be an integer > 2, got {self.N!r}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise DomainError(f"T must be positive, got {self.T!r}")
        object.__setattr__(self, "I", int(self.I))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "T", float(self.T))

    @classmethod
    def from_steps(cls, dx: float, dt: float | None = None, T: float = 1.0) -> "Grid":
        """Build the grid whose steps are ``dx`` and ``dt`` (defaults to ``dx``)."""
        dt = dx if dt is None else dt
        I = round(1.0 / dx) + 1
        N = round(T / dt) + 1
        if abs((I - 1) * dx - 1.0) > 1e-9 or abs((N - 1) * dt - T) > 1e-9 * max(1.0, T):
            raise DomainError(f"steps dx={dx}, dt={dt} do not divide [0,1] x [0,{T}]")
        return cls(I, N, T)

    @property
    def dx(self) -> float:
        return 1.0 / (self.I - 1)

    @property
    def dt(self) -> float:
        return self.T / (self.N - 1)

    @property
    def x(self) -> np.ndarray:
        x = np.arange(self.I) / (self.I - 1)
        x[-1] = 1.0
        return x

    @property
    def t(self) -> np.ndarray:
        t = self.T * (np.arange(self.N) / (self.N - 1))
        t[-1] = self.T
        return t


def _sample_boundary(value, grid):
    if callable(value):
        return np.broadcast_to(np.asarray(value(grid.t), dtype=float), (grid.N,)).copy()
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.N, float(arr))
    if arr.shape != (grid.N,):
        raise DomainError(f"tabulated boundary data has shape {arr.shape}, grid needs ({grid.N},)")
    return arr.copy()


def _sample_initial(value, grid):
    if callable(value):
        return np.broadcast_to(np.asarray(value(grid.x), dtype=float), (grid.I,)).copy()
    arr = np.asarray(value, dtype=float)
    if arr.shape != (grid.I,):
        raise DomainError(f"tabulated initial data has shape {arr.shape}, grid needs ({grid.I},)")
    return arr.copy()


def _sample_source(value, grid):
    if value is None:
        return np.zeros((grid.I, grid.N))
    if callable(value):
        X, T = np.meshgrid(grid.x, grid.t, indexing="ij")
        return np.broadcast_to(np.asarray(value(X, T), dtype=float), (grid.I, grid.N)).copy()
    arr = np.asarray(value, dtype=float)
    if arr.shape != (grid.I, grid.N):
        raise DomainError(f"tabulated source has shape {arr.shape}, grid needs ({grid.I}, {grid.N})")
    return arr.copy()


@dataclass(frozen=True)
class SampledData:
    """ProblemData evaluated on a particular grid (arrays, read-only)."""

    grid: Grid
    mu1: np.ndarray
    mu2: np.ndarray
    mu3: np.ndarray
    mu4: np.ndarray
    S0: np.ndarray
    M0: np.ndarray
    F: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class ProblemData:
    """Boundary, initial and source data of the forward problem.

    Each entry is either a vectorised callable (``mu*(t)``, ``S0(x)``,
    ``M0(x)``, ``F(x, t)``, ``G(x, t)``) or an array tabulated exactly on
    the grid the data will be used with. Tabulated data is never
    interpolated. ``F``/``G`` may be ``None`` for homogeneous sources.
    """

    mu1: ScalarField
    mu2: ScalarField
    mu3: ScalarField
    mu4: ScalarField
    S0: ScalarField
    M0: ScalarField
    F: Optional[ScalarField] = None
    G: Optional[ScalarField] = None

    def sample(self, grid: Grid, check: bool = True) -> SampledData:
        values = dict(
            mu1=_sample_boundary(self.mu1, grid),
            mu2=_sample_boundary(self.mu2, grid),
            mu3=_sample_boundary(self.mu3, grid),
            mu4=_sample_boundary(self.mu4, grid),
            S0=_sample_initial(self.S0, grid),
            M0=_sample_initial(self.M0, grid),
            F=_sample_source(self.F, grid),
            G=_sample_source(self.G, grid),
        )
        for arr in values.values():
            arr.setflags(write=False)
        data = SampledData(grid=grid, **values)
        if check:
            check_compatibility(data)
        return data


def check_compatibility(data: SampledData, tol: float = COMPAT_TOL) -> None:
    """Raise if the initial profiles disagree with the boundary data at ``t = 0``."""
    pairs = (
        ("S0(0)", data.S0[0], "mu1(0)", data.mu1[0]),
        ("S0(1)", data.S0[-1], "mu2(0)", data.mu2[0]),
        ("M0(0)", data.M0[0], "mu3(0)", data.mu3[0]),
        ("M0(1)", data.M0[-1], "mu4(0)", data.mu4[0]),
    )
    for lname, lval, rname, rval in pairs:
        if abs(lval - rval) > tol:
            raise DomainError(f"incompatible data: {lname}={lval!r} but {rname}={rval!r}")


@dataclass(frozen=True)
class FieldSolution:
    """Substrate and biofilm values on every grid node; ``S[i, n]`` is S(x_i, t_n)."""

    grid: Grid
    S: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        shape = (self.grid.I, self.grid.N)
        for name in ("S", "M"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise DomainError(f"{name} has shape {arr.shape}, grid needs {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class ManufacturedCase:
    """An analytic solution together with the data that produces it.

    Besides the fields themselves the case carries closed-form partial
    derivatives so that recovery formulas can be checked without finite
    difference error. ``exact_biomass`` is ``None`` when no closed form
    is known for the case.
    """

    name: str
    params: ParamVector
    data: ProblemData
    T: float
    exact_S: Callable
    exact_M: Callable
    exact_flux: Callable
    exact_biomass: Optional[Callable]
    S_t: Callable
    S_x: Callable
    S_xx: Callable
    M_t: Callable
    M_x: Callable
    M_xx: Callable
    notes: tuple = field(default_factory=tuple)

    def grid(self, dx: float, dt: float | None = None) -> Grid:
        return Grid.from_steps(dx, dt, self.T)

    def exact_solution(self, grid: Grid) -> FieldSolution:
        X, T = np.meshgrid(grid.x, grid.t, indexing="ij")
        return FieldSolution(grid, self.exact_S(X, T), self.exact_M(X, T))


def diffusivity(M, a: float, b: float):
    """Nonlinear biofilm diffusivity ``M**b / (1 - M)**a``.

    Accepts scalars or arrays. ``M`` must be nonnegative; ``M >= 1`` is a
    singularity unless ``a == 0``, in which case the denominator is 1.
    """
    if a < 0 or b < 1:
        raise DomainError(f"exponents must satisfy a >= 0, b >= 1 (got a={a}, b={b})")
    arr = np.asarray(M, dtype=float)
    if np.any(arr < 0):
        raise DomainError(f"diffusivity needs M >= 0, got min M={arr.min()!r}")
    if a > 0 and np.any(arr >= 1):
        raise SingularityError(float(arr.max()))
    if a == 0:
        out = arr**b
    else:
        out = arr**b / (1.0 - arr) ** a
    if np.ndim(M) == 0:
        return float(out)
    return out


def monod(S, M, K4: float):
    """Monod reaction quotient ``S M / (K4 + S)``; callers scale by K1 or K3."""
    S = np.asarray(S, dtype=float)
    denom = K4 + S
    if np.any(denom <= 0):
        raise DomainError(f"Monod denominator K4 + S must be positive, got min {denom.min()!r}")
    out = S * np.asarray(M, dtype=float) / denom
    if out.ndim == 0:
        return float(out)
    return out


def example1() -> ManufacturedCase:
    """Symmetric test with S = 1 + (x - x^2)(t + 1), M = (x - x^2) e^-t.

    True constants are all ones with a = 1, b = 2 on T = 1; the boundary
    flux is -(t + 1) and the biomass e^-t / 6.
    """

    def p(x):
        return x - x * x

    def exact_S(x, t):
        return 1.0 + p(x) * (t + 1.0)

    def exact_M(x, t):
        return p(x) * np.exp(-t)

    def F(x, t):
        q = p(x)
        return q + 2.0 * (t + 1.0) + (1.0 + q * (t + 1.0)) * q * np.exp(-t) / (2.0 + (t + 1.0) * q)

    def G(x, t):
        q = p(x)
        e = np.exp(-t)
        return (
            -((1.0 - 2.0 * x) ** 2) * q**2 * np.exp(-4.0 * t) / (1.0 - q * e) ** 2
            - 2.0 * q * (1.0 - 5.0 * x + 5.0 * x * x) * np.exp(-3.0 * t) / (1.0 - q * e)
            - (1.0 + q * (t + 1.0)) * q * e / (2.0 + q * (t + 1.0))
        )

    data = ProblemData(
        mu1=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        mu2=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        mu3=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        mu4=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        S0=lambda x: 1.0 + p(x),
        M0=p,
        F=F,
        G=G,
    )
    return ManufacturedCase(
        name="example1",
        params=ParamVector(d1=1, d2=1, K1=1, K2=1, K3=1, K4=1, a=1, b=2),
        data=data,
        T=1.0,
        exact_S=exact_S,
        exact_M=exact_M,
        exact_flux=lambda t: -(np.asarray(t, dtype=float) + 1.0),
        exact_biomass=lambda t: np.exp(-np.asarray(t, dtype=float)) / 6.0,
        S_t=lambda x, t: p(x) + 0.0 * t,
        S_x=lambda x, t: (1.0 - 2.0 * x) * (t + 1.0),
        S_xx=lambda x, t: -2.0 * (t + 1.0) + 0.0 * x,
        M_t=lambda x, t: -p(x) * np.exp(-t),
        M_x=lambda x, t: (1.0 - 2.0 * x) * np.exp(-t),
        M_xx=lambda x, t: -2.0 * np.exp(-t) + 0.0 * x,
    )


def example2() -> ManufacturedCase:
    """Case with M = 4x(1 - x) t e^(1 - t) and S = 1 - M.

    Constants a = 0, b = 1, K2 = 0, all others 1. M reaches 1 only at
    (x, t) = (0.5, 1); that is harmless because a = 0 removes the
    singularity of the diffusivity.
    """

    def exact_M(x, t):
        return 4.0 * x * (1.0 - x) * t * np.exp(1.0 - t)

    def exact_S(x, t):
        return 1.0 - exact_M(x, t)

    def F(x, t):
        q = x * (1.0 - x)
        e = np.exp(1.0 - t)
        frac = (1.0 - 4.0 * q * t * e) * q * t / (1.0 - 2.0 * q * t * e)
        return 2.0 * e * (-4.0 * t + 2.0 * q * (t - 1.0) + frac)

    def G(x, t):
        q = x * (1.0 - x)
        e = np.exp(1.0 - t)
        frac = (1.0 - 4.0 * q * t * e) * q * t / (1.0 - 2.0 * q * t * e)
        return 2.0 * e * (2.0 * q * (1.0 - t) + 8.0 * t * t * e * (6.0 * x - 6.0 * x * x - 1.0) - frac)

    def M_t(x, t):
        return 4.0 * x * (1.0 - x) * (1.0 - t) * np.exp(1.0 - t)

    def M_x(x, t):
        return 4.0 * (1.0 - 2.0 * x) * t * np.exp(1.0 - t)

    def M_xx(x, t):
        return -8.0 * t * np.exp(1.0 - t) + 0.0 * x

    data = ProblemData(
        mu1=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        mu2=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        mu3=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        mu4=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        S0=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        M0=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        F=F,
        G=G,
    )
    return ManufacturedCase(
        name="example2",
        params=ParamVector(d1=1, d2=1, K1=1, K2=0, K3=1, K4=1, a=0, b=1),
        data=data,
        T=1.0,
        exact_S=exact_S,
        exact_M=exact_M,
        exact_flux=lambda t: 4.0 * np.asarray(t, dtype=float) * np.exp(1.0 - np.asarray(t, dtype=float)),
        exact_biomass=None,
        S_t=lambda x, t: -M_t(x, t),
        S_x=lambda x, t: -M_x(x, t),
        S_xx=lambda x, t: -M_xx(x, t),
        M_t=M_t,
        M_x=M_x,
        M_xx=M_xx,
        notes=("max M = 1 is attained only at (x, t) = (0.5, 1)",),
    )


CASES = {"example1": example1, "example2": example2}


def get_case(name: str) -> ManufacturedCase:
    try:
        return CASES[name]()
    except KeyError:
        raise DomainError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None


def pde_residuals(case: ManufacturedCase, x, t, h: float = 1e-3):
    """Residuals of both equations for the case's exact fields at ``(x, t)``.

    Derivatives come from fourth-order central differences of the exact
    field evaluators with step ``h``, so the check is independent of the
    closed-form derivatives the case carries.
    """
    X = case.params
    S, M = case.exact_S, case.exact_M

    def d_dt(f):
        return (-f(x, t + 2 * h) + 8 * f(x, t + h) - 8 * f(x, t - h) + f(x, t - 2 * h)) / (12 * h)

    def d_dx(f, xx):
        return (-f(xx + 2 * h, t) + 8 * f(xx + h, t) - 8 * f(xx - h, t) + f(xx - 2 * h, t)) / (12 * h)

    def d_xx(f):
        return (-f(x + 2 * h, t) + 16 * f(x + h, t) - 30 * f(x, t) + 16 * f(x - h, t) - f(x - 2 * h, t)) / (
            12 * h * h
        )

    def flux(xx, tt):
        m = M(xx, tt)
        dm = (-M(xx + 2 * h, tt) + 8 * M(xx + h, tt) - 8 * M(xx - h, tt) + M(xx - 2 * h, tt)) / (12 * h)
        lam = m**X.b / (1.0 - m) ** X.a if X.a > 0 else m**X.b
        return lam * dm

    s, m = S(x, t), M(x, t)
    reaction = s * m / (X.K4 + s)
    res_S = d_dt(S) - X.d1 * d_xx(S) + X.K1 * reaction - case.data.F(x, t)
    res_M = d_dt(M) - X.d2 * d_dx(flux, x) + X.K2 * m - X.K3 * reaction - case.data.G(x, t)
    return res_S, res_M


def write_field_csv(path, x, t, values) -> None:
    """Write a tabulated field as ``x,t,value`` rows, t outermost then x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    values = np.asarray(values, dtype=float).reshape(len(x), len(t))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "value"])
        for n, tn in enumerate(t):
            for i, xi in enumerate(x):
                w.writerow([repr(float(xi)), repr(float(tn)), repr(float(values[i, n]))])


def read_field_csv(path):
    """Read an ``x,t,value`` file; returns ``(x, t, values)`` with ``values[i, n]``."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "t", "value"]:
            raise MeasurementFormatError(f"expected header x,t,value, got {header!r}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise MeasurementFormatError(f"expected 3 columns, got {len(row)}", line=lineno)
            try:
                rows.append(tuple(float(v) for v in row))
            except ValueError as exc:
                raise MeasurementFormatError(str(exc), line=lineno) from None
    if not rows:
        raise MeasurementFormatError("no data rows")
    data = np.array(rows)
    x = np.unique(data[:, 0])
    t = np.unique(data[:, 1])
    if len(x) * len(t) != len(data):
        raise MeasurementFormatError("rows do not form a full x-t lattice")
    # t outermost, x innermost
    expected_x = np.tile(x, len(t))
    expected_t = np.repeat(t, len(x))
    if not (np.array_equal(data[:, 0], expected_x) and np.array_equal(data[:, 1], expected_t)):
        raise MeasurementFormatError("rows must be ordered by t, then x, ascending")
    values = data[:, 2].reshape(len(t), len(x)).T.copy()
    return x, t, values
