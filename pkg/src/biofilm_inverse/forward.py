"""Linearly implicit three-level finite-difference scheme for the forward problem.

Level 2 comes from one explicit Euler step; every later level solves two
tridiagonal systems in which the diffusion terms are averaged over the
levels n-1, n, n+1 while the reaction terms and the face diffusivities
are frozen at level n. The scheme is second order in space and time.

Indices in docstrings follow the 1-based convention x_1 = 0 ... x_I = 1;
arrays are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, DomainError
from .model import FieldSolution, Grid, ManufacturedCase, ParamVector, ProblemData, SampledData, diffusivity
from .tridiag import FactoredTridiagonal, TridiagonalSystem

BLOWUP_LIMIT = 1e6


@dataclass(frozen=True)
class SchemeCoefficients:
    """``alpha`` multiplies the S stencil; ``lam[j]`` is the M coefficient on
    the face between nodes j-1 and j (``lam[0]`` is unused and zero)."""

    alpha: float
    lam: np.ndarray


def scheme_coefficients(M_n, params: ParamVector, grid: Grid) -> SchemeCoefficients:
    r = 2.0 * grid.dt / (3.0 * grid.dx**2)
    alpha = r * params.d1
    # clamp only inside the diffusivity argument; stored M is untouched
    face = np.maximum(0.5 * (M_n[1:] + M_n[:-1]), 0.0)
    lam = np.zeros(grid.I)
    lam[1:] = r * params.d2 * diffusivity(face, params.a, params.b)
    return SchemeCoefficients(alpha, lam)


def _reaction(S, M, K4):
    denom = K4 + S
    if np.any(denom <= 0):
        raise DomainError(f"Monod denominator K4 + S must be positive, got min {denom.min()!r}")
    return S * M / denom


def first_step(data: SampledData, params: ParamVector, grid: Grid):
    """Explicit Euler step from the initial profiles to level 2.

    Returns ``(S2, M2)`` as full-length arrays with boundary values taken
    from the Dirichlet data at t_2.
    """
    S1, M1 = np.asarray(data.S0), np.asarray(data.M0)
    dt, dx2 = grid.dt, grid.dx**2
    p = params
    rate = _reaction(S1[1:-1], M1[1:-1], p.K4)

    S2 = np.empty(grid.I)
    S2[1:-1] = (
        S1[1:-1]
        + p.d1 * dt / dx2 * (S1[2:] - 2.0 * S1[1:-1] + S1[:-2])
        - p.K1 * dt * rate
        + dt * data.F[1:-1, 0]
    )
    face = diffusivity(np.maximum(0.5 * (M1[1:] + M1[:-1]), 0.0), p.a, p.b)
    flux = face * (M1[1:] - M1[:-1])
    M2 = np.empty(grid.I)
    M2[1:-1] = (
        M1[1:-1]
        - p.K2 * dt * M1[1:-1]
        + p.K3 * dt * rate
        + dt * data.G[1:-1, 0]
        + p.d2 * dt / dx2 * (flux[1:] - flux[:-1])
    )
    S2[0], S2[-1] = data.mu1[1], data.mu2[1]
    M2[0], M2[-1] = data.mu3[1], data.mu4[1]
    return S2, M2


def assemble_systems(S_prev, M_prev, S_n, M_n, n: int, params: ParamVector, grid: Grid, data: SampledData):
    """Tridiagonal systems for the interior of level n+1 (``n`` is 0-based).

    Returns ``(S_system, M_system)``.
    """
    p = params
    dt = grid.dt
    coef = scheme_coefficients(M_n, p, grid)
    alpha, lam = coef.alpha, coef.lam
    m = grid.I - 2
    rate = _reaction(S_n[1:-1], M_n[1:-1], p.K4)

    Ssum = S_n + S_prev
    f = (
        alpha * (Ssum[2:] - 2.0 * Ssum[1:-1] + Ssum[:-2])
        + S_prev[1:-1]
        - 2.0 * dt * p.K1 * rate
        + 2.0 * dt * data.F[1:-1, n]
    )
    f[0] += alpha * data.mu1[n + 1]
    f[-1] += alpha * data.mu2[n + 1]
    S_sys = TridiagonalSystem(
        sub=np.full(m - 1, -alpha),
        diag=np.full(m, 1.0 + 2.0 * alpha),
        sup=np.full(m - 1, -alpha),
        rhs=f,
    )

    Msum = M_n + M_prev
    lam_left = lam[1:-1]  # face (i-1, i)
    lam_right = lam[2:]  # face (i, i+1)
    g = (
        lam_right * (Msum[2:] - Msum[1:-1])
        - lam_left * (Msum[1:-1] - Msum[:-2])
        + M_prev[1:-1]
        - 2.0 * dt * p.K2 * M_n[1:-1]
        + 2.0 * dt * p.K3 * rate
        + 2.0 * dt * data.G[1:-1, n]
    )
    g[0] += lam[1] * data.mu3[n + 1]
    g[-1] += lam[-1] * data.mu4[n + 1]
    M_sys = TridiagonalSystem(
        sub=-lam[2:-1],
        diag=1.0 + lam_left + lam_right,
        sup=-lam[2:-1],
        rhs=g,
    )
    return S_sys, M_sys


def step_three_level(S_prev, M_prev, S_n, M_n, n: int, params: ParamVector, grid: Grid, data: SampledData,
                     S_factor: FactoredTridiagonal | None = None):
    """Advance from levels (n-1, n) to n+1, with ``n`` a 0-based level index >= 1.

    ``S_factor`` is the factored constant S matrix; it is built on the fly
    when not supplied.
    """
    S_sys, M_sys = assemble_systems(S_prev, M_prev, S_n, M_n, n, params, grid, data)
    if S_factor is None:
        S_factor = FactoredTridiagonal(S_sys.sub, S_sys.diag, S_sys.sup)
    S_new = np.empty(grid.I)
    M_new = np.empty(grid.I)
    S_new[1:-1] = S_factor.solve(S_sys.rhs)
    M_new[1:-1] = FactoredTridiagonal(M_sys.sub, M_sys.diag, M_sys.sup).solve(M_sys.rhs)
    S_new[0], S_new[-1] = data.mu1[n + 1], data.mu2[n + 1]
    M_new[0], M_new[-1] = data.mu3[n + 1], data.mu4[n + 1]
    return S_new, M_new


def _check_level(S, M, n):
    peak = max(np.max(np.abs(S)), np.max(np.abs(M)))
    if not math.isfinite(peak) or peak > BLOWUP_LIMIT:
        raise BlowUpError(f"solution blew up at time level {n + 1}: max |value| = {peak!r}")


def solve_forward(data: ProblemData | SampledData, params: ParamVector, grid: Grid) -> FieldSolution:
    """March the scheme over the whole grid and return S and M on every node."""
    if isinstance(data, ProblemData):
        data = data.sample(grid)
    elif data.grid != grid:
        raise DomainError("sampled data was tabulated on a different grid")
    S = np.empty((grid.I, grid.N))
    M = np.empty((grid.I, grid.N))
    S[:, 0], M[:, 0] = data.S0, data.M0
    S[:, 1], M[:, 1] = first_step(data, params, grid)
    _check_level(S[:, 1], M[:, 1], 1)

    m = grid.I - 2
    alpha = 2.0 * grid.dt * params.d1 / (3.0 * grid.dx**2)
    A = FactoredTridiagonal(np.full(m - 1, -alpha), np.full(m, 1.0 + 2.0 * alpha), np.full(m - 1, -alpha))
    for n in range(1, grid.N - 1):
        S[:, n + 1], M[:, n + 1] = step_three_level(
            S[:, n - 1], M[:, n - 1], S[:, n], M[:, n], n, params, grid, data, S_factor=A
        )
        _check_level(S[:, n + 1], M[:, n + 1], n + 1)
    return FieldSolution(grid, S, M)


@dataclass(frozen=True)
class ConvergenceRow:
    dx: float
    dt: float
    errS: float
    errM: float
    order: float  # observed order against the previous row; nan for the first


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple
    slope: float  # least-squares slope of log(max error) against log(dx)

    def as_records(self):
        return [dict(dx=r.dx, dt=r.dt, errS=r.errS, errM=r.errM, order=r.order) for r in self.rows]

    def constant(self) -> float:
        """Smallest A with max(errS, errM) <= A (dx^2 + dt^2) on every mesh."""
        return max(max(r.errS, r.errM) / (r.dx**2 + r.dt**2) for r in self.rows)


def solution_errors(case: ManufacturedCase, sol: FieldSolution):
    exact = case.exact_solution(sol.grid)
    return float(np.max(np.abs(sol.S - exact.S))), float(np.max(np.abs(sol.M - exact.M)))


def convergence_study(case: ManufacturedCase, meshes, dt_ratio: float = 1.0) -> ConvergenceTable:
    """Solve ``case`` on each mesh (dt = dt_ratio * dx) and tabulate max-norm errors."""
    meshes = [float(h) for h in meshes]
    if len(meshes) < 2:
        raise DomainError("a convergence study needs at least two meshes")
    if not dt_ratio > 0:
        raise DomainError(f"dt_ratio must be positive, got {dt_ratio}")
    rows = []
    prev = None
    for h in meshes:
        grid = case.grid(h, dt_ratio * h)
        errS, errM = solution_errors(case, solve_forward(case.data, case.params, grid))
        err = max(errS, errM)
        order = math.nan
        if prev is not None:
            order = math.log(prev[1] / err) / math.log(prev[0] / h)
        rows.append(ConvergenceRow(grid.dx, grid.dt, errS, errM, order))
        prev = (h, err)
    logs_h = np.log([r.dx for r in rows])
    logs_e = np.log([max(r.errS, r.errM) for r in rows])
    slope = float(np.polyfit(logs_h, logs_e, 1)[0])
    return ConvergenceTable(tuple(rows), slope)
