"""Thomas algorithm for the tridiagonal systems of the implicit scheme.

No pivoting: every system the scheme assembles is strictly diagonally
dominant, so plain elimination is stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import SingularSystemError

PIVOT_TOL = 1e-14


@dataclass(frozen=True)
class TridiagonalSystem:
    """``sub[k]`` couples row k+1 to k, ``sup[k]`` couples row k to k+1."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        for name in ("sub", "diag", "sup", "rhs"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        m = len(self.diag)
        if m < 1:
            raise ValueError("system must have at least one row")
        if len(self.rhs) != m or len(self.sub) != m - 1 or len(self.sup) != m - 1:
            raise ValueError(
                f"inconsistent lengths: diag {m}, rhs {len(self.rhs)}, "
                f"sub {len(self.sub)}, sup {len(self.sup)}"
            )

    @property
    def size(self) -> int:
        return len(self.diag)

    def matvec(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = self.diag * u
        out[1:] += self.sub * u[:-1]
        out[:-1] += self.sup * u[1:]
        return out

    def is_strictly_diagonally_dominant(self) -> bool:
        off = np.zeros(self.size)
        off[1:] += np.abs(self.sub)
        off[:-1] += np.abs(self.sup)
        return bool(np.all(np.abs(self.diag) > off))


@njit(cache=True)
def _factor(sub, diag, sup, tol):
    # returns modified pivots and elimination multipliers; bad row index or -1
    m = diag.shape[0]
    piv = np.empty(m)
    mult = np.empty(max(m - 1, 0))
    piv[0] = diag[0]
    if abs(piv[0]) < tol:
        return piv, mult, 0
    for k in range(1, m):
        mult[k - 1] = sub[k - 1] / piv[k - 1]
        piv[k] = diag[k] - mult[k - 1] * sup[k - 1]
        if abs(piv[k]) < tol:
            return piv, mult, k
    return piv, mult, -1


@njit(cache=True)
def _solve_factored(piv, mult, sup, rhs):
    m = piv.shape[0]
    y = np.empty(m)
    y[0] = rhs[0]
    for k in range(1, m):
        y[k] = rhs[k] - mult[k - 1] * y[k - 1]
    x = np.empty(m)
    x[m - 1] = y[m - 1] / piv[m - 1]
    for k in range(m - 2, -1, -1):
        x[k] = (y[k] - sup[k] * x[k + 1]) / piv[k]
    return x


class FactoredTridiagonal:
    """LU factors of a tridiagonal matrix, reusable for many right-hand sides."""

    def __init__(self, sub, diag, sup, tol: float = PIVOT_TOL):
        self.sub = np.ascontiguousarray(sub, dtype=float)
        self.diag = np.ascontiguousarray(diag, dtype=float)
        self.sup = np.ascontiguousarray(sup, dtype=float)
        self.piv, self.mult, bad = _factor(self.sub, self.diag, self.sup, tol)
        if bad >= 0:
            raise SingularSystemError(int(bad), float(self.piv[bad]))

    def solve(self, rhs) -> np.ndarray:
        return _solve_factored(self.piv, self.mult, self.sup, np.ascontiguousarray(rhs, dtype=float))


def solve_tridiagonal(system: TridiagonalSystem, tol: float = PIVOT_TOL) -> np.ndarray:
    """Solve ``system`` by forward elimination and back substitution.

    Raises
    ------
    SingularSystemError
        If a pivot smaller than ``tol`` in magnitude is met; the error
        reports the (0-based) row index.
    """
    return FactoredTridiagonal(system.sub, system.diag, system.sup, tol).solve(system.rhs)
