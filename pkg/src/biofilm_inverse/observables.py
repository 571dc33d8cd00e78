"""Measurable quantities extracted from a forward solution, and their CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import BiofilmError, MeasurementFormatError
from .model import FieldSolution, ManufacturedCase, Grid

BOUNDARY_ZERO_TOL = 1e-10

PROVENANCES = ("synthetic-exact", "synthetic-solver", "file")


class ContractViolation(BiofilmError, ValueError):
    """Input violates an assumption a formula relies on."""


@dataclass(frozen=True)
class MeasurementSet:
    """Flux time series, optionally with biomass, on a strictly increasing time grid."""

    times: np.ndarray
    flux: np.ndarray
    biomass: Optional[np.ndarray] = None
    provenance: str = "file"
    noise_level: float = 0.0
    noise_seed: Optional[int] = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        flux = np.array(self.flux, dtype=float)
        if times.ndim != 1 or flux.shape != times.shape:
            raise ValueError(f"times {times.shape} and flux {flux.shape} must be 1-D of equal length")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("measurement times must be strictly increasing")
        biomass = None
        if self.biomass is not None:
            biomass = np.array(self.biomass, dtype=float)
            if biomass.shape != times.shape:
                raise ValueError(f"biomass shape {biomass.shape} does not match times {times.shape}")
            biomass.setflags(write=False)
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        times.setflags(write=False)
        flux.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "flux", flux)
        object.__setattr__(self, "biomass", biomass)

    @property
    def has_biomass(self) -> bool:
        return self.biomass is not None


def boundary_flux(sol: FieldSolution, d1: float) -> np.ndarray:
    """Substrate flux ``-d1 dS/dx`` at x = 0 for every time level.

    Uses the second-order one-sided stencil (-3 S_1 + 4 S_2 - S_3) / (2 dx),
    which is exact for fields quadratic in x.
    """
    if sol.grid.I < 4:
        raise ValueError("boundary flux needs at least 4 spatial nodes")
    S = sol.S
    return -d1 * (-3.0 * S[0] + 4.0 * S[1] - S[2]) / (2.0 * sol.grid.dx)


def biomass(sol: FieldSolution) -> np.ndarray:
    """Total biomass ``dx * sum(M_2 .. M_{I-1})`` per time level.

    This is the trapezoid rule with the boundary terms dropped, so M must
    vanish on both ends.
    """
    M = sol.M
    edge = max(np.max(np.abs(M[0])), np.max(np.abs(M[-1])))
    if edge > BOUNDARY_ZERO_TOL:
        raise ContractViolation(f"biomass requires M = 0 on the boundary, found |M| = {edge!r}")
    return sol.grid.dx * M[1:-1].sum(axis=0)


def measurements_from_solution(sol: FieldSolution, d1: float, with_biomass: bool = True) -> MeasurementSet:
    return MeasurementSet(
        times=sol.grid.t,
        flux=boundary_flux(sol, d1),
        biomass=biomass(sol) if with_biomass else None,
        provenance="synthetic-solver",
    )


def measurements_from_case(case: ManufacturedCase, grid: Grid, with_biomass: bool = True) -> MeasurementSet:
    """Exact analytic measurements of a manufactured case on ``grid``'s time levels."""
    t = grid.t
    bio = None
    if with_biomass:
        if case.exact_biomass is None:
            raise ValueError(f"case {case.name!r} has no closed-form biomass")
        bio = case.exact_biomass(t)
    return MeasurementSet(times=t, flux=case.exact_flux(t), biomass=bio, provenance="synthetic-exact")


def add_noise(ms: MeasurementSet, level: float, seed=None) -> MeasurementSet:
    """Multiplicative Gaussian noise: each sample y becomes y (1 + level * xi)."""
    if level < 0:
        raise ValueError(f"noise level must be nonnegative, got {level}")
    if level == 0:
        return replace(ms, noise_level=0.0, noise_seed=seed)
    rng = np.random.default_rng(seed)
    flux = ms.flux * (1.0 + level * rng.standard_normal(ms.flux.shape))
    bio = None
    if ms.biomass is not None:
        bio = ms.biomass * (1.0 + level * rng.standard_normal(ms.biomass.shape))
    return replace(ms, flux=flux, biomass=bio, noise_level=float(level), noise_seed=seed)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_measurements(ms: MeasurementSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "q0", "EM"] if ms.has_biomass else ["t", "q0"])
        for n in range(len(ms.times)):
            row = [_fmt(ms.times[n]), _fmt(ms.flux[n])]
            if ms.has_biomass:
                row.append(_fmt(ms.biomass[n]))
            w.writerow(row)


def read_measurements(path) -> MeasurementSet:
    """Parse a ``t,q0[,EM]`` file; errors carry the offending line number."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MeasurementFormatError("empty measurement file", line=1)
        header = [h.strip() for h in header]
        if header not in (["t", "q0"], ["t", "q0", "EM"]):
            raise MeasurementFormatError(f"expected header t,q0[,EM], got {','.join(header)}", line=1)
        ncol = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != ncol:
                raise MeasurementFormatError(f"expected {ncol} columns, got {len(row)}", line=lineno)
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise MeasurementFormatError(str(exc), line=lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise MeasurementFormatError("non-finite value", line=lineno)
            if rows and values[0] <= rows[-1][0]:
                raise MeasurementFormatError("times must be strictly increasing", line=lineno)
            rows.append(values)
    if not rows:
        raise MeasurementFormatError("no data rows")
    data = np.array(rows)
    return MeasurementSet(
        times=data[:, 0],
        flux=data[:, 1],
        biomass=data[:, 2] if ncol == 3 else None,
        provenance="file",
    )
