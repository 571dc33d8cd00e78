"""Bounded Levenberg-Marquardt with forward-difference Jacobians.

Steps that would leave the box are shortened along their direction until
they reach its boundary; variables pinned at a bound with the gradient
pushing outward are frozen for that iteration. Damping follows
Nielsen's update, with Marquardt's diagonal scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# initial damping relative to max(diag(J^T J)); 1e-1 survives the poor starting guesses of the eight-parameter fits
TAU = 1e-1


@dataclass
class LMResult:
    x: np.ndarray
    residuals: np.ndarray
    cost: float
    trace: list
    iterations: int
    nfev: int
    termination: str
    jacobian: np.ndarray | None = None
    steps: list = field(default_factory=list)


def fd_step(x):
    return np.maximum(1e-6, 1e-6 * np.abs(x))


def fd_jacobian(fun, x, r0, lower, upper):
    """Forward differences with h_j = max(1e-6, 1e-6 |x_j|); backward next to an upper bound."""
    h = fd_step(x)
    J = np.empty((r0.size, x.size))
    nfev = 0
    for j in range(x.size):
        step = h[j] if x[j] + h[j] <= upper[j] else -h[j]
        xp = x.copy()
        xp[j] += step
        nfev += 1
        try:
            col = fun(xp)
        except Exception:
            # retry on the other side when it stays inside the box
            if not lower[j] <= x[j] - step <= upper[j]:
                raise
            step = -step
            xp[j] = x[j] + step
            nfev += 1
            col = fun(xp)
        J[:, j] = (col - r0) / step
    return J, nfev


def central_jacobian(fun, x, step=1e-5):
    J = None
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += step
        xm[j] -= step
        col = (fun(xp) - fun(xm)) / (2 * step)
        if J is None:
            J = np.empty((col.size, x.size))
        J[:, j] = col
    return J


def _damped_step(A, g, diag, mu, free, x, lower, upper):
    free = free.copy()
    while True:
        Af = A[np.ix_(free, free)] + mu * np.diag(diag[free])
        delta = np.zeros_like(x)
        try:
            delta[free] = np.linalg.solve(Af, -g[free])
        except np.linalg.LinAlgError:
            delta[free] = np.linalg.lstsq(Af, -g[free], rcond=None)[0]
        # variables sitting on a bound whose step points outward join the active set
        outward = free & (((x <= lower) & (delta < 0)) | ((x >= upper) & (delta > 0)))
        if not outward.any():
            return delta
        free &= ~outward
        if not free.any():
            return np.zeros_like(x)


def _truncate(x, delta, lower, upper):
    """Shorten ``delta`` along its direction so that ``x + delta`` stays in the box."""
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(delta > 0, (upper - x) / delta, np.where(delta < 0, (lower - x) / delta, np.inf))
    theta = min(1.0, float(np.min(room)))
    return np.clip(x + theta * delta, lower, upper)


def _safe_eval(fun, x):
    try:
        r = fun(x)
    except Exception:
        return None, math.inf
    cost = float(r @ r)
    if not math.isfinite(cost):
        return None, math.inf
    return r, cost


def levenberg_marquardt(fun, x0, lower, upper, *, xtol=1e-10, ftol=1e-14, max_iter=400, tau=TAU,
                        jacobian=fd_jacobian, callback=None) -> LMResult:
    """Minimise ``||fun(x)||^2`` over the box ``lower <= x <= upper``.

    Terminates when the accepted step norm drops below ``xtol``, the
    objective decrease of an accepted step drops below ``ftol``, the
    damping grows without an acceptable step, or after ``max_iter``
    iterations. Evaluation failures inside the iteration count as
    rejected steps; a failure at ``x0`` propagates.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    r = np.asarray(fun(x), dtype=float)
    cost = float(r @ r)
    if not math.isfinite(cost):
        raise FloatingPointError(f"objective is not finite at the initial guess ({cost!r})")
    nfev = 1
    trace = [cost]
    steps = []
    mu = None
    nu = 2.0
    J = None
    termination = "max-iterations"
    it = 0
    while it < max_iter:
        try:
            J, used = jacobian(fun, x, r, lower, upper)
        except Exception:
            termination = "jacobian-failure"
            break
        nfev += used
        g = J.T @ r
        A = J.T @ J
        diag = np.diag(A).copy()
        diag = np.maximum(diag, 1e-12 * max(diag.max(), 1e-300))
        if mu is None:
            mu = tau * diag.max()
        frozen = ((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0))
        free = ~frozen
        if not free.any():
            termination = "bound-stationary"
            break
        if np.linalg.norm(g[free], np.inf) == 0.0:
            termination = "gradient"
            break
        accepted = False
        while True:
            delta = _damped_step(A, g, diag, mu, free, x, lower, upper)
            x_new = _truncate(x, delta, lower, upper)
            s = x_new - x
            if np.linalg.norm(s) < xtol:
                # truncation stalled against a bound: project instead
                x_new = np.clip(x + delta, lower, upper)
                s = x_new - x
            if np.linalg.norm(s) < xtol:
                termination = "step"
                break
            r_new, cost_new = _safe_eval(fun, x_new)
            nfev += 1
            predicted = cost - float(np.sum((r + J @ s) ** 2))
            if cost_new < cost:
                rho = (cost - cost_new) / predicted if predicted > 0 else 0.0
                mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                nu = 2.0
                accepted = True
                break
            mu *= nu
            nu *= 2.0
            if mu > 1e20 * diag.max() or not math.isfinite(mu):
                termination = "damping"
                break
        if not accepted:
            break
        it += 1
        decrease = cost - cost_new
        x, r, cost = x_new, r_new, cost_new
        trace.append(cost)
        steps.append(float(np.linalg.norm(s)))
        if callback is not None:
            callback(it, x, cost)
        if np.linalg.norm(s) < xtol:
            termination = "step"
            break
        if decrease < ftol:
            termination = "ftol"
            break
    return LMResult(x=x, residuals=r, cost=cost, trace=trace, iterations=it, nfev=nfev,
                    termination=termination, jacobian=J, steps=steps)
