"""Shared least-squares machinery.

All model fits in this package go through ``lm_fit``: Levenberg-Marquardt
with an iteration budget of 500 residual evaluations, one-sigma parameter
uncertainties from the Jacobian at the solution, and an explicit
convergence flag instead of an exception so callers can decide whether a
non-converged best effort is acceptable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import least_squares

__all__ = ["Uncertain", "LMResult", "FitConvergenceError", "lm_fit"]

MAX_EVALS = 500


class FitConvergenceError(RuntimeError):
    """A fit that is required to converge did not."""


class Uncertain(NamedTuple):
    """A value with a one-sigma uncertainty."""

    value: float
    sigma: float

    def __str__(self) -> str:
        return f"{self.value:g} +/- {self.sigma:g}"


@dataclass
class LMResult:
    names: tuple[str, ...]
    values: np.ndarray
    sigmas: np.ndarray
    residuals: np.ndarray
    cost: float
    converged: bool
    n_evals: int
    message: str

    def __getitem__(self, name: str) -> Uncertain:
        try:
            i = self.names.index(name)
        except ValueError:
            raise KeyError(f"no fitted parameter {name!r}; have {self.names}") from None
        return Uncertain(float(self.values[i]), float(self.sigmas[i]))

    def as_dict(self) -> dict[str, Uncertain]:
        return {n: self[n] for n in self.names}


def _central_jacobian(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    x0: np.ndarray,
    n_points: int,
) -> np.ndarray:
    """Central-difference Jacobian with per-parameter relative steps.

    The starting point supplies a natural scale for parameters that end
    up at zero.
    """
    rel = float(np.finfo(float).eps) ** (1.0 / 3.0)
    jac = np.empty((n_points, x.size))
    for j in range(x.size):
        h = rel * max(abs(x[j]), abs(x0[j]))
        if h == 0.0:
            h = rel
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (
            np.asarray(residual_fn(xp), dtype=float)
            - np.asarray(residual_fn(xm), dtype=float)
        ) / (2.0 * h)
    return jac


def lm_fit(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    names: Sequence[str] | None = None,
    max_evals: int = MAX_EVALS,
) -> LMResult:
    """Minimize sum(residual_fn(x)**2) with Levenberg-Marquardt.

    One-sigma uncertainties come from the pseudo-inverse of J^T J scaled by
    the residual variance.  ``converged`` is False when the evaluation
    budget ran out before any tolerance was met.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if names is None:
        names = tuple(f"p{i}" for i in range(x0.size))
    names = tuple(names)
    if len(names) != x0.size:
        raise ValueError("names and x0 length mismatch")

    n_points = np.atleast_1d(np.asarray(residual_fn(x0), dtype=float)).size
    if n_points < x0.size:
        raise ValueError(
            f"fit needs at least as many points ({n_points}) as free "
            f"parameters ({x0.size})"
        )

    sol = least_squares(residual_fn, x0, method="lm", max_nfev=max_evals)

    dof = max(n_points - x0.size, 1)
    variance = 2.0 * sol.cost / dof
    # MINPACK's returned Jacobian is its internally scaled factorization, not
    # the plain Jacobian, so take central differences at the solution instead.
    jac = _central_jacobian(residual_fn, sol.x, x0, n_points)
    norms = np.linalg.norm(jac, axis=0)
    norms[norms == 0] = 1.0
    # Equilibrate columns before inverting: raw parameter scales can differ
    # by many orders of magnitude and would push pinv's cutoff into genuine
    # directions.
    cov_scaled = np.linalg.pinv((jac / norms).T @ (jac / norms))
    cov = variance * cov_scaled / np.outer(norms, norms)
    sigmas = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    return LMResult(
        names=names,
        values=sol.x.copy(),
        sigmas=sigmas,
        residuals=np.atleast_1d(sol.fun).copy(),
        cost=float(2.0 * sol.cost),
        converged=bool(sol.status > 0),
        n_evals=int(sol.nfev),
        message=str(sol.message),
    )
