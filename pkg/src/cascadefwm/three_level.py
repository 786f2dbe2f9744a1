"""Steady state of a driven three-level cascade atom.

Levels are labeled 1 (ground), 2 (intermediate), 3 (top).  Pump 1 drives
1-2 with Rabi coupling omega1 and single-photon detuning big_delta; pump 2
drives 2-3 with coupling omega2, and small_delta is the two-photon detuning
of the pair.  Spontaneous decay runs down the ladder only (3->2, then 2->1)
with half-widths gamma2 and gamma1.

Two closed forms are exposed: the top-level population rho33 (proportional
to the uncorrelated singles rate) and the squared 3-1 coherence |rho31|^2
(proportional to the pair production rate).  An independent Lindblad
steady-state solver cross-checks them; under the convention used here
(Hamiltonian couplings equal to omega1/omega2, diagonal -big_delta and
-small_delta, population decay rates 2*gamma1 and 2*gamma2) the two routes
agree to better than 1e-12 in relative terms over the supported parameter
range.

All six parameters share one frequency unit, MHz by convention.  Both
closed-form outputs are dimensionless and homogeneous of degree zero in
the parameter vector, so any consistent unit gives the same numbers.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ThreeLevelParams",
    "SteadyState",
    "DegenerateParametersError",
    "SteadyStateSolveError",
    "rho33_analytic",
    "rho31_sq_analytic",
    "steady_state_numeric",
]

# Below this magnitude the shared denominator is treated as underflowed;
# results would be pure rounding noise.
K_FLOOR = 1e-300

_PARAM_FIELDS = ("omega1", "omega2", "big_delta", "small_delta", "gamma1", "gamma2")


class DegenerateParametersError(ValueError):
    """The shared denominator underflowed; the parameter point is degenerate."""


class SteadyStateSolveError(RuntimeError):
    """The constrained Lindblad system could not be solved reliably."""


@dataclass(frozen=True)
class ThreeLevelParams:
    """Drive and decay parameters of the cascade model.

    All values are frequencies in MHz.  Detunings are signed; Rabi couplings
    must be nonnegative and the decay half-widths strictly positive.
    """

    omega1: float
    omega2: float
    big_delta: float = 0.0
    small_delta: float = 0.0
    gamma1: float = 5.75
    gamma2: float = 0.66

    def __post_init__(self) -> None:
        for name in _PARAM_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise TypeError(f"{name} must be a real number, got {value!r}")
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.omega1 < 0 or self.omega2 < 0:
            raise ValueError("Rabi couplings omega1 and omega2 must be nonnegative")
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ValueError("decay half-widths gamma1 and gamma2 must be positive")

    def replace(self, **changes: float) -> "ThreeLevelParams":
        return dataclasses.replace(self, **changes)

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.omega1, self.omega2, self.big_delta,
                self.small_delta, self.gamma1, self.gamma2)


@dataclass(frozen=True)
class SteadyState:
    """Steady-state summary produced by the numerical solver."""

    rho33: float
    rho31_sq: float
    full_matrix: np.ndarray | None = None


def _k_denominator(o1, o2, big_d, d, g1, g2):
    """Common denominator of the closed-form steady state.

    Polynomial of total degree eight in the six parameters.  Accepts scalars
    or broadcastable arrays.
    """
    return (
        d**4 * g1 * g2 * (big_d**2 + g1**2 + 2 * o1**2)
        - 2 * d**3 * big_d * g1 * g2 * (big_d**2 + g1**2 + 2 * o1**2 + o2**2)
        + d**2 * (
            o2**2 * (
                big_d**2 * g1 * (g1 + 5 * g2)
                + g1**2 * (g1**2 + g1 * g2 + 2 * g2**2)
                + 2 * o1**2 * (g1 + g2) ** 2
            )
            + g1 * g2 * (big_d**2 + g1**2 + 2 * o1**2)
            * (big_d**2 + g1**2 + 2 * g1 * g2 + 2 * g2**2 - 2 * o1**2)
            + g1 * g2 * o2**4
        )
        + 2 * d * big_d * (
            -g2 * o2**2 * (g1 * (big_d**2 + g1**2 + 4 * g1 * g2 + g2**2) + g2 * o1**2)
            + g1 * g2 * (o1**2 - g2**2) * (big_d**2 + g1**2 + 2 * o1**2)
            - g1 * o2**4 * (g1 + 2 * g2)
        )
        + big_d**4 * g1 * g2**3
        + big_d**2 * g2 * (
            g1 * (
                g2**2 * (2 * g1**2 + 2 * g1 * g2 + g2**2)
                + 2 * g2 * o1**2 * (g1 + 2 * g2)
                + o1**4
            )
            + g2 * o2**2 * (g1 * (3 * g1 + g2) + o1**2)
            + g1 * o2**4
        )
        + (g2 * (g1 + g2) + o1**2 + o2**2)
        * (g1**2 * g2 + g1 * o2**2 + 2 * g2 * o1**2)
        * (g1 * (g2 * (g1 + g2) + o1**2) + o2**2 * (g1 + g2))
    )


def _check_k(k) -> None:
    if np.any(np.abs(k) < K_FLOOR):
        raise DegenerateParametersError(
            "steady-state denominator underflowed (|K| < 1e-300); "
            "check parameter magnitudes and units"
        )


def _rho33(o1, o2, big_d, d, g1, g2):
    k = _k_denominator(o1, o2, big_d, d, g1, g2)
    _check_k(k)
    num = o1**2 * o2**2 * (
        g1 * g2 * ((d - big_d) ** 2 + (g1 + g2) ** 2)
        + g1 * o1**2 * (g1 + g2)
        + o2**2 * (g1 + g2) ** 2
    )
    return num / k


def _rho31_sq(o1, o2, big_d, d, g1, g2):
    k = _k_denominator(o1, o2, big_d, d, g1, g2)
    _check_k(k)
    p = (
        d**3 * g1 * g2 * (big_d - 1j * g1)
        - d**2 * g1 * g2 * ((big_d - 1j * g1) * (2 * big_d + 1j * g2) + o1**2 + o2**2)
        + d * g1 * (
            g2 * (big_d - 1j * g1) * (big_d**2 + 2j * big_d * g2 + (g1 + g2) ** 2)
            + o2**2 * (big_d * (g1 + 3 * g2) - 1j * g1 * (g1 + g2))
            + 2j * g2 * o1**2 * (g1 + g2)
        )
        - 1j * big_d**3 * g1 * g2**2
        - big_d**2 * g1 * g2 * (g1 * g2 - o1**2 + o2**2)
        - 1j * big_d * g1 * g2 * (g1 + g2) * (g2 * (g1 + g2) + 2 * o1**2 + o2**2)
        - (g1 * g2 * (g1 + g2) + g1 * o2**2 - g2 * o1**2)
        * (g1 * (g2 * (g1 + g2) + o1**2) + o2**2 * (g1 + g2))
    )
    return (o1 * o2 / k) ** 2 * np.abs(p) ** 2


def rho33_analytic(params: ThreeLevelParams) -> float:
    """Closed-form steady-state population of the top level.

    Dimensionless, in [0, 1].  Proportional to the uncorrelated singles
    rate of the source.
    """
    return float(_rho33(*params.as_tuple()[:2], params.big_delta,
                        params.small_delta, params.gamma1, params.gamma2))


def rho31_sq_analytic(params: ThreeLevelParams) -> float:
    """Closed-form squared magnitude of the ground-to-top coherence.

    Dimensionless and nonnegative.  Proportional to the photon-pair
    production rate of the source.
    """
    return float(_rho31_sq(*params.as_tuple()))


def _lindblad_generator(params: ThreeLevelParams) -> np.ndarray:
    """Build the 9x9 generator acting on row-major vec(rho)."""
    o1, o2, big_d, d, g1, g2 = params.as_tuple()
    ham = np.array(
        [[0.0, o1, 0.0],
         [o1, -big_d, o2],
         [0.0, o2, -d]],
        dtype=complex,
    )
    lower_21 = np.zeros((3, 3), dtype=complex)
    lower_21[0, 1] = np.sqrt(2.0 * g1)
    lower_32 = np.zeros((3, 3), dtype=complex)
    lower_32[1, 2] = np.sqrt(2.0 * g2)

    eye = np.eye(3, dtype=complex)
    gen = -1j * (np.kron(ham, eye) - np.kron(eye, ham.T))
    for lop in (lower_21, lower_32):
        ldl = lop.conj().T @ lop
        gen += np.kron(lop, lop.conj())
        gen -= 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T))
    return gen


def steady_state_numeric(params: ThreeLevelParams) -> SteadyState:
    """Solve the Lindblad master equation for the steady state.

    The null-space problem is made square by replacing the ground-population
    row of the generator with the unit-trace constraint.  The solution is
    validated against the unmodified generator; a rank-deficient system
    (non-unique steady state) raises SteadyStateSolveError.
    """
    gen = _lindblad_generator(params)
    system = gen.copy()
    system[0, :] = 0.0
    system[0, [0, 4, 8]] = 1.0
    rhs = np.zeros(9, dtype=complex)
    rhs[0] = 1.0

    try:
        vec = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SteadyStateSolveError(
            f"constrained steady-state system is singular: {exc}"
        ) from exc

    residual = np.linalg.norm(gen @ vec, np.inf)
    scale = np.linalg.norm(gen, np.inf) * max(np.linalg.norm(vec, np.inf), 1.0)
    if not np.all(np.isfinite(vec)) or residual > 1e-8 * max(scale, 1.0):
        raise SteadyStateSolveError(
            "steady state failed the generator residual check; "
            "the system appears rank deficient beyond the trace direction"
        )

    rho = vec.reshape(3, 3)
    rho = 0.5 * (rho + rho.conj().T)
    return SteadyState(
        rho33=float(rho[2, 2].real),
        rho31_sq=float(np.abs(rho[2, 0]) ** 2),
        full_matrix=rho,
    )
