"""Reservoir parameters and the scalar quantities derived from them.

Units: hbar = k_B = 1, so ``omega`` is the energy quantum and ``beta * omega``
is dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError

__all__ = [
    "JUMP_KINDS",
    "ReservoirSpec",
    "DerivedBath",
    "thermal_occupation",
    "thermal_rates",
    "mu",
    "bath_moments",
    "effective_squeezing",
    "squeezed_rates",
    "mu_star",
    "mu_star_symmetric",
    "derive",
]

JUMP_KINDS = ("no_jump", "left", "right")


@dataclass(frozen=True)
class ReservoirSpec:
    """Two (optionally squeezed) reservoirs coupled through the memory.

    ``theta`` is the relative squeezing phase theta_1 - theta_2.
    """

    beta1: float
    beta2: float
    omega: float = 1.0
    gamma: float = 1.0
    r1: float = 0.0
    r2: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not self.beta2 > 0:
            raise ValueError(f"beta2 must be positive, got {self.beta2}")
        if self.beta1 < self.beta2:
            raise ValueError(f"expected beta1 >= beta2, got {self.beta1} < {self.beta2}")
        if not (self.gamma > 0 and self.omega > 0):
            raise ValueError("gamma and omega must be positive")
        if self.r1 < 0 or self.r2 < 0:
            raise ValueError("squeezing amplitudes must be non-negative")

    def with_(self, **changes) -> "ReservoirSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedBath:
    """Everything the dynamics needs from the reservoirs.

    In squeezed mode ``gamma_left``/``gamma_right`` are the rates of the
    Bogoliubov jumps R and R^dag; ``mu_eff`` is then mu*.
    """

    mode: str
    n_th1: float
    n_th2: float
    N1: float
    N2: float
    M1: float
    M2: float
    r: float
    theta: float
    mu_eff: float
    gamma_left: float
    gamma_right: float
    delta_N: float
    sigma_table: dict = field(default_factory=dict)
    phi_table: dict = field(default_factory=dict)


def thermal_occupation(beta: float, omega: float) -> float:
    """Bose occupation ``1 / (exp(beta omega) - 1)``."""
    x = beta * omega
    if not x > 0:
        raise DomainError(f"beta*omega must be positive, got {x}")
    # written in exp(-x) to stay finite (and reach 0) for large beta*omega
    return float(np.exp(-x) / -np.expm1(-x))


def thermal_rates(spec: ReservoirSpec) -> tuple[float, float]:
    """Jump rates ``(Gamma_left, Gamma_right)`` for unsqueezed reservoirs."""
    n1 = thermal_occupation(spec.beta1, spec.omega)
    n2 = thermal_occupation(spec.beta2, spec.omega)
    return spec.gamma * (n1 + 1.0) * n2, spec.gamma * (n2 + 1.0) * n1


def mu(spec: ReservoirSpec) -> float:
    return (spec.beta1 - spec.beta2) * spec.omega


def bath_moments(beta: float, r: float, omega: float,
                 linear_sinh_moments: bool = False) -> tuple[float, float]:
    """Second moments ``(N, M)`` of one squeezed thermal reservoir mode.

    ``N = n cosh(2r) + sinh(r)^2`` and ``M = -sinh(r) cosh(r) (2n + 1)``.
    With ``linear_sinh_moments`` the ``sinh(r)^2`` term is replaced by
    ``sinh(r)``; that variant is kept only for comparison.
    """
    if r < 0:
        raise ValueError("squeezing amplitude must be non-negative")
    n = thermal_occupation(beta, omega)
    extra = np.sinh(r) if linear_sinh_moments else np.sinh(r) ** 2
    return float(n * np.cosh(2 * r) + extra), float(-np.sinh(r) * np.cosh(r) * (2 * n + 1))


def _moments(spec, literal):
    N1, M1 = bath_moments(spec.beta1, spec.r1, spec.omega, literal)
    N2, M2 = bath_moments(spec.beta2, spec.r2, spec.omega, literal)
    return N1, M1, N2, M2


def effective_squeezing(spec: ReservoirSpec, linear_sinh_moments: bool = False) -> tuple[float, float]:
    """Memory squeezing ``(r, theta)`` from ``tanh(2r) = 2 M1 M2 / ((N1+1)N2 + (N2+1)N1)``."""
    N1, M1, N2, M2 = _moments(spec, linear_sinh_moments)
    rhs = 2 * M1 * M2 / ((N1 + 1) * N2 + (N2 + 1) * N1)
    if not 0.0 <= rhs < 1.0:
        raise DomainError(f"tanh(2r) = {rhs:.6g} outside [0, 1)")
    return float(np.arctanh(rhs) / 2), spec.theta


def squeezed_rates(spec: ReservoirSpec, linear_sinh_moments: bool = False) -> tuple[float, float, float]:
    """``(Gamma_minus, Gamma_plus, delta_N)`` for the Bogoliubov jumps R, R^dag."""
    effective_squeezing(spec, linear_sinh_moments)
    N1, M1, N2, M2 = _moments(spec, linear_sinh_moments)
    total = (N1 + 1) * N2 + (N2 + 1) * N1
    radicand = total ** 2 - 4 * abs(M1 * M2) ** 2
    if radicand < 0:
        raise DomainError(f"negative delta_N radicand {radicand:.6g}")
    dN = float(np.sqrt(radicand))
    half = 0.5 * spec.gamma
    return half * (dN + (N2 - N1)), half * (dN - (N2 - N1)), dN


def mu_star(spec: ReservoirSpec, linear_sinh_moments: bool = False) -> float:
    """Detailed-balance parameter of the squeezed dynamics.

    ``ln((N2 cosh^2 r - N1 sinh^2 r + N1 N2) / (N1 cosh^2 r - N2 sinh^2 r + N1 N2))``

    This is ``ln(Gamma_minus / Gamma_plus)`` rewritten through ``r`` instead
    of ``delta_N``; see :func:`mu_star_symmetric` for the variant with both
    ``sinh^2`` terms added, which does not satisfy detailed balance once
    ``r > 0``.
    """
    r, _ = effective_squeezing(spec, linear_sinh_moments)
    N1, _, N2, _ = _moments(spec, linear_sinh_moments)
    c2, s2 = np.cosh(r) ** 2, np.sinh(r) ** 2
    num = N2 * c2 - N1 * s2 + N1 * N2
    den = N1 * c2 - N2 * s2 + N1 * N2
    if not (num > 0 and den > 0):
        raise DomainError(f"mu* argument not positive ({num:.6g}/{den:.6g})")
    return float(np.log(num / den))


def mu_star_symmetric(spec: ReservoirSpec, linear_sinh_moments: bool = False) -> float:
    """Variant of :func:`mu_star` with both ``sinh^2`` terms added; kept for comparison."""
    r, _ = effective_squeezing(spec, linear_sinh_moments)
    N1, _, N2, _ = _moments(spec, linear_sinh_moments)
    c2, s2 = np.cosh(r) ** 2, np.sinh(r) ** 2
    num = N1 * s2 + N2 * c2 + N1 * N2
    den = N1 * c2 + N2 * s2 + N1 * N2
    if not (num > 0 and den > 0):
        raise DomainError("mu* argument not positive")
    return float(np.log(num / den))


def _tables(m):
    sigma = {"no_jump": 0.0, "left": m, "right": -m}
    return sigma, {k: -v for k, v in sigma.items()}


def derive(spec: ReservoirSpec, mode: str = "thermal",
           linear_sinh_moments: bool = False) -> DerivedBath:
    """Collect occupations, rates and entropy tables for ``mode``.

    Raises
    ------
    DomainError
        Squeezed mode outside the admissible region, including ``mu* <= 0``
        where the squeezed steady state is not normalizable.
    """
    n1 = thermal_occupation(spec.beta1, spec.omega)
    n2 = thermal_occupation(spec.beta2, spec.omega)
    if mode == "thermal":
        g_left, g_right = thermal_rates(spec)
        m = mu(spec)
        sigma, phi = _tables(m)
        return DerivedBath("thermal", n1, n2, n1, n2, 0.0, 0.0, 0.0, 0.0, m,
                           g_left, g_right, (n1 + 1) * n2 + (n2 + 1) * n1, sigma, phi)
    if mode != "squeezed":
        raise ValueError(f"unknown mode {mode!r}")
    N1, M1, N2, M2 = _moments(spec, linear_sinh_moments)
    r, theta = effective_squeezing(spec, linear_sinh_moments)
    g_minus, g_plus, dN = squeezed_rates(spec, linear_sinh_moments)
    m = mu_star(spec, linear_sinh_moments)
    if not m > 0:
        raise DomainError(f"mu* = {m:.6g} <= 0: no normalizable squeezed steady state")
    sigma, phi = _tables(m)
    return DerivedBath("squeezed", n1, n2, N1, N2, M1, M2, r, theta, m,
                       g_minus, g_plus, dN, sigma, phi)
