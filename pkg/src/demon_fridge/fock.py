"""Truncated Fock space of the memory and the operators acting on it.

All operators are plain dense ``numpy`` arrays of shape ``(dim, dim)`` with
``dim = n_max + 1``.  Identities such as ``[a, a^dagger] = I`` fail on the
top level because of the truncation; tests exempt that row and column.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from .errors import TruncationError

__all__ = [
    "FockSpace",
    "lowering",
    "raising",
    "number_operator",
    "identity",
    "squeeze_generator",
    "squeeze_operator",
    "squeeze_quality",
    "bogoliubov",
    "quadratures",
    "adequate_n_max",
]


@dataclass(frozen=True)
class FockSpace:
    """Levels ``|0>, ..., |n_max>`` of the memory ladder."""

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @cached_property
    def levels(self) -> np.ndarray:
        return np.arange(self.dim, dtype=float)

    def basis(self, n: int) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=complex)
        vec[n] = 1.0
        return vec


def lowering(space: FockSpace) -> np.ndarray:
    """Annihilation operator a_L with ``<n-1|a|n> = sqrt(n)``."""
    return np.diag(np.sqrt(space.levels[1:]), k=1).astype(complex)


def raising(space: FockSpace) -> np.ndarray:
    """Creation operator a_R, the adjoint of :func:`lowering`."""
    return lowering(space).conj().T


def number_operator(space: FockSpace) -> np.ndarray:
    return np.diag(space.levels).astype(complex)


def identity(space: FockSpace) -> np.ndarray:
    return np.eye(space.dim, dtype=complex)


def squeeze_generator(space: FockSpace, r: float, theta: float) -> np.ndarray:
    """Anti-Hermitian ``(r/2)(a^2 e^{-i theta} - a^dag^2 e^{i theta})``."""
    a = lowering(space)
    a2 = a @ a
    return 0.5 * r * (a2 * np.exp(-1j * theta) - a2.conj().T * np.exp(1j * theta))


def squeeze_operator(space: FockSpace, r: float, theta: float = 0.0,
                     tol: float = 1e-8) -> np.ndarray:
    """Squeezing operator S(xi), xi = r e^{i theta}, on the truncated space.

    The exponential of the truncated (anti-Hermitian) generator is unitary
    on the whole truncated space, so the unitarity defect only monitors
    round-off.  Use :func:`squeeze_quality` to judge whether the truncation
    reproduces the infinite-dimensional canonical transformation.

    Raises
    ------
    TruncationError
        If ``max|S^dag S - I|`` on the lower half-space exceeds ``tol``.
    """
    if not np.isfinite(r):
        raise ValueError("squeezing amplitude must be finite")
    if r == 0.0:
        return identity(space)
    s = expm(squeeze_generator(space, r, theta))
    half = max(space.dim // 2, 1)
    defect = np.abs((s.conj().T @ s)[:half, :half] - np.eye(half)).max()
    if defect > tol:
        raise TruncationError(f"squeeze operator unitarity defect {defect:.3e} > {tol:.1e}")
    return s


def squeeze_quality(space: FockSpace, r: float, theta: float = 0.0) -> dict:
    """Truncation diagnostics for S(xi) restricted to the lower half-space.

    Returns the unitarity defect and the deviation of ``S a S^dag`` from
    ``a cosh r + a^dag sinh r e^{i theta}`` (both as max-norms).
    """
    s = squeeze_operator(space, r, theta, tol=np.inf)
    a = lowering(space)
    half = max(space.dim // 2, 1)
    exact = a * np.cosh(r) + a.conj().T * np.sinh(r) * np.exp(1j * theta)
    transformed = s @ a @ s.conj().T
    return {
        "unitarity_defect": float(np.abs((s.conj().T @ s)[:half, :half] - np.eye(half)).max()),
        "canonical_defect": float(np.abs((transformed - exact)[:half, :half]).max()),
    }


def bogoliubov(space: FockSpace, r: float, theta: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(R, S)`` with ``R = S a S^dag`` built on the truncated space.

    Building R by conjugation (rather than from the cosh/sinh formula) keeps
    ``R^dag R`` and ``R R^dag`` simultaneously diagonal in the squeezed basis
    ``S|n>``, which the trajectory sampler relies on.
    """
    s = squeeze_operator(space, r, theta, tol=np.inf)
    return s @ lowering(space) @ s.conj().T, s


def quadratures(space: FockSpace, theta: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Dimensionless quadratures ``(x_{theta/2}, p_{theta/2})`` with ``[x, p] = i``."""
    a = lowering(space)
    ad = a.conj().T
    ph = np.exp(0.5j * theta)
    x = (ad * ph + a * ph.conjugate()) / np.sqrt(2.0)
    p = 1j * (ad * ph - a * ph.conjugate()) / np.sqrt(2.0)
    return x, p


def adequate_n_max(mean_occupation: float, r: float = 0.0, tail_tol: float | None = None) -> int:
    """Rule-of-thumb truncation ``10 (<N> + sinh^2 r) + 20``, doubled when r > 0.

    The doubling compensates for the truncated squeezing exponential, whose
    low-level matrix elements are only accurate well below the cut.  For
    large ``<N>`` the rule leaves a Gibbs tail of about ``e^{-10}``; pass
    ``tail_tol`` to also require ``(n/(n+1))^(n_max+1) <= tail_tol`` for the
    geometric distribution with mean ``n = <N>``.  This is an engineering
    choice, not a derived bound.
    """
    base = int(np.ceil(10.0 * (mean_occupation + np.sinh(r) ** 2) + 20))
    n_max = 2 * base if r > 0 else base
    if tail_tol is not None and mean_occupation > 0:
        ratio = mean_occupation / (mean_occupation + 1.0)
        n_max = max(n_max, int(np.ceil(np.log(tail_tol) / np.log(ratio))))
    return n_max
