"""Entropy and energy flows, second-law bounds and squeezing enhancements."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fock
from .dynamics import (apply_liouvillian, entropy, evolve_master, frame_and_jump,
                       steady_state)
from .reservoir import DerivedBath, ReservoirSpec, derive, mu
from .trajectory import EnsembleResult

__all__ = [
    "RateRecord",
    "EnhancementReport",
    "EnsembleSummary",
    "rates",
    "relaxation",
    "landauer_check",
    "enhancements",
    "ensemble_statistics",
    "jackknife_mean",
]

EIG_FLOOR = 1e-14


@dataclass(frozen=True)
class RateRecord:
    """Instantaneous flows; ``e_dot`` counts energy moving from cold to hot."""

    t: float
    s_dot: float
    e_dot: float
    a_dot: float
    s_tot_dot: float
    mode: str
    clipped_mass: float = 0.0


def _asymmetry_operator(space, theta, omega):
    """``-(omega/2)(a^dag^2 e^{i theta} + a^2 e^{-i theta})``."""
    a = fock.lowering(space)
    a2 = a @ a
    return -0.5 * omega * (a2.conj().T * np.exp(1j * theta) + a2 * np.exp(-1j * theta))


def rates(rho_t: np.ndarray, rho_dot: np.ndarray, spec: ReservoirSpec, mode: str = "thermal",
          t: float = 0.0, bath: DerivedBath | None = None) -> RateRecord:
    """Entropy, energy and asymmetry flows at one instant.

    ``s_dot = -Tr[rho_dot ln rho]`` with eigenvalues clipped at 1e-14.  The
    total entropy production rate subtracts the environment entropy flow
    ``mu_eff Tr[J^dag J rho_dot]``, with J the (possibly Bogoliubov) jump
    operator.
    """
    bath = derive(spec, mode) if bath is None else bath
    dim = rho_t.shape[0]
    space = fock.FockSpace(dim - 1)
    vals, vecs = np.linalg.eigh(0.5 * (rho_t + rho_t.conj().T))
    clipped = float(np.abs(vals[vals < EIG_FLOOR]).sum())
    if clipped > 1e-8:
        warnings.warn(f"clipped eigenvalue mass {clipped:.2e} in entropy rate", stacklevel=2)
    logs = np.log(np.clip(vals, EIG_FLOOR, None))
    diag_dot = np.einsum("ij,ik,kj->j", vecs.conj(), rho_dot, vecs).real
    s_dot = float(-np.dot(diag_dot, logs))
    n_op = fock.number_operator(space)
    e_dot = float(spec.omega * np.trace(n_op @ rho_dot).real)
    a_dot = float(np.trace(_asymmetry_operator(space, bath.theta, spec.omega) @ rho_dot).real)
    frame, jump = frame_and_jump(bath, space)
    env = float(bath.mu_eff * np.trace(jump.conj().T @ jump @ rho_dot).real)
    return RateRecord(t, s_dot, e_dot, a_dot, s_dot - env, bath.mode, clipped)


def relaxation(rho0: np.ndarray, times, spec: ReservoirSpec, mode: str = "thermal") -> list[RateRecord]:
    """Rate records along ``exp(t L) rho0``."""
    bath = derive(spec, mode)
    states = evolve_master(rho0, times, spec, mode, bath=bath)
    out = []
    for t, rho in zip(np.atleast_1d(times), states):
        out.append(rates(rho, apply_liouvillian(rho, spec, mode, bath=bath), spec, mode, float(t), bath))
    return out


def landauer_check(record: RateRecord, spec: ReservoirSpec, tol: float = 1e-14) -> tuple[str, float]:
    """Classify the operating regime and return the slack of the thermal bound.

    eraser: ``(b1 - b2)|E_dot| - |S_dot|``; fridge: ``S_dot/(b1 - b2) - E_dot``.
    A negative slack means the bound is violated.
    """
    if record.mode != "thermal":
        raise ValueError("the thermal bounds apply to unsqueezed reservoirs only")
    db = spec.beta1 - spec.beta2
    s, e = record.s_dot, record.e_dot
    if abs(s) < tol and abs(e) < tol:
        return "stationary", 0.0
    if e < 0 and s < 0:
        return "eraser", db * abs(e) - abs(s)
    if s > 0 and e > 0:
        return "fridge", s / db - e
    if s >= 0 and e <= 0:
        return "dissipative", s + db * abs(e)
    return "violation", s - db * e


@dataclass(frozen=True)
class EnhancementReport:
    """Changes between the thermal steady state and the squeezed one.

    Energies are in units of ``omega`` times hbar = 1, entropies in nats.
    """

    mu: float
    mu_star: float
    r: float
    delta_S_sq: float
    delta_E_sq: float
    delta_A_M: float
    e_max_star: float
    landauer_lhs: float
    landauer_rhs: float
    numeric: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _occ(m):
    return 1.0 / np.expm1(m)


def _gibbs_entropy(m):
    return m * _occ(m) - np.log(-np.expm1(-m))


def enhancements(spec: ReservoirSpec, space: fock.FockSpace | None = None) -> EnhancementReport:
    """Closed-form squeezing enhancements, optionally cross-checked numerically.

    ``delta_E_sq`` is ``omega (<N>_{pi*} - <N>_pi)`` with
    ``<N>_{pi*} = cosh(2r) n* + sinh(r)^2``.  When ``space`` is given the same
    quantities are evaluated on the truncated states and stored in
    ``numeric``.
    """
    bath = derive(spec, "squeezed")
    m, ms, r, w = mu(spec), bath.mu_eff, bath.r, spec.omega
    n, ns = _occ(m), _occ(ms)
    dS = float(_gibbs_entropy(ms) - _gibbs_entropy(m))
    dE = float(w * (np.cosh(2 * r) * ns + np.sinh(r) ** 2 - n))
    dA = float(w * np.sinh(2 * r) * (ns + 0.5))
    e_max = float(w / ms * dS / np.cosh(2 * r) + np.tanh(2 * r) * dA)
    db = spec.beta1 - spec.beta2
    numeric = {}
    if space is not None:
        pi = steady_state(spec, space, "thermal").rho
        pis = steady_state(spec, space, "squeezed", bath=bath).rho
        n_op = fock.number_operator(space)
        x, p = fock.quadratures(space, bath.theta)
        numeric = {
            "delta_S_sq": entropy(pis) - entropy(pi),
            "delta_E_sq": float(w * (np.trace(n_op @ pis) - np.trace(n_op @ pi)).real),
            "delta_A_M": float(0.5 * w * np.trace((p @ p - x @ x) @ pis).real),
        }
    return EnhancementReport(m, ms, r, dS, dE, dA, e_max, db * abs(dE), abs(dS), numeric)


def jackknife_mean(x: np.ndarray) -> tuple[float, float]:
    """Mean and its leave-one-out jackknife standard error."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        return float(x.mean()), 0.0
    loo = (x.sum() - x) / (n - 1)
    return float(x.mean()), float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


@dataclass(frozen=True)
class EnsembleSummary:
    size: int
    s_tot_mean: float
    s_tot_se: float
    s_na_mean: float
    s_na_se: float
    ift_tot: float
    ift_tot_se: float
    ift_na: float
    ift_na_se: float
    s_sys_mean: float
    max_abs_s_ad: float
    n_left_hist: list
    n_right_hist: list

    def as_dict(self) -> dict:
        return asdict(self)


def ensemble_statistics(ledgers) -> EnsembleSummary:
    """Means, standard errors and fluctuation-theorem estimators.

    Accepts a sequence of :class:`EntropyLedger` or an :class:`EnsembleResult`.
    """
    if isinstance(ledgers, EnsembleResult):
        s_tot, s_na, s_ad, s_sys = ledgers.s_tot, ledgers.s_na, ledgers.s_ad, ledgers.s_sys
        nl, nr = ledgers.n_left, ledgers.n_right
    else:
        ledgers = list(ledgers)
        if not ledgers:
            raise ValueError("empty ensemble")
        cols = {f: np.array([getattr(l, f) for l in ledgers])
                for f in ("s_tot", "s_na", "s_ad", "delta_s_sys", "n_left", "n_right")}
        s_tot, s_na, s_ad, s_sys = cols["s_tot"], cols["s_na"], cols["s_ad"], cols["delta_s_sys"]
        nl, nr = cols["n_left"], cols["n_right"]
    n = len(s_tot)
    st_se = float(s_tot.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    sn_se = float(s_na.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    ift, ift_se = jackknife_mean(np.exp(-s_tot))
    ift_na, ift_na_se = jackknife_mean(np.exp(-s_na))
    return EnsembleSummary(n, float(s_tot.mean()), st_se, float(s_na.mean()), sn_se,
                           ift, ift_se, ift_na, ift_na_se, float(np.mean(s_sys)),
                           float(np.abs(s_ad).max()),
                           np.bincount(np.asarray(nl, dtype=np.int64)).tolist(),
                           np.bincount(np.asarray(nr, dtype=np.int64)).tolist())
