"""Lindblad generators, discrete-time Kraus channels and steady states.

Both modes share one structure: a unitary frame U (identity for thermal
reservoirs, the squeezing operator S(xi) for squeezed ones) in which the
jump operator is the plain lowering operator.  Jumps "left" use
``J = U a U^dag`` at rate ``gamma_left`` and jumps "right" use ``J^dag`` at
rate ``gamma_right``.  Superoperators act on column-stacked density matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply, spsolve

from . import fock
from .errors import DegenerateError, TruncationWarning
from .reservoir import DerivedBath, ReservoirSpec, derive

__all__ = [
    "KrausSet",
    "SteadyState",
    "frame_and_jump",
    "liouvillian",
    "apply_liouvillian",
    "kraus_step",
    "apply_channel",
    "backward_kraus",
    "dual_kraus",
    "evolve_master",
    "steady_state",
    "numeric_steady_state",
    "check_density_matrix",
    "eigh_sorted",
    "entropy",
    "trace_distance",
    "vacuum",
    "maximally_mixed",
    "gibbs",
    "time_reverse",
    "vec",
    "unvec",
]


# -- density-matrix helpers ---------------------------------------------------

def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def check_density_matrix(rho: np.ndarray, herm_tol: float = 1e-12,
                         trace_tol: float = 1e-10, eig_tol: float = 1e-10) -> np.ndarray:
    """Return ``rho`` unchanged after validating Hermiticity, trace and positivity."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > herm_tol:
        raise ValueError(f"density matrix not Hermitian (defect {herm:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr!r} != 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -eig_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.2e}")
    return rho


def eigh_sorted(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition with a fixed convention.

    Eigenvalues are sorted descending and each eigenvector (column) is
    rephased so that its first component of modulus above 1e-10 is real
    and positive.
    """
    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order].astype(complex)
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        first = np.flatnonzero(np.abs(col) > 1e-10)[0]
        vecs[:, j] = col * (abs(col[first]) / col[first])
    return vals, vecs


def entropy(rho: np.ndarray, floor: float = 1e-14) -> float:
    vals = np.clip(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)), 0.0, None)
    vals = vals[vals > floor]
    return float(-np.sum(vals * np.log(vals)))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = rho - sigma
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def time_reverse(x: np.ndarray) -> np.ndarray:
    """Antiunitary time reversal: complex conjugation in the Fock basis."""
    return np.conj(x)


def vacuum(space: fock.FockSpace) -> np.ndarray:
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def maximally_mixed(space: fock.FockSpace, k: int | None = None) -> np.ndarray:
    """Uniform mixture of the lowest ``k`` levels (all levels by default)."""
    k = space.dim if k is None else k
    if not 1 <= k <= space.dim:
        raise ValueError(f"k must lie in [1, {space.dim}], got {k}")
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    rho[np.arange(k), np.arange(k)] = 1.0 / k
    return rho


def gibbs(space: fock.FockSpace, mu0: float) -> np.ndarray:
    """Truncated, renormalized ``exp(-mu0 N)``."""
    w = np.exp(-mu0 * space.levels)
    return np.diag(w / w.sum()).astype(complex)


# -- operators ----------------------------------------------------------------

def _bath(spec, mode, bath):
    return derive(spec, mode) if bath is None else bath


def frame_and_jump(bath: DerivedBath, space: fock.FockSpace) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(U, J)``: the preferred frame and the "left" jump operator."""
    if bath.mode == "thermal" or bath.r == 0.0:
        return fock.identity(space), fock.lowering(space)
    jump, s = fock.bogoliubov(space, bath.r, bath.theta)
    return s, jump


def _frame_weights(space):
    """Diagonals of ``a^dag a`` and ``a a^dag`` on the truncated space."""
    w_left = space.levels.copy()
    w_right = space.levels + 1.0
    w_right[-1] = 0.0
    return w_left, w_right


def _generator(jump, bath, dim):
    ident = sp.identity(dim, dtype=complex, format="csr")
    total = sp.csr_matrix((dim ** 2, dim ** 2), dtype=complex)
    for rate, op in ((bath.gamma_left, jump), (bath.gamma_right, jump.conj().T)):
        if rate == 0.0:
            continue
        op = sp.csr_matrix(op)
        opd = op.conj().T
        ll = (opd @ op).tocsr()
        total = total + rate * (sp.kron(op.conj(), op) - 0.5 * sp.kron(ident, ll)
                                - 0.5 * sp.kron(ll.T, ident))
    total = total.tocsr()
    total.eliminate_zeros()
    return total


def liouvillian(spec: ReservoirSpec, space: fock.FockSpace, mode: str = "thermal",
                sparse: bool = False, bath: DerivedBath | None = None):
    """Matrix of the generator acting on column-stacked density matrices.

    Returns a dense ``(dim^2, dim^2)`` array, or CSR when ``sparse``.
    """
    bath = _bath(spec, mode, bath)
    _, jump = frame_and_jump(bath, space)
    total = _generator(jump, bath, space.dim)
    return total if sparse else total.toarray()


def apply_liouvillian(rho: np.ndarray, spec: ReservoirSpec, mode: str = "thermal",
                      bath: DerivedBath | None = None) -> np.ndarray:
    """``L(rho)`` evaluated directly in operator form."""
    bath = _bath(spec, mode, bath)
    space = fock.FockSpace(rho.shape[0] - 1)
    _, jump = frame_and_jump(bath, space)
    out = np.zeros_like(rho, dtype=complex)
    for rate, op in ((bath.gamma_left, jump), (bath.gamma_right, jump.conj().T)):
        ll = op.conj().T @ op
        out += rate * (op @ rho @ op.conj().T - 0.5 * (ll @ rho + rho @ ll))
    return out


# -- Kraus channels -----------------------------------------------------------

@dataclass(frozen=True)
class KrausSet:
    """Discrete-time channel ``{no_jump, left, right}`` in structured form.

    In the frame ``frame`` the no-jump operator is ``diag(no_jump_diag)``
    and each jump kind is ``coef[k]`` times the lowering (``lowers[k]``
    true) or raising operator.  ``ops`` gives the dense Fock-basis matrices.
    """

    frame: np.ndarray
    no_jump_diag: np.ndarray
    coef: dict
    lowers: dict
    dt: float
    mode: str
    normalization: str
    sigma_table: dict = field(default_factory=dict)
    phi_table: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.frame.shape[0]

    @property
    def ops(self) -> dict:
        u = self.frame
        ud = u.conj().T
        space = fock.FockSpace(self.dim - 1)
        a = fock.lowering(space)
        out = {"no_jump": (u * self.no_jump_diag) @ ud}
        for k in ("left", "right"):
            ladder = a if self.lowers[k] else a.conj().T
            out[k] = self.coef[k] * (u @ ladder @ ud)
        return out

    def completeness_defect(self) -> float:
        total = sum(m.conj().T @ m for m in self.ops.values())
        return float(np.abs(total - np.eye(self.dim)).max())

    def rates(self) -> dict:
        """Continuous-time jump rates ``coef^2 / dt``."""
        return {k: self.coef[k] ** 2 / self.dt for k in ("left", "right")}


def kraus_step(spec: ReservoirSpec, space: fock.FockSpace, dt: float,
               mode: str = "thermal", normalization: str = "exact",
               bath: DerivedBath | None = None) -> KrausSet:
    """Kraus set of one time step ``dt``.

    ``exact`` takes the no-jump operator as the principal square root of
    ``I - dt (G_left J^dag J + G_right J J^dag)`` so the channel is trace
    preserving to machine precision; ``first_order`` uses
    ``I - dt/2 (...)`` and is trace preserving only to O(dt^2).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if normalization not in ("exact", "first_order"):
        raise ValueError(f"unknown normalization {normalization!r}")
    bath = _bath(spec, mode, bath)
    if dt * max(bath.gamma_left, bath.gamma_right) * space.n_max >= 0.5:
        raise ValueError("dt too large: jump probability per step must stay well below 1")
    frame, _ = frame_and_jump(bath, space)
    w_left, w_right = _frame_weights(space)
    decay = dt * (bath.gamma_left * w_left + bath.gamma_right * w_right)
    if normalization == "exact":
        if np.any(1.0 - decay <= 0):
            raise ValueError("no-jump square-root argument not positive; reduce dt")
        diag = np.sqrt(1.0 - decay)
    else:
        diag = 1.0 - 0.5 * decay
    return KrausSet(
        frame=frame,
        no_jump_diag=diag,
        coef={"left": np.sqrt(dt * bath.gamma_left), "right": np.sqrt(dt * bath.gamma_right)},
        lowers={"left": True, "right": False},
        dt=dt,
        mode=bath.mode,
        normalization=normalization,
        sigma_table=dict(bath.sigma_table),
        phi_table=dict(bath.phi_table),
    )


def apply_channel(kraus: KrausSet, rho: np.ndarray, steps: int = 1) -> np.ndarray:
    ops = list(kraus.ops.values())
    for _ in range(steps):
        rho = sum(m @ rho @ m.conj().T for m in ops)
    return rho


def backward_kraus(kraus: KrausSet, sigma_table: dict | None = None) -> KrausSet:
    """Backward channel ``e^{-sigma_k/2} Theta M_k^dag Theta^dag``.

    Labels are kept: backward ``left`` is the reversal of a forward left
    jump, so it raises.  The returned set carries negated sigma/phi tables,
    which are the entropy tables of the backward process itself.
    """
    sigma = kraus.sigma_table if sigma_table is None else sigma_table
    frame = np.conj(kraus.frame)
    coef = {k: kraus.coef[k] * np.exp(-0.5 * sigma[k]) for k in ("left", "right")}
    out = KrausSet(
        frame=frame,
        no_jump_diag=kraus.no_jump_diag * np.exp(-0.5 * sigma["no_jump"]),
        coef=coef,
        lowers={k: not kraus.lowers[k] for k in ("left", "right")},
        dt=kraus.dt,
        mode=kraus.mode,
        normalization=kraus.normalization,
        sigma_table={k: -v for k, v in sigma.items()},
        phi_table={k: -v for k, v in kraus.phi_table.items()},
    )
    # the structured form must reproduce the defining formula
    fwd, bwd = kraus.ops, out.ops
    for k, m in fwd.items():
        literal = np.exp(-0.5 * sigma[k]) * time_reverse(m.conj().T)
        err = np.abs(literal - bwd[k]).max()
        if err > 1e-10 * max(1.0, np.abs(literal).max()):
            raise AssertionError(f"backward Kraus operator {k} inconsistent ({err:.2e})")
    return out


def dual_kraus(kraus: KrausSet, sigma_table: dict | None = None,
               phi_table: dict | None = None, tol: float = 1e-12) -> KrausSet:
    """Dual channel ``D_k = e^{-(sigma_k + dphi_k)/2} M_k``.

    In this model the potential changes cancel the environment entropy jump
    by jump, so ``D_k = M_k``; a larger discrepancy means the tables are
    inconsistent and raises ``ValueError``.
    """
    sigma = kraus.sigma_table if sigma_table is None else sigma_table
    phi = kraus.phi_table if phi_table is None else phi_table
    scale = {k: np.exp(-0.5 * (sigma[k] + phi[k])) for k in ("no_jump", "left", "right")}
    dual = replace(kraus,
                   no_jump_diag=kraus.no_jump_diag * scale["no_jump"],
                   coef={k: kraus.coef[k] * scale[k] for k in ("left", "right")})
    fwd, dops = kraus.ops, dual.ops
    for k in fwd:
        err = np.abs(dops[k] - fwd[k]).max()
        if err > tol:
            raise ValueError(f"dual operator {k} differs from forward by {err:.3e}")
    return dual


# -- steady states ------------------------------------------------------------

@dataclass(frozen=True)
class SteadyState:
    rho: np.ndarray
    mu_eff: float
    Z: float
    mode: str
    populations: np.ndarray
    frame: np.ndarray

    @property
    def mean_number(self) -> float:
        """``<N>`` of the unsqueezed Gibbs factor, i.e. in the squeezed basis."""
        return float(np.dot(np.arange(len(self.populations)), self.populations))

    def analytic_entropy(self) -> float:
        """``mu <N> + ln Z`` for the semi-infinite ladder."""
        n = 1.0 / np.expm1(self.mu_eff)
        return float(self.mu_eff * n + np.log(self.Z))

    def potential(self) -> np.ndarray:
        """Nonequilibrium potential ``-ln(rho)`` of the truncated state."""
        phi = -np.log(self.populations)
        return (self.frame * phi) @ self.frame.conj().T


def steady_state(spec: ReservoirSpec, space: fock.FockSpace, mode: str = "thermal",
                 allow_degenerate: bool = False, bath: DerivedBath | None = None) -> SteadyState:
    """Closed-form stationary state ``U exp(-mu N) U^dag / Z``, truncated.

    Raises
    ------
    DegenerateError
        If ``mu_eff <= 1e-12``.  With ``allow_degenerate`` the maximally mixed
        truncated state is returned instead, with a warning.
    """
    bath = _bath(spec, mode, bath)
    frame, _ = frame_and_jump(bath, space)
    m = bath.mu_eff
    if m <= 1e-12:
        if not allow_degenerate:
            raise DegenerateError(
                f"mu_eff = {m:.3g}: no normalizable steady state on the semi-infinite ladder")
        warnings.warn("mu_eff ~ 0: returning the maximally mixed truncated state", stacklevel=2)
        pops = np.full(space.dim, 1.0 / space.dim)
        return SteadyState(np.diag(pops).astype(complex), m, np.inf, bath.mode, pops, frame)
    w = np.exp(-m * space.levels)
    pops = w / w.sum()
    rho = (frame * pops) @ frame.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return SteadyState(rho, m, float(-1.0 / np.expm1(-m)), bath.mode, pops, frame)


def numeric_steady_state(generator, dim: int) -> np.ndarray:
    """Null vector of the generator, normalized to unit trace.

    One (redundant) row of the generator is replaced by the trace
    condition and the resulting linear system is solved directly.
    """
    a = sp.lil_matrix(generator, dtype=complex)
    a[0, :] = vec(np.eye(dim))
    b = np.zeros(dim * dim, dtype=complex)
    b[0] = 1.0
    rho = unvec(spsolve(a.tocsc(), b), dim)
    return 0.5 * (rho + rho.conj().T)


# -- propagation --------------------------------------------------------------

def evolve_master(rho0: np.ndarray, times, spec: ReservoirSpec, mode: str = "thermal",
                  bath: DerivedBath | None = None, top_fraction: float = 0.1,
                  top_tol: float = 1e-8) -> np.ndarray:
    """States ``exp(t L) rho0`` at each of ``times`` (non-decreasing, >= 0).

    Returns an array of shape ``(len(times), dim, dim)``.  Emits a
    :class:`TruncationWarning` if the top ``top_fraction`` of the levels ever
    holds more than ``top_tol`` population.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    dim = rho0.shape[0]
    space = fock.FockSpace(dim - 1)
    bath = _bath(spec, mode, bath)
    frame, _ = frame_and_jump(bath, space)
    # in the frame the jump is the plain lowering operator, so the generator stays sparse
    gen = _generator(fock.lowering(space), bath, dim).tocsc()
    out = np.empty((len(times), dim, dim), dtype=complex)
    v, t_prev = vec(frame.conj().T @ rho0 @ frame).astype(complex), 0.0
    for i, t in enumerate(times):
        if t > t_prev:
            v = expm_multiply(gen * (t - t_prev), v)
            t_prev = t
        rho = frame @ unvec(v, dim) @ frame.conj().T
        out[i] = 0.5 * (rho + rho.conj().T)
    n_top = max(1, int(np.ceil(top_fraction * dim)))
    top_pop = np.einsum("tii->t", out[:, -n_top:, -n_top:]).real.max()
    if top_pop > top_tol:
        warnings.warn(f"population {top_pop:.2e} in the top {n_top} levels; increase n_max",
                      TruncationWarning, stacklevel=2)
    return out
