"""Quantum-jump trajectory sampling with entropy bookkeeping.

Every trajectory is bracketed by two projective measurements: one in the
eigenbasis of the initial state and one in the eigenbasis of the final
state.  Between them the conditional state is propagated step by step
through a :class:`~demon_fridge.dynamics.KrausSet`.

Random numbers are drawn per trajectory from a stream keyed by
``(master_seed, index)``.  A trajectory of ``K`` steps consumes exactly
``K + 2`` uniforms (initial measurement, one per step, final measurement),
so results do not depend on how trajectories are batched or distributed
across worker processes.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import KrausSet, eigh_sorted

__all__ = [
    "Outcome",
    "Trajectory",
    "EntropyLedger",
    "EnsembleResult",
    "make_ledger",
    "trajectory_rng",
    "measure_in_eigenbasis",
    "sample_forward",
    "sample_backward",
    "sample_ensemble",
    "sample_waiting_time",
    "sample_continuous",
    "default_workers",
]

EIG_FLOOR = 1e-14
KIND_CODES = {0: "no_jump", 1: "left", 2: "right"}


@dataclass(frozen=True)
class Outcome:
    index: int
    probability: float
    state: np.ndarray


@dataclass(frozen=True)
class EntropyLedger:
    delta_s_sys: float
    sigma_env_total: float
    delta_phi_total: float
    s_tot: float
    s_na: float
    s_ad: float
    n_left: int
    n_right: int
    q: float | None = None


@dataclass(frozen=True)
class Trajectory:
    initial_outcome: Outcome
    jumps: list
    final_outcome: Outcome
    tau: float
    mode: str
    seed_info: tuple | None = None


def make_ledger(p_n: float, p_m: float, n_left: int, n_right: int, sigma_table: dict,
                phi_table: dict, omega: float | None = None) -> EntropyLedger:
    """Entropy bookkeeping for one trajectory.

    ``q = omega (n_right - n_left)`` is the net heat from the cold to the hot
    reservoir; pass ``omega=None`` when jumps do not carry a definite heat
    quantum (squeezed reservoirs).
    """
    ds = float(np.log(p_n) - np.log(p_m))
    sig = n_left * sigma_table["left"] + n_right * sigma_table["right"]
    phi = n_left * phi_table["left"] + n_right * phi_table["right"]
    q = None if omega is None else omega * (n_right - n_left)
    return EntropyLedger(ds, sig, phi, ds + sig, ds - phi, sig + phi,
                         int(n_left), int(n_right), q)


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for trajectory ``index`` of a run."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def default_workers() -> int:
    return int(os.environ.get("DEMON_FRIDGE_WORKERS", "1"))


# -- measurement --------------------------------------------------------------

@dataclass(frozen=True)
class _Basis:
    probs: np.ndarray
    vecs: np.ndarray
    weights: np.ndarray

    @classmethod
    def of(cls, rho):
        vals, vecs = eigh_sorted(rho)
        vals = np.clip(vals, 0.0, None)
        return cls(vals, vecs, np.where(vals > EIG_FLOOR, vals, 0.0))


def _pick(weights, u):
    """Inverse-CDF sampling, row-wise; ``weights`` is ``(B, n)`` or ``(n,)``."""
    weights = np.broadcast_to(weights, (len(u), np.shape(weights)[-1]))
    cdf = np.cumsum(weights, axis=1)
    idx = (cdf <= (u * cdf[:, -1])[:, None]).sum(axis=1)
    # u * total can round up to total; fall back to the last positive entry
    last = weights.shape[1] - 1 - np.argmax(weights[:, ::-1] > 0, axis=1)
    return np.minimum(idx, last)


def measure_in_eigenbasis(rho: np.ndarray, rng: np.random.Generator) -> tuple[int, float, np.ndarray]:
    """Projective measurement in the eigenbasis of ``rho``.

    Returns ``(index, eigenvalue, eigenvector)``; eigenvalues below 1e-14
    are never selected.
    """
    basis = _Basis.of(rho)
    n = int(_pick(basis.weights, np.array([rng.random()]))[0])
    return n, float(basis.probs[n]), basis.vecs[:, n].copy()


# -- stepping -----------------------------------------------------------------

def _weights(kraus):
    dim = kraus.dim
    n = np.arange(dim, dtype=float)
    up = n + 1.0
    up[-1] = 0.0
    return {k: (n if kraus.lowers[k] else up) * kraus.coef[k] ** 2 for k in ("left", "right")}


def _apply_jump(psi, lowers):
    out = np.zeros_like(psi)
    sq = np.sqrt(np.arange(1, psi.shape[1], dtype=float))
    if lowers:
        out[:, :-1] = psi[:, 1:] * sq
    else:
        out[:, 1:] = psi[:, :-1] * sq
    return out


def _run_batch(u, rho0_basis, rhotau_basis, kraus):
    """Propagate a batch; ``u`` has shape ``(B, K + 2)``.

    Returns initial indices, final indices and the ``(B, K)`` kind codes.
    """
    batch, steps = u.shape[0], u.shape[1] - 2
    ud = kraus.frame.conj().T
    n_idx = _pick(rho0_basis.weights, u[:, 0])
    psi = (ud @ rho0_basis.vecs[:, n_idx]).T.copy()
    weights = _weights(kraus)
    d2 = np.abs(kraus.no_jump_diag) ** 2
    codes = np.zeros((batch, steps), dtype=np.int8)
    for s in range(steps):
        abs2 = psi.real ** 2 + psi.imag ** 2
        p_left = abs2 @ weights["left"]
        p_right = abs2 @ weights["right"]
        p_stay = abs2 @ d2
        x = u[:, s + 1] * (p_left + p_right + p_stay)
        go_left = x < p_left
        go_right = ~go_left & (x < p_left + p_right)
        new = psi * kraus.no_jump_diag
        if go_left.any():
            new[go_left] = _apply_jump(psi[go_left], kraus.lowers["left"])
        if go_right.any():
            new[go_right] = _apply_jump(psi[go_right], kraus.lowers["right"])
        norm = np.sqrt(np.sum(new.real ** 2 + new.imag ** 2, axis=1))
        if np.any(norm < 1e-300):
            raise FloatingPointError("conditional state norm underflow")
        psi = new / norm[:, None]
        codes[:, s] = go_left + 2 * go_right
    final_frame = ud @ rhotau_basis.vecs
    amp = psi @ final_frame.conj()
    over = (amp.real ** 2 + amp.imag ** 2) * (rhotau_basis.weights > 0)
    m_idx = _pick(over, u[:, -1])
    return n_idx, m_idx, codes


def _steps(tau, dt):
    steps = int(round(tau / dt))
    if steps < 0 or abs(steps * dt - tau) > 1e-9 * max(tau, dt):
        raise ValueError(f"tau={tau} is not an integer multiple of dt={dt}")
    return steps


def _single(rho_start, tau, dt, kraus, rho_end, rng, sigma_table, phi_table, omega, seed_info):
    steps = _steps(tau, dt)
    b0, b1 = _Basis.of(rho_start), _Basis.of(rho_end)
    u = rng.random(steps + 2)[None, :]
    n_idx, m_idx, codes = _run_batch(u, b0, b1, kraus)
    n, m, row = int(n_idx[0]), int(m_idx[0]), codes[0]
    jumps = [((s + 0.5) * dt, KIND_CODES[int(c)]) for s, c in enumerate(row) if c]
    traj = Trajectory(Outcome(n, float(b0.probs[n]), b0.vecs[:, n].copy()), jumps,
                      Outcome(m, float(b1.probs[m]), b1.vecs[:, m].copy()),
                      tau, kraus.mode, seed_info)
    ledger = make_ledger(b0.probs[n], b1.probs[m], int(np.sum(row == 1)), int(np.sum(row == 2)),
                         kraus.sigma_table if sigma_table is None else sigma_table,
                         kraus.phi_table if phi_table is None else phi_table, omega)
    return traj, ledger


def sample_forward(rho0: np.ndarray, tau: float, dt: float, kraus: KrausSet,
                   rho_tau: np.ndarray, rng: np.random.Generator,
                   sigma_table: dict | None = None, phi_table: dict | None = None,
                   omega: float | None = None, seed_info=None) -> tuple[Trajectory, EntropyLedger]:
    """Sample one forward trajectory and its entropy ledger.

    Jump times are recorded at step midpoints ``(s + 1/2) dt``.  The ledger
    uses the channel's own sigma/phi tables unless overrides are given.
    """
    if not np.isclose(kraus.dt, dt, rtol=1e-12, atol=0):
        raise ValueError("kraus.dt does not match dt")
    return _single(rho0, tau, dt, kraus, rho_tau, rng, sigma_table, phi_table, omega, seed_info)


def sample_backward(rho_tau_conj: np.ndarray, tau: float, dt: float, backward: KrausSet,
                    rho0_conj: np.ndarray, rng: np.random.Generator,
                    omega: float | None = None, seed_info=None) -> tuple[Trajectory, EntropyLedger]:
    """Sample one trajectory of the backward process.

    Starts from the time-reversed final state and measures finally in the
    eigenbasis of the time-reversed initial state.  Jump labels are those of
    the forward jumps being reversed (see :func:`~demon_fridge.dynamics.backward_kraus`),
    and the ledger uses the backward channel's own (negated) tables.
    """
    if not np.isclose(backward.dt, dt, rtol=1e-12, atol=0):
        raise ValueError("kraus.dt does not match dt")
    q_omega = None if omega is None else -omega
    return _single(rho_tau_conj, tau, dt, backward, rho0_conj, rng, None, None, q_omega, seed_info)


# -- ensembles ----------------------------------------------------------------

@dataclass
class EnsembleResult:
    """Column-oriented record of an ensemble, ordered by trajectory index."""

    index: np.ndarray
    n: np.ndarray
    m: np.ndarray
    p_n: np.ndarray
    p_m: np.ndarray
    n_left: np.ndarray
    n_right: np.ndarray
    s_sys: np.ndarray
    s_env: np.ndarray
    s_tot: np.ndarray
    s_na: np.ndarray
    s_ad: np.ndarray
    delta_phi: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.index)

    def ledgers(self, omega: float | None = None) -> list[EntropyLedger]:
        out = []
        for i in range(len(self)):
            q = None if omega is None else omega * float(self.n_right[i] - self.n_left[i])
            out.append(EntropyLedger(float(self.s_sys[i]), float(self.s_env[i]),
                                     float(self.delta_phi[i]), float(self.s_tot[i]),
                                     float(self.s_na[i]), float(self.s_ad[i]),
                                     int(self.n_left[i]), int(self.n_right[i]), q))
        return out


def _chunk(args):
    start, stop, master_seed, steps, b0, b1, kraus = args
    u = np.stack([trajectory_rng(master_seed, i).random(steps + 2) for i in range(start, stop)])
    n_idx, m_idx, codes = _run_batch(u, b0, b1, kraus)
    return (start, n_idx, m_idx, (codes == 1).sum(axis=1), (codes == 2).sum(axis=1))


def sample_ensemble(rho0: np.ndarray, tau: float, dt: float, kraus: KrausSet,
                    rho_tau: np.ndarray, master_seed: int, size: int,
                    workers: int | None = None, chunk_size: int = 1024,
                    sigma_table: dict | None = None, phi_table: dict | None = None) -> EnsembleResult:
    """Sample ``size`` trajectories with indices ``0..size-1``.

    Trajectories are processed in fixed chunks of ``chunk_size`` indices, so
    the floating-point path of each one is the same for any worker count.
    """
    if size < 1:
        raise ValueError("ensemble size must be >= 1")
    steps = _steps(tau, dt)
    workers = default_workers() if workers is None else workers
    b0, b1 = _Basis.of(rho0), _Basis.of(rho_tau)
    jobs = [(s, min(s + chunk_size, size), master_seed, steps, b0, b1, kraus)
            for s in range(0, size, chunk_size)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk, jobs))
    else:
        parts = [_chunk(j) for j in jobs]
    parts.sort(key=lambda p: p[0])
    n = np.concatenate([p[1] for p in parts])
    m = np.concatenate([p[2] for p in parts])
    nl = np.concatenate([p[3] for p in parts]).astype(np.int64)
    nr = np.concatenate([p[4] for p in parts]).astype(np.int64)
    sigma = kraus.sigma_table if sigma_table is None else sigma_table
    phi = kraus.phi_table if phi_table is None else phi_table
    p_n, p_m = b0.probs[n], b1.probs[m]
    s_sys = np.log(p_n) - np.log(p_m)
    s_env = nl * sigma["left"] + nr * sigma["right"]
    dphi = nl * phi["left"] + nr * phi["right"]
    return EnsembleResult(np.arange(size), n, m, p_n, p_m, nl, nr, s_sys, s_env,
                          s_sys + s_env, s_sys - dphi, s_env + dphi, dphi,
                          meta={"master_seed": master_seed, "steps": steps, "dt": dt, "tau": tau})


# -- continuous-time sampling -------------------------------------------------

def _survival(abs2, lam, t):
    return float(np.sum(abs2 * np.exp(-lam * t)))


def sample_waiting_time(psi: np.ndarray, kraus: KrausSet, rng: np.random.Generator,
                        tol: float = 1e-12) -> tuple[float, str | None]:
    """Time to the next jump and its kind, in continuous time.

    The no-jump evolution is diagonal in the channel's frame with decay
    constants ``lambda_n``, so the survival probability is
    ``sum_n |psi_n|^2 exp(-lambda_n t)``; it is inverted by bisection.
    Returns ``(inf, None)`` when the drawn survival level is never reached.
    """
    w = {k: v / kraus.dt for k, v in _weights(kraus).items()}
    lam = w["left"] + w["right"]
    amp = kraus.frame.conj().T @ psi
    abs2 = np.abs(amp) ** 2
    abs2 = abs2 / abs2.sum()
    u = rng.random()
    if u <= abs2[lam == 0].sum():
        rng.random()
        return np.inf, None
    hi = 1.0 / lam.max()
    while _survival(abs2, lam, hi) > u:
        hi *= 2.0
    lo = 0.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _survival(abs2, lam, mid) > u:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    pop = abs2 * np.exp(-lam * t)
    p_left, p_right = pop @ w["left"], pop @ w["right"]
    kind = "left" if rng.random() * (p_left + p_right) < p_left else "right"
    return t, kind


def sample_continuous(psi0: np.ndarray, tau: float, kraus: KrausSet,
                      rng: np.random.Generator) -> list:
    """Jump record ``[(t, kind), ...]`` on ``[0, tau]`` from waiting-time sampling."""
    w = _weights(kraus)
    ud = kraus.frame.conj().T
    lam = (w["left"] + w["right"]) / kraus.dt
    psi = ud @ psi0
    t, record = 0.0, []
    while True:
        wait, kind = sample_waiting_time(kraus.frame @ psi, kraus, rng)
        if t + wait > tau:
            return record
        t += wait
        psi = psi * np.exp(-0.5 * lam * wait)
        psi = _apply_jump(psi[None, :], kraus.lowers[kind])[0]
        psi /= np.linalg.norm(psi)
        record.append((t, kind))
