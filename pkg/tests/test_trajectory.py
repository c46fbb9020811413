import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2_contingency

from demon_fridge import dynamics as dyn
from demon_fridge import fock
from demon_fridge import trajectory as tr
from demon_fridge.reservoir import ReservoirSpec, derive

BASE = ReservoirSpec(5.0, 1.2)
SQZ = BASE.with_(r1=0.3, r2=0.5)


def _setup(spec=BASE, mode="thermal", n_max=12, dt=0.01, rho0=None):
    space = fock.FockSpace(n_max)
    k = dyn.kraus_step(spec, space, dt, mode)
    rho0 = dyn.gibbs(space, 1.0) if rho0 is None else rho0
    return space, k, rho0


@settings(max_examples=50, deadline=None)
@given(n_left=st.integers(0, 50), n_right=st.integers(0, 50),
       p_n=st.floats(1e-10, 1.0), p_m=st.floats(1e-10, 1.0))
def test_ledger_identities(n_left, n_right, p_n, p_m):
    bath = derive(BASE, "thermal")
    led = tr.make_ledger(p_n, p_m, n_left, n_right, bath.sigma_table, bath.phi_table, omega=1.0)
    assert led.s_ad == 0.0
    assert abs(led.s_tot - (np.log(p_n) - np.log(p_m) + 3.8 * (n_left - n_right))) < 1e-9
    assert abs(led.s_tot - led.s_na) < 1e-9
    assert led.q == n_right - n_left


def test_rng_streams():
    a = tr.trajectory_rng(5, 3).random(4)
    assert np.abs(a - tr.trajectory_rng(5, 3).random(4)).max() == 0
    assert np.abs(a - tr.trajectory_rng(5, 4).random(4)).max() > 0
    assert np.abs(a - tr.trajectory_rng(6, 3).random(4)).max() > 0


def test_default_workers(monkeypatch):
    monkeypatch.setenv("DEMON_FRIDGE_WORKERS", "3")
    assert tr.default_workers() == 3
    monkeypatch.delenv("DEMON_FRIDGE_WORKERS")
    assert tr.default_workers() == 1


def test_pick_inverse_cdf():
    w = np.array([0.0, 0.5, 0.0, 0.5, 0.0])
    u = np.array([0.0, 0.25, 0.5, 0.75, 1.0 - 1e-17, 1.0])
    assert tr._pick(w, u).tolist() == [1, 1, 3, 3, 3, 3]


def test_measurement_skips_zero_eigenvalues():
    space = fock.FockSpace(6)
    rho = dyn.maximally_mixed(space, 2)
    rng = np.random.default_rng(0)
    picks = {tr.measure_in_eigenbasis(rho, rng)[0] for _ in range(200)}
    assert picks == {0, 1}


def test_single_trajectory_record():
    space, k, rho0 = _setup()
    rho_tau = dyn.apply_channel(k, rho0, 100)
    traj, led = tr.sample_forward(rho0, 1.0, 0.01, k, rho_tau, tr.trajectory_rng(0, 7), omega=1.0)
    assert len(traj.jumps) == led.n_left + led.n_right
    for t, kind in traj.jumps:
        assert kind in ("left", "right")
        assert abs((t / 0.01 - 0.5) - round(t / 0.01 - 0.5)) < 1e-9
    with pytest.raises(ValueError):
        tr.sample_forward(rho0, 1.005, 0.01, k, rho_tau, tr.trajectory_rng(0, 7))


def test_ensemble_matches_single_trajectories():
    space, k, rho0 = _setup()
    rho_tau = dyn.apply_channel(k, rho0, 50)
    ens = tr.sample_ensemble(rho0, 0.5, 0.01, k, rho_tau, 11, 40, chunk_size=16)
    for i in (0, 17, 39):
        _, led = tr.sample_forward(rho0, 0.5, 0.01, k, rho_tau, tr.trajectory_rng(11, i))
        assert led.n_left == ens.n_left[i] and led.n_right == ens.n_right[i]
        assert led.s_tot == ens.s_tot[i]


def test_ensemble_independent_of_workers():
    space, k, rho0 = _setup()
    rho_tau = dyn.apply_channel(k, rho0, 50)
    a = tr.sample_ensemble(rho0, 0.5, 0.01, k, rho_tau, 3, 2500, workers=1)
    b = tr.sample_ensemble(rho0, 0.5, 0.01, k, rho_tau, 3, 2500, workers=2)
    for name in ("n", "m", "n_left", "n_right", "s_tot", "s_na"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_stationary_ensemble_has_zero_adiabatic_part():
    space, k, _ = _setup(SQZ, "squeezed", n_max=30)
    pi = dyn.steady_state(SQZ, space, "squeezed").rho
    ens = tr.sample_ensemble(pi, 1.0, 0.01, k, dyn.apply_channel(k, pi, 100), 0, 2000)
    assert np.all(ens.s_ad == 0.0)


def test_mean_system_entropy_change():
    space, k, rho0 = _setup(n_max=20)
    steps = 100
    rho_tau = dyn.apply_channel(k, rho0, steps)
    ens = tr.sample_ensemble(rho0, 1.0, 0.01, k, rho_tau, 2, 20000)
    expected = dyn.entropy(rho_tau) - dyn.entropy(rho0)
    se = ens.s_sys.std(ddof=1) / np.sqrt(len(ens))
    assert abs(ens.s_sys.mean() - expected) < 4 * se


def test_backward_ensemble_ift():
    space, k, rho0 = _setup(n_max=10, dt=0.02)
    steps = 25
    rho_tau = dyn.apply_channel(k, rho0, steps)
    kb = dyn.backward_kraus(k)
    s = []
    for i in range(3000):
        _, led = tr.sample_backward(np.conj(rho_tau), 0.5, 0.02, kb, np.conj(rho0),
                                    tr.trajectory_rng(9, i))
        s.append(led.s_tot)
    w = np.exp(-np.array(s))
    assert abs(w.mean() - 1) < 4 * w.std(ddof=1) / np.sqrt(len(w))


def test_backward_left_jumps_raise():
    space, k, _ = _setup()
    kb = dyn.backward_kraus(k)
    vac = space.basis(0)
    assert np.linalg.norm(kb.ops["left"] @ vac) > 0
    assert np.linalg.norm(kb.ops["right"] @ vac) == 0


def test_waiting_time_from_first_level():
    space, k, _ = _setup(n_max=8)
    bath = derive(BASE, "thermal")
    lam = bath.gamma_left + 2 * bath.gamma_right
    rng = np.random.default_rng(4)
    draws = [tr.sample_waiting_time(space.basis(1), k, rng) for _ in range(4000)]
    t = np.array([d[0] for d in draws])
    assert abs(t.mean() - 1 / lam) < 4 / lam / np.sqrt(len(t))
    frac_left = np.mean([d[1] == "left" for d in draws])
    p = bath.gamma_left / lam
    assert abs(frac_left - p) < 4 * np.sqrt(p * (1 - p) / len(t))


def test_waiting_time_never_jumps_from_dark_state():
    spec = ReservoirSpec(1000.0, 1.0)
    space = fock.FockSpace(4)
    k = dyn.kraus_step(spec, space, 0.01)
    t, kind = tr.sample_waiting_time(space.basis(0), k, np.random.default_rng(0))
    assert t == np.inf and kind is None


def test_fixed_step_agrees_with_waiting_time_sampling():
    spec = ReservoirSpec(2.0, 0.5)
    space = fock.FockSpace(10)
    dt, tau, size = 0.002, 1.0, 3000
    k = dyn.kraus_step(spec, space, dt)
    rho0 = dyn.vacuum(space)
    ens = tr.sample_ensemble(rho0, tau, dt, k, dyn.apply_channel(k, rho0, 500), 1, size)
    rng = np.random.default_rng(5)
    cont = [len(tr.sample_continuous(space.basis(0), tau, k, rng)) for _ in range(size)]
    jumps = ens.n_left + ens.n_right
    top = 4
    table = np.array([np.bincount(np.minimum(jumps, top), minlength=top + 1),
                      np.bincount(np.minimum(cont, top), minlength=top + 1)])
    _, p_value, _, _ = chi2_contingency(table)
    assert p_value > 1e-3
