import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from demon_fridge import dynamics as dyn
from demon_fridge import fock
from demon_fridge.errors import DegenerateError, TruncationWarning
from demon_fridge.reservoir import ReservoirSpec, derive

BASE = ReservoirSpec(5.0, 1.2)
SQZ = BASE.with_(r1=0.3, r2=0.5, theta=1.0)


def _random_state(dim, seed=0):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def test_vec_roundtrip_and_kron_convention():
    rng = np.random.default_rng(1)
    a, x, b = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.abs(dyn.unvec(dyn.vec(x), 3) - x).max() == 0
    assert np.abs(np.kron(b.T, a) @ dyn.vec(x) - dyn.vec(a @ x @ b)).max() < 1e-12


def test_check_density_matrix():
    dyn.check_density_matrix(_random_state(4))
    with pytest.raises(ValueError):
        dyn.check_density_matrix(2 * _random_state(4))
    with pytest.raises(ValueError):
        dyn.check_density_matrix(np.diag([1.5, -0.5]))


def test_initial_states():
    space = fock.FockSpace(10)
    assert abs(dyn.entropy(dyn.maximally_mixed(space, 8)) - np.log(8)) < 1e-12
    assert dyn.entropy(dyn.vacuum(space)) == 0.0
    g = dyn.gibbs(space, 1.0)
    assert abs(np.trace(g) - 1) < 1e-15
    assert abs(g[1, 1] / g[0, 0] - np.exp(-1.0)) < 1e-15
    with pytest.raises(ValueError):
        dyn.maximally_mixed(space, 12)


def test_eigh_sorted_convention():
    vals, vecs = dyn.eigh_sorted(_random_state(5, seed=3))
    assert np.all(np.diff(vals) <= 0)
    for j in range(5):
        first = vecs[np.flatnonzero(np.abs(vecs[:, j]) > 1e-10)[0], j]
        assert abs(first.imag) < 1e-15 and first.real > 0


@pytest.mark.parametrize("spec, mode", [(BASE, "thermal"), (SQZ, "squeezed")])
def test_liouvillian_trace_preserving(spec, mode):
    space = fock.FockSpace(12)
    gen = dyn.liouvillian(spec, space, mode)
    assert np.abs(dyn.vec(np.eye(space.dim)).conj() @ gen).max() < 1e-13
    rho = _random_state(space.dim)
    direct = dyn.apply_liouvillian(rho, spec, mode)
    assert np.abs(dyn.unvec(gen @ dyn.vec(rho), space.dim) - direct).max() < 1e-12


@pytest.mark.parametrize("spec, mode, n_max", [(BASE, "thermal", 30), (SQZ, "squeezed", 50)])
def test_steady_state_fixed_point(spec, mode, n_max):
    space = fock.FockSpace(n_max)
    ss = dyn.steady_state(spec, space, mode)
    assert np.abs(dyn.apply_liouvillian(ss.rho, spec, mode)).max() < 1e-10
    numeric = dyn.numeric_steady_state(dyn.liouvillian(spec, space, mode, sparse=True), space.dim)
    assert dyn.trace_distance(ss.rho, numeric) < 1e-8
    assert abs(dyn.entropy(ss.rho) - ss.analytic_entropy()) < 1e-10


def test_thermal_steady_state_values():
    ss = dyn.steady_state(BASE, fock.FockSpace(30))
    assert abs(ss.mean_number - 0.02288267495708944) < 1e-12
    assert abs(ss.Z - 1.0 / (1.0 - np.exp(-3.8))) < 1e-14
    # the potential is mu N + ln Z
    assert np.abs(np.diag(ss.potential()).real - (3.8 * np.arange(31) + np.log(ss.Z))).max() < 1e-10


def test_null_space_is_one_dimensional():
    space = fock.FockSpace(8)
    sv = np.linalg.svd(dyn.liouvillian(SQZ, space, "squeezed"), compute_uv=False)
    assert sv[-1] < 1e-12
    assert sv[-2] > 1e-4


def test_degenerate_steady_state():
    spec = ReservoirSpec(1.2, 1.2)
    with pytest.raises(DegenerateError):
        dyn.steady_state(spec, fock.FockSpace(5))
    with pytest.warns(UserWarning):
        ss = dyn.steady_state(spec, fock.FockSpace(5), allow_degenerate=True)
    assert abs(ss.rho[0, 0] - 1 / 6) < 1e-15


@pytest.mark.parametrize("spec, mode", [(BASE, "thermal"), (SQZ, "squeezed")])
def test_kraus_completeness_and_fixed_point(spec, mode):
    space = fock.FockSpace(20)
    k = dyn.kraus_step(spec, space, 0.01, mode)
    assert k.completeness_defect() < 1e-13
    pi = dyn.steady_state(spec, space, mode).rho
    assert np.abs(dyn.apply_channel(k, pi) - pi).max() < 1e-14
    assert abs(k.rates()["left"] - derive(spec, mode).gamma_left) < 1e-12


def test_first_order_completeness_is_second_order():
    space = fock.FockSpace(10)
    d1 = dyn.kraus_step(BASE, space, 0.01, normalization="first_order").completeness_defect()
    d2 = dyn.kraus_step(BASE, space, 0.005, normalization="first_order").completeness_defect()
    assert 3.5 < d1 / d2 < 4.5


def test_channel_converges_at_first_order():
    space = fock.FockSpace(10)
    rho0 = dyn.maximally_mixed(space, 4)
    tau = 0.4
    exact = dyn.unvec(expm(tau * dyn.liouvillian(SQZ, space, "squeezed")) @ dyn.vec(rho0), space.dim)
    errs = []
    for steps in (40, 80, 160):
        k = dyn.kraus_step(SQZ, space, tau / steps, "squeezed")
        errs.append(np.abs(dyn.apply_channel(k, rho0, steps) - exact).max())
    assert 1.8 < errs[0] / errs[1] < 2.2
    assert 1.8 < errs[1] / errs[2] < 2.2
    # Richardson extrapolation removes the leading term
    rich = 2 * dyn.apply_channel(dyn.kraus_step(SQZ, space, tau / 160, "squeezed"), rho0, 160) \
        - dyn.apply_channel(dyn.kraus_step(SQZ, space, tau / 80, "squeezed"), rho0, 80)
    assert np.abs(rich - exact).max() < 0.1 * errs[2]


def test_dt_too_large():
    with pytest.raises(ValueError):
        dyn.kraus_step(BASE, fock.FockSpace(30), 0.1)


@pytest.mark.parametrize("spec, mode", [(BASE, "thermal"), (SQZ, "squeezed")])
def test_backward_channel(spec, mode):
    space = fock.FockSpace(20)
    k = dyn.kraus_step(spec, space, 0.01, mode)
    kb = dyn.backward_kraus(k)
    assert kb.completeness_defect() < 1e-12
    pi_c = np.conj(dyn.steady_state(spec, space, mode).rho)
    assert np.abs(dyn.apply_channel(kb, pi_c) - pi_c).max() < 1e-14
    assert kb.sigma_table["left"] == -k.sigma_table["left"]


@pytest.mark.parametrize("spec, mode", [(BASE, "thermal"), (SQZ, "squeezed")])
def test_dual_equals_forward(spec, mode):
    k = dyn.kraus_step(spec, fock.FockSpace(10), 0.01, mode)
    d = dyn.dual_kraus(k, tol=1e-12)
    assert max(np.abs(d.ops[key] - k.ops[key]).max() for key in k.ops) < 1e-12
    bad = dict(k.sigma_table, left=0.5 * k.sigma_table["left"])
    with pytest.raises(ValueError):
        dyn.dual_kraus(k, bad)


def test_evolve_master_relaxes():
    space = fock.FockSpace(30)
    states = dyn.evolve_master(dyn.maximally_mixed(space, 8), [0.0, 1.0, 80.0], BASE)
    pi = dyn.steady_state(BASE, space).rho
    assert abs(np.trace(states[1]) - 1) < 1e-12
    assert dyn.trace_distance(states[-1], pi) < 1e-8


def test_evolve_master_warns_on_truncation():
    space = fock.FockSpace(6)
    with pytest.warns(TruncationWarning):
        dyn.evolve_master(dyn.maximally_mixed(space), [0.0, 0.1], BASE)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        dyn.evolve_master(dyn.vacuum(fock.FockSpace(30)), [0.0, 1.0], BASE)


def test_evolve_master_matches_dense_exponential():
    space = fock.FockSpace(12)
    rho0 = dyn.maximally_mixed(space, 5)
    exact = dyn.unvec(expm(0.7 * dyn.liouvillian(SQZ, space, "squeezed")) @ dyn.vec(rho0), space.dim)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        out = dyn.evolve_master(rho0, [0.7], SQZ, "squeezed")[0]
    assert np.abs(out - exact).max() < 1e-12
