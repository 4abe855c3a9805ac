import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvreadout import engine as en
from nvreadout import nvmodel as nv
from nvreadout import sequences as sq
from nvreadout import tomography as tm
from conftest import random_density

I2 = np.eye(2)
X, Y, Z = tm.PAULI[1], tm.PAULI[2], tm.PAULI[3]


def full_polarization(rho):
    return np.array([[np.trace(rho), 0], [0, 0]], dtype=complex)


def random_channel(rng, n_kraus=3):
    g = rng.standard_normal((2 * n_kraus, 2)) + 1j * rng.standard_normal((2 * n_kraus, 2))
    q, _ = np.linalg.qr(g)
    kraus = [q[2 * k:2 * k + 2, :] for k in range(n_kraus)]
    return lambda rho: sum(k @ rho @ k.conj().T for k in kraus)


def test_chi_ideal():
    chi = tm.chi_ideal().chi
    assert chi[0, 0] == 0.5 and np.allclose(chi, np.diag([0.5, 0, 0, 0.5]))


def test_measurement_dephasing_action():
    assert np.allclose(tm.measurement_dephasing(X), 0)
    assert np.allclose(tm.measurement_dephasing(Z), Z)


def test_identity_and_dephasing_channels():
    assert np.allclose(tm.qpt_chi(lambda rho: rho).chi, np.diag([1, 0, 0, 0]), atol=1e-12)
    assert np.allclose(tm.qpt_chi(tm.measurement_dephasing).chi, tm.chi_ideal().chi, atol=1e-12)


def test_full_polarization_chi():
    chi = tm.qpt_chi(full_polarization).chi
    for a in (0, 3):
        for b in (0, 3):
            assert np.isclose(chi[a, b], 0.25)
    assert np.isclose(chi[1, 1], 0.25) and np.isclose(chi[2, 2], 0.25)
    # E(rho) = sum chi_mn P_m rho P_n^dagger puts -i/4 at (X, Y)
    assert np.isclose(chi[1, 2], -0.25j) and np.isclose(chi[2, 1], 0.25j)
    assert np.isclose(np.trace(chi), 1)


def test_nonlinear_channel_rejected():
    with pytest.raises(ValueError):
        tm.qpt_chi(lambda rho: rho @ rho)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_chi_channel_round_trip(seed):
    rng = np.random.default_rng(seed)
    chi = tm.qpt_chi(random_channel(rng))
    again = tm.qpt_chi(tm.channel_from_chi(chi))
    assert np.max(np.abs(again.chi - chi.chi)) < 1e-9
    assert chi.is_hermitian() and abs(np.trace(chi.chi) - 1) < 1e-9
    assert chi.min_eigenvalue() > -1e-8
    # matrix square roots of a rank-deficient chi carry ~sqrt(eps) error
    assert abs(tm.process_fidelity(chi, chi) - 1) < 1e-6
    assert np.allclose(tm.superop_from_chi(chi), tm.superop_from_channel(tm.channel_from_chi(chi)))


def test_process_fidelity_endpoints():
    assert np.isclose(tm.process_fidelity(tm.chi_ideal()), 1.0)
    assert np.isclose(tm.process_fidelity(tm.qpt_chi(full_polarization)), 0.5, atol=1e-12)
    assert np.isclose(tm.process_fidelity_linear(tm.chi_ideal()), 0.5)


def test_process_fidelity_symmetric_for_commuting():
    a = tm.ProcessMatrix(np.diag([0.6, 0.1, 0.1, 0.2]))
    b = tm.ProcessMatrix(np.diag([0.3, 0.3, 0.2, 0.2]))
    assert np.isclose(tm.process_fidelity(a, b), tm.process_fidelity(b, a))


def test_process_fidelity_rejects_non_psd():
    with pytest.raises(ValueError):
        tm.process_fidelity(tm.ProcessMatrix(np.diag([1.5, -0.5, 0, 0])))


def test_physicalize_examples():
    out = tm.physicalize(np.diag([1.1, 0.2, -0.3]))
    assert np.allclose(out, np.diag([0.95, 0.05, 0.0]), atol=1e-14)
    rho = random_density(3, np.random.default_rng(4))
    assert np.allclose(tm.physicalize(rho), rho, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_physicalize_trace_exact_and_idempotent(seed):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    out = tm.physicalize(h + h.conj().T)
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.linalg.eigvalsh(out).min() > -1e-12
    assert np.allclose(tm.physicalize(out), out, atol=1e-12)


def test_state_fidelity_examples():
    rho = random_density(3, np.random.default_rng(5))
    assert np.isclose(tm.state_fidelity(rho, rho), 1.0)
    assert tm.state_fidelity(np.diag([1.0, 0, 0]), np.diag([0, 1.0, 0])) == 0.0
    assert np.isclose(tm.state_fidelity(np.eye(3) / 3, np.diag([0.5, 0.5, 0])), 2 / 3)
    with pytest.raises(ValueError):
        tm.state_fidelity(np.eye(2) / 2, np.eye(3) / 3)


def test_calibration_matrix_degenerate():
    with pytest.raises(np.linalg.LinAlgError):
        tm.calibration_matrix(0.0, 0.0)


def test_qst_pure_zero_state(p, r):
    res = tm.qst_qutrit(500.0, None, p, r)
    assert np.allclose(res.rho, np.diag([0, 1, 0]), atol=1e-6)


def test_qst_calibration_consistency(p, r):
    cols = []
    for ms in (+1, 0, -1):
        res = tm.qst_qutrit(400.0, None, p, r, rho0=en.gs_basis_state(ms, +1))
        cols.append(np.real(np.diag(res.rho_raw)))
    assert np.allclose(np.array(cols).T, np.eye(3), atol=1e-3)


def test_qst_random_states(p, r):
    rng = np.random.default_rng(11)
    cal = sq.qst_calibration(450.0, p, r)
    for _ in range(5):
        segs = [sq.ElectronRotation((0, -1), rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi)),
                sq.ElectronRotation((+1, 0), rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi))]
        prep = sq.Sequence("rand", segs, 450.0)
        truth = tm.electron_state(tm.prepare_state(prep, p, r, 450.0))
        res = tm.qst_qutrit(450.0, prep, p, r, calibration=cal)
        assert tm.state_fidelity(res.rho, truth) > 0.999


def test_qst_thermal_state(p, r):
    prep = sq.Sequence("thermal", sq.thermal_prep_segments(), 500.0)
    res = tm.qst_qutrit(500.0, prep, p, r)
    assert tm.state_fidelity(res.rho, np.eye(3) / 3) >= 0.98
    off = res.rho - np.diag(np.diag(res.rho))
    assert np.max(np.abs(off)) < 1e-6


def test_qst_noise_requires_rng(p, r):
    with pytest.raises(ValueError):
        tm.qst_qutrit(500.0, None, p, r, noise=0.01)
    with pytest.raises(ValueError):
        tm.qst_qutrit(500.0, None, p, r, noise=-1)


def test_qst_bootstrap_reproducible(p, r):
    prep = sq.Sequence("thermal", sq.thermal_prep_segments(), 500.0)
    a = tm.qst_bootstrap(500.0, prep, p, r, 0.01, n_rep=5, seed=3)
    b = tm.qst_bootstrap(500.0, prep, p, r, 0.01, n_rep=5, seed=3)
    assert np.array_equal(a["fidelities"], b["fidelities"])
    assert a["std"] > 0


def test_reduced_nuclear_traces_all_blocks():
    rho = np.zeros((21, 21), dtype=complex)
    rho[nv.es_index(-1, 0), nv.es_index(-1, 0)] = 0.5
    rho[nv.singlet_index(+1), nv.singlet_index(+1)] = 0.5
    assert np.allclose(tm.reduced_nuclear(rho), np.diag([0.5, 0.5, 0]))


def test_fidelity_map_endpoints(p, r):
    fmap = tm.nuclear_fidelity_map([300.0, 500.0], [0.0, 0.4, 0.2], p, r)
    assert np.allclose(fmap.fidelity[:, 0], 1.0, atol=1e-6)
    assert fmap.fidelity[1, 1] >= 0.8
    assert fmap.fidelity[1, 1] <= fmap.fidelity[1, 2]
    assert np.all(fmap.min_retained > 0.9)
    with pytest.raises(ValueError):
        tm.nuclear_fidelity_map([], [0.1], p, r)


def test_fidelity_map_minimum_near_eslac_at_longest_pump(p, r):
    fields = np.arange(200.0, 800.0 + 1e-9, 25.0)
    times = np.round(np.arange(0.0, 1.95, 0.1), 10)
    F = tm.nuclear_fidelity_map(fields, times, p, r).fidelity
    i, j = np.unravel_index(np.argmin(F), F.shape)
    assert fields[i] == fields[np.argmin(np.abs(fields - nv.find_eslac(p)))]
    assert j == times.size - 1


@pytest.mark.xfail(strict=True, reason="simulated mean fidelity is 0.997; reference 0.98 +/- 0.01 (see decisions ledger)")
def test_noisy_thermal_tomography_matches_reference_level(p, r):
    prep = sq.Sequence("thermal", sq.thermal_prep_segments(), 500.0)
    stats = tm.qst_bootstrap(500.0, prep, p, r, noise=0.01, n_rep=50, seed=0)
    assert abs(stats["mean"] - 0.98) <= 0.01
