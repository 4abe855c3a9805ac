import numpy as np
import pytest
from scipy import sparse
from scipy.integrate import solve_ivp

from nvreadout import engine as en
from nvreadout import nvmodel as nv
from nvreadout.spinops import is_density_matrix
from conftest import random_density


def choi_min_eig(S):
    n = nv.DIM
    choi = S.reshape(n, n, n, n).transpose(2, 0, 3, 1).reshape(n * n, n * n)
    choi = 0.5 * (choi + choi.conj().T)
    return float(np.linalg.eigvalsh(choi).min())


def test_expm_matches_ode_oracle(p, r):
    L = en.laser_liouvillian(p, r, 500.0)
    rho0 = random_density(21, np.random.default_rng(3))
    G = sparse.csr_matrix(L.generator)
    sol = solve_ivp(lambda t, y: G @ y, (0, 1.0), nv.vec(rho0), method="DOP853",
                    rtol=1e-10, atol=1e-12)
    assert sol.success
    ode = nv.unvec(sol.y[:, -1])
    assert np.max(np.abs(ode - en.propagate(L, rho0, 1.0, cache=None))) < 1e-7


def test_semigroup(p, r):
    L = en.laser_liouvillian(p, r, 350.0)
    lhs = en.propagator(L, 0.3) @ en.propagator(L, 0.7)
    assert np.max(np.abs(lhs - en.propagator(L, 1.0))) < 1e-9


def test_long_propagation_consistent_with_steps(p, r):
    L = en.laser_liouvillian(p, r, 500.0)
    rho = en.mixed_state()
    one = en.propagate(L, rho, 20.0)
    step = en.propagator(L, 1.0)
    v = nv.vec(rho)
    for _ in range(20):
        v = step @ v
    assert np.max(np.abs(nv.unvec(v) - one)) < 1e-9
    assert is_density_matrix(one, eig_tol=1e-9)


@pytest.mark.parametrize("B", [137.0, 512.5, 790.0])
def test_short_time_map_completely_positive(p, r, B):
    assert choi_min_eig(en.propagator(en.laser_liouvillian(p, r, B), 1e-3, cache=None)) > -1e-8


def test_negative_duration_rejected(p, r):
    with pytest.raises(ValueError):
        en.propagate(en.laser_liouvillian(p, r, 100.0), en.mixed_state(), -1.0)


def test_cache_reuses_propagators(p, r):
    cache = en.PropagatorCache(maxsize=2)
    L = en.laser_liouvillian(p, r, 222.0)
    a = cache.get(L, 0.1)
    b = cache.get(L, 0.1 + 1e-15)
    assert a is b and cache.hits == 1
    cache.get(L, 0.2)
    cache.get(L, 0.3)
    assert len(cache._store) == 2


def test_pl_trace_and_functional_agree(p, r):
    L = en.laser_liouvillian(p, r, 450.0)
    rho = random_density(21, np.random.default_rng(8))
    rec = en.pl_trace(L, rho)
    w = en.readout_functional(L)
    assert abs(en.functional_yield(w, rho) - rec.yield_) < 1e-12
    assert rec.times[0] == 0 and np.isclose(rec.times[-1], en.READOUT_WINDOW_US)
    assert len(rec.samples) == rec.times.size


def test_pl_trace_trapezoid_oracle(p, r):
    """Denser sampling converges to the same yield (trapezoid error is O(dt^2))."""
    L = en.laser_liouvillian(p, r, 300.0)
    rho = en.gs_basis_state(0, 0)
    coarse = en.pl_trace(L, rho, dt=0.005).yield_
    fine = en.pl_trace(L, rho, dt=0.001).yield_
    assert abs(coarse - fine) / fine < 1e-3


def test_pl_trace_rejects_bad_window(p, r):
    with pytest.raises(ValueError):
        en.pl_trace(en.laser_liouvillian(p, r, 300.0), en.mixed_state(), window=0)


def test_dark_state_has_no_emission(p, r):
    L_off = en.laser_liouvillian(p, r, 300.0, 0.0)
    assert en.pl_trace(L_off, en.gs_basis_state(0, 0)).yield_ == 0.0


def test_reference_contrast_zero_and_bright_dark_order(p, r):
    c = en.all_contrasts(p, r, 300.0)
    assert c[(0, +1)] == 0.0
    assert abs(c[(0, 0)]) < 0.05
    assert 0.3 < c[(+1, +1)] < 0.6 and 0.3 < c[(-1, -1)] < 0.6
    assert np.isclose(en.contrast((-1, 0), p, r, 300.0), c[(-1, 0)])


def test_laser_pumps_electron_into_zero(p, r):
    rho = en.propagate(en.laser_liouvillian(p, r, 200.0), en.mixed_state(), 5.0)
    rho = en.propagate(en.laser_liouvillian(p, r, 200.0, 0.0), rho, 1.0)
    pops = en.gs_populations(rho)
    ms0 = sum(pops[(0, mi)] for mi in (+1, 0, -1))
    assert ms0 > 0.75


def test_pump_polarization_low_and_high_field(p, r):
    assert abs(en.pump_polarization(p, r, 200.0) - 0.12) < 0.08
    assert abs(en.pump_polarization(p, r, 400.0) - 0.77) < 0.08


def test_pump_polarization_rejects_zero_pump(p, r):
    with pytest.raises(ValueError):
        en.pump_polarization(p, r, 200.0, pump=0)
