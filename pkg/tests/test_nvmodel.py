import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvreadout import nvmodel as nv
from nvreadout.nvmodel import ModelParams, RateTable
from conftest import random_density


def test_index_layout():
    assert nv.DIM == 21
    assert nv.gs_index(+1, +1) == 0
    assert nv.gs_index(0, +1) == 3
    assert nv.es_index(-1, -1) == 17
    assert nv.singlet_index(-1) == 20
    assert len(nv.GS_BASIS) == 9


@pytest.mark.parametrize("B", [0.0, 300.0, 520.0])
def test_block_hamiltonian_hermitian(p, B):
    h = nv.block_hamiltonian(p, B)
    assert h.shape == (21, 21)
    assert np.allclose(h, h.conj().T)


def test_zero_field_ground_state_splitting(p):
    e = np.linalg.eigvalsh(nv.gs_hamiltonian(p.replace(C_par=0, C_perp=0, P_quad=0), 0.0))
    assert np.allclose(sorted(e), [0, 0, 0] + [p.D_gs] * 6, atol=1e-9)


def test_flipflop_conventions(p):
    i, j = nv.triplet_index(-1, +1), nv.triplet_index(0, 0)
    full = nv.es_hamiltonian(p, 500)
    reduced = nv.es_hamiltonian(p.replace(es_flipflop="reduced"), 500)
    assert np.isclose(full[i, j], p.A_perp)
    assert np.isclose(reduced[i, j], p.A_perp / 2)


def test_unknown_flipflop_convention_rejected():
    with pytest.raises(ValueError):
        ModelParams(es_flipflop="half")


def test_rate_validation():
    with pytest.raises(ValueError):
        RateTable(Gamma0=-1)
    with pytest.raises(ValueError):
        RateTable(T2_gs=0)


def test_coherent_only_has_no_dissipation(p):
    L = nv.build_liouvillian(p, RateTable().coherent_only(), 400.0)
    h = nv.hamiltonian_superop(nv.TWO_PI * nv.block_hamiltonian(p, 400.0))
    assert np.allclose(L.generator, h)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_superoperators_match_direct_action(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(5, rng)
    h = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    h = h + h.conj().T
    op = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    direct_h = -1j * (h @ rho - rho @ h)
    ll = op.conj().T @ op
    direct_d = op @ rho @ op.conj().T - 0.5 * (ll @ rho + rho @ ll)
    assert np.allclose(nv.unvec(nv.hamiltonian_superop(h) @ nv.vec(rho)), direct_h)
    assert np.allclose(nv.unvec(nv.dissipator_superop(op) @ nv.vec(rho)), direct_d)


def test_generator_preserves_trace(p, r):
    L = nv.build_liouvillian(p, r, 480.0, 1.0)
    trace_row = nv.vec(np.eye(21))
    assert np.max(np.abs(trace_row @ L.generator)) < 1e-10


def test_jumps_act_as_identity_on_nucleus(r):
    for jump in nv.jump_operators(r, 1.0):
        op = jump.op
        for mi_a in (+1, 0, -1):
            for mi_b in (+1, 0, -1):
                if mi_a == mi_b:
                    continue
                for ms in (+1, 0, -1):
                    for ms2 in (+1, 0, -1):
                        for blk_a, blk_b in [(nv.gs_index, nv.es_index), (nv.es_index, nv.gs_index),
                                             (nv.gs_index, nv.gs_index), (nv.es_index, nv.es_index)]:
                            assert op[blk_a(ms, mi_a), blk_b(ms2, mi_b)] == 0


def test_liouvillian_memoized_and_keyed(p, r):
    a = nv.build_liouvillian(p, r, 500.0, 1.0)
    b = nv.build_liouvillian(p, r, 500, 1)
    assert a is b and a == b and hash(a) == hash(b)
    assert nv.build_liouvillian(p, r, 500.0, 0.0) != a


def test_negative_inputs_rejected(p, r):
    with pytest.raises(ValueError):
        nv.build_liouvillian(p, r, -1.0)
    with pytest.raises(ValueError):
        nv.build_liouvillian(p, r, 100.0, -0.5)


def test_eslac_location(p):
    B = nv.find_eslac(p)
    assert 500 < B < 540
    # the gap at the anti-crossing equals twice the flip-flop element
    assert np.isclose(nv.eslac_pair_gap(p, B), 2 * abs(p.A_perp), rtol=1e-3)
    reduced = p.replace(es_flipflop="reduced")
    assert np.isclose(nv.eslac_pair_gap(reduced, nv.find_eslac(reduced)), abs(p.A_perp), rtol=1e-3)


def test_secular_energies_are_dressed_levels(p):
    e = nv.gs_secular_energies(p, 400.0)
    assert np.allclose(sorted(e), np.linalg.eigvalsh(nv.gs_hamiltonian(p, 400.0)))
    # |0,+1> and |0,0> differ by roughly the quadrupole plus Zeeman term
    diff = e[nv.triplet_index(0, +1)] - e[nv.triplet_index(0, 0)]
    assert abs(diff - (p.P_quad + p.gamma_n * 400)) < 0.01
