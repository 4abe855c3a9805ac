import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import least_squares

from nvreadout import analytics as an
from nvreadout import fitting as ft

THETAS = 2 * np.pi * np.arange(12) / 12
ODMR = ft.odmr_model(2.16)
ODMR_FREE = ft.odmr_model(2.16, shared_width=False)
T2S = ft.t2star_model(2.1)

MODEL_POINTS = [
    (ft.RAMSEY, THETAS, [0.05, 0.3, 1.0]),
    (ft.SATURATION, np.linspace(0, 60, 20), [5.0, 18.0, 0.3]),
    (ft.SATURATION_LITERAL, np.linspace(0, 60, 20), [5.0, 18.0, 0.3]),
    (ODMR, np.linspace(2860, 2880, 200), [2870.0, 0.5, -0.85, -0.1, -0.05, 1.0]),
    (ODMR_FREE, np.linspace(2860, 2880, 200), [2870.0, 0.4, 0.5, 0.6, -0.85, -0.1, -0.05, 1.0]),
    (T2S, np.linspace(0, 3, 200), [0.4, 0.3, 0.2, 2 * np.pi * 5, 0.2, -0.4, 0.5]),
]


def line_model():
    return ft.Model("line", ("a", "b"), lambda x, q: q[0] * x + q[1],
                    lambda x, q: np.column_stack([x, np.ones_like(x)]))


def test_line_fit_exact():
    x = np.linspace(-1, 3, 9)
    res = ft.nlls_fit(line_model(), [0.0, 0.0], x, 2 * x + 1)
    assert res.converged
    assert abs(res.params["a"] - 2) < 1e-10 and abs(res.params["b"] - 1) < 1e-10


def test_nlls_rejects_bad_input():
    with pytest.raises(ValueError):
        ft.nlls_fit(line_model(), [0, 0], [1.0], [1.0])
    with pytest.raises(ValueError):
        ft.nlls_fit(line_model(), [0, 0], [1.0, 2.0], [1.0])


def test_bounds_are_respected():
    x = np.linspace(0, 1, 10)
    res = ft.nlls_fit(line_model(), [0.0, 0.0], x, 2 * x + 1, bounds=([-np.inf, -np.inf], [1.5, np.inf]))
    assert res.params["a"] <= 1.5


@pytest.mark.parametrize("model,xs,params", MODEL_POINTS, ids=[m[0].name + str(i) for i, m in enumerate(MODEL_POINTS)])
def test_jacobian_matches_finite_differences(model, xs, params):
    rng = np.random.default_rng(0)
    for _ in range(5):
        q = np.asarray(params)
        q = q + 0.1 * np.minimum(np.abs(q), 1.0) * rng.standard_normal(q.size)
        ana = model.jac(xs, q)
        num = ft.finite_difference_jacobian(model, xs, q)
        scale = np.maximum(np.abs(num).max(axis=0), 1e-12)
        assert np.max(np.abs(ana - num) / scale) < 1e-5


def test_ramsey_examples():
    res = ft.fit_ramsey(THETAS, 0.025 * np.cos(THETAS) + 1)
    assert abs(res.params["V"] - 0.05) < 1e-9 and abs(res.params["phi"]) < 1e-9
    assert abs(res.params["B"] - 1) < 1e-9
    res = ft.fit_ramsey(THETAS, ft.RAMSEY(THETAS, [0.05, 3.5, 1.0]))
    assert abs(res.params["phi"] - (3.5 - 2 * np.pi)) < 1e-8


def test_ramsey_round_trip():
    res = ft.fit_ramsey(THETAS, ft.RAMSEY(THETAS, [0.05, 0.3, 1.0]))
    for key, val in zip("V phi B".split(), [0.05, 0.3, 1.0]):
        assert abs(res.params[key] - val) < 1e-8
    assert res.converged and res.residual_norm < 1e-10


def test_ramsey_negative_amplitude_canonicalized():
    res = ft.fit_ramsey(THETAS, ft.RAMSEY(THETAS, [-0.04, 0.5, 1.0]))
    assert res.params["V"] > 0
    assert abs(res.params["phi"] - ft.wrap_phase(0.5 + np.pi)) < 1e-8


def test_ramsey_degenerate_signal_flagged():
    res = ft.fit_ramsey(THETAS, np.ones(12))
    assert res.params["V"] < 1e-9 and not res.meta["phi_defined"]


def test_ramsey_preconditions():
    with pytest.raises(ValueError):
        ft.fit_ramsey(THETAS[:3], np.ones(3))
    with pytest.raises(ValueError):
        ft.fit_ramsey(np.linspace(0, 1, 6), np.ones(6))


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-np.pi, np.pi), st.floats(0.01, 0.3))
def test_ramsey_shift_equivariance(delta, phi, V):
    y = ft.RAMSEY(THETAS, [V, phi, 1.0])
    a = ft.fit_ramsey(THETAS, y).params["phi"]
    b = ft.fit_ramsey(THETAS + delta, y).params["phi"]
    assert abs(ft.wrap_phase(b - (a - delta))) < 1e-8


def test_wrap_phase_interval():
    assert ft.wrap_phase(np.pi) == np.pi
    assert ft.wrap_phase(-np.pi) == np.pi
    assert np.isclose(ft.wrap_phase(3 * np.pi / 2), -np.pi / 2)


def test_saturation_round_trip_and_origin():
    P = np.linspace(0, 60, 20)
    y = ft.SATURATION(P, [5.0, 18.0, 0.3])
    res = ft.fit_saturation(P, y)
    assert abs(res.params["Psat"] - 18) < 1e-6 and res.converged
    assert ft.SATURATION(np.array([0.0]), [5.0, 18.0, 0.3])[0] == 0.3
    lit = ft.fit_saturation(P, ft.SATURATION_LITERAL(P, [5.0, 18.0, 0.3]), literal=True)
    assert abs(lit.params["Psat"] - 18) < 1e-6
    both = ft.fit_saturation_both(P, y)
    assert set(both) == {"standard", "literal"}


def test_saturation_preconditions():
    with pytest.raises(ValueError):
        ft.fit_saturation([1, 2, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        ft.fit_saturation([-1, 2, 3, 4], [1, 2, 3, 4])


def test_saturation_noise_monte_carlo():
    rng = np.random.default_rng(2024)
    P = np.linspace(1, 60, 20)
    clean = ft.SATURATION(P, [5.0, 18.0, 0.3])
    est = [ft.fit_saturation(P, clean * (1 + 0.05 * rng.standard_normal(P.size))).params["Psat"]
           for _ in range(100)]
    assert abs(np.median(est) - 18) / 18 < 0.15


def test_odmr_intensity_recovery_and_polarization():
    f = np.linspace(2860, 2880, 400)
    width = 0.5
    amps = np.array([0.85, 0.10, 0.05]) / (np.pi * width)
    y = ODMR(f, [2870.0, width, -amps[0], -amps[1], -amps[2], 1.0])
    res = ft.fit_odmr_triplet(f, y)
    I = res.meta["intensities"]
    for got, want in zip((I["Iplus"], I["I0"], I["Iminus"]), (0.85, 0.10, 0.05)):
        assert abs(got - want) / want < 1e-3
    assert abs(an.polarization_metric(I["I0"], I["Iminus"], I["Iplus"]) - 0.775) < 1e-3


def test_odmr_equal_lines_unpolarized():
    f = np.linspace(2860, 2880, 400)
    y = ODMR(f, [2870.0, 0.5, -0.3, -0.3, -0.3, 1.0])
    I = ft.fit_odmr_triplet(f, y).meta["intensities"]
    assert abs(an.polarization_metric(I["I0"], I["Iminus"], I["Iplus"])) < 1e-6


def test_odmr_independent_widths():
    f = np.linspace(2860, 2880, 400)
    truth = [2870.0, 0.4, 0.5, 0.6, -0.8, -0.2, -0.1, 1.0]
    res = ft.fit_odmr_triplet(f, ODMR_FREE(f, truth), shared_width=False)
    assert np.allclose(list(res.params.values()), truth, rtol=1e-6)


def test_odmr_span_too_narrow():
    f = np.linspace(2869, 2871, 50)
    with pytest.raises(ValueError):
        ft.fit_odmr_triplet(f, ODMR(f, [2870.0, 0.5, -0.3, -0.3, -0.3, 1.0]))


def test_t2star_round_trip():
    t = np.linspace(0, 3, 200)
    truth = [0.4, 0.3, 0.2, 2 * np.pi * 5, 0.2, -0.4, 0.5]
    res = ft.fit_t2star(t, T2S(t, truth))
    assert abs(res.params["T2star"] - 0.4) / 0.4 < 1e-6
    assert res.meta["envelope"] == "exp(-t/T2star)"


def test_t2star_single_component():
    t = np.linspace(0, 3, 200)
    res = ft.fit_t2star(t, T2S(t, [0.6, 0.3, 0.0, 2 * np.pi * 4, 0.1, 0.0, 0.5]))
    assert res.converged and abs(res.params["A2"]) < 1e-6
    assert abs(res.params["T2star"] - 0.6) < 1e-6


def test_t2star_beat_period():
    t = np.linspace(0, 2, 400)
    res = ft.fit_t2star(t, T2S(t, [5.0, 0.5, 0.5, 2 * np.pi * 5, 0.0, 0.0, 0.0]))
    q = res.params
    # envelope of the reconstructed two-component signal, |A1 e^{i phi1} + A2 e^{i (2 pi C t + phi2)}|
    tt = np.linspace(0, 2, 20001)
    env = np.abs(q["A1"] * np.exp(1j * q["phi1"]) + q["A2"] * np.exp(1j * (2 * np.pi * 2.1 * tt + q["phi2"])))
    minima = [tt[i] for i in range(1, tt.size - 1) if env[i] < env[i - 1] and env[i] <= env[i + 1]]
    assert np.isclose(np.mean(np.diff(minima)), 1 / 2.1, rtol=1e-3)


def test_t2star_needs_points():
    with pytest.raises(ValueError):
        ft.fit_t2star(np.linspace(0, 1, 10), np.ones(10))


def test_agrees_with_scipy_least_squares():
    rng = np.random.default_rng(5)
    P = np.linspace(1, 60, 25)
    y = ft.SATURATION(P, [5.0, 18.0, 0.3]) + 0.02 * rng.standard_normal(P.size)
    ours = ft.fit_saturation(P, y)
    ref = least_squares(lambda q: ft.SATURATION(P, q) - y, [10.0, 10.0, 0.0], jac=lambda q: ft.SATURATION.jac(P, q))
    assert np.allclose(list(ours.params.values()), ref.x, rtol=1e-6)


def test_covariance_symmetric_psd():
    rng = np.random.default_rng(6)
    y = ft.RAMSEY(THETAS, [0.05, 0.3, 1.0]) + 1e-3 * rng.standard_normal(12)
    cov = ft.fit_ramsey(THETAS, y).covariance
    assert np.allclose(cov, cov.T) and np.linalg.eigvalsh(cov).min() >= -1e-15


def test_bootstrap_deterministic():
    rng = np.random.default_rng(7)
    y = ft.RAMSEY(THETAS, [0.05, 0.3, 1.0]) + 1e-3 * rng.standard_normal(12)
    a = ft.bootstrap(ft.fit_ramsey, THETAS, y, n_boot=30, seed=1)
    b = ft.bootstrap(ft.fit_ramsey, THETAS, y, n_boot=30, seed=1)
    assert a["std"] == b["std"] and a["std"]["V"] > 0


def test_fit_result_json():
    rec = ft.fit_ramsey(THETAS, ft.RAMSEY(THETAS, [0.05, 0.3, 1.0])).to_json()
    assert set(rec) >= {"params", "covariance", "residual_norm", "converged", "seed"}
