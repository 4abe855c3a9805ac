"""Nonlinear least squares and the fit models used for fringes, saturation, ODMR and T2*."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

MAX_ITER = 200
STEP_TOL = 1e-10
REL_RESID_TOL = 1e-12


@dataclass
class Model:
    """A parameterized real function with an analytic Jacobian.

    ``func(x, params)`` returns model values; ``jac(x, params)`` returns an
    array of shape ``(len(x), len(params))``.
    """

    name: str
    param_names: tuple[str, ...]
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, x, params):
        return self.func(np.asarray(x, dtype=float), np.asarray(params, dtype=float))


@dataclass
class FitResult:
    params: dict[str, float]
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def errors(self) -> dict[str, float]:
        diag = np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        return dict(zip(self.params, diag.tolist()))

    def to_json(self) -> dict:
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "covariance": np.asarray(self.covariance, dtype=float).tolist(),
            "residual_norm": float(self.residual_norm),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "seed": self.seed,
            "meta": self.meta,
        }


def nlls_fit(model: Model, init: Sequence[float], xs, ys,
             bounds: tuple[Sequence[float], Sequence[float]] | None = None,
             max_iter: int = MAX_ITER) -> FitResult:
    """Levenberg-damped Gauss-Newton minimization of the squared residuals.

    Bounds are enforced by projecting each trial step back into the box.
    Non-convergence is reported through ``converged`` rather than raised.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    p = np.asarray(init, dtype=float).copy()
    n_par = p.size
    if xs.shape != ys.shape:
        raise ValueError("xs and ys differ in length")
    if xs.size < n_par:
        raise ValueError(f"need at least {n_par} points, got {xs.size}")
    lo = hi = None
    if bounds is not None:
        lo = np.asarray(bounds[0], dtype=float)
        hi = np.asarray(bounds[1], dtype=float)
        p = np.clip(p, lo, hi)

    def project(q):
        return q if lo is None else np.clip(q, lo, hi)

    resid = model.func(xs, p) - ys
    cost = float(resid @ resid)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = model.jac(xs, p)
        g = J.T @ resid
        A = J.T @ J
        diag = np.diag(A).copy()
        diag[diag <= 0] = 1.0
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = project(p + step)
            r_trial = model.func(xs, trial) - ys
            c_trial = float(r_trial @ r_trial)
            if np.isfinite(c_trial) and c_trial <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # damping exhausted: already at a (possibly degenerate) minimum
            converged = cost <= 1e-28 or bool(np.linalg.norm(g) < 1e-12)
            break
        actual_step = trial - p
        rel_change = (cost - c_trial) / max(cost, 1e-300)
        p, resid, cost = trial, r_trial, c_trial
        lam = max(lam / 10.0, 1e-12)
        if np.linalg.norm(actual_step) < STEP_TOL * (1.0 + np.linalg.norm(p)) or rel_change < REL_RESID_TOL:
            converged = True
            break
        if cost == 0.0:
            converged = True
            break
    J = model.jac(xs, p)
    dof = max(xs.size - n_par, 1)
    s2 = cost / dof
    try:
        cov = s2 * np.linalg.pinv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((n_par, n_par), np.nan)
    cov = 0.5 * (cov + cov.T)
    return FitResult(dict(zip(model.param_names, p.tolist())), cov, float(np.sqrt(cost)),
                     converged, it)


def finite_difference_jacobian(model: Model, xs, params, h: float = 1e-6) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    params = np.asarray(params, dtype=float)
    out = np.empty((xs.size, params.size))
    for k in range(params.size):
        step = h
        up, dn = params.copy(), params.copy()
        up[k] += step
        dn[k] -= step
        out[:, k] = (model.func(xs, up) - model.func(xs, dn)) / (2 * step)
    return out


def bootstrap(fit: Callable[[np.ndarray, np.ndarray], FitResult], xs, ys, n_boot: int = 200,
              seed: int = 0) -> dict:
    """Residual-resampling bootstrap around a fitting function.

    Returns the reference fit, per-parameter standard deviations over the
    replicates and the root seed. Each replicate draws from its own child
    generator, so results do not depend on evaluation order.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ref = fit(xs, ys)
    model_vals = ys - _residuals_from(ref, fit, xs, ys)
    resid = ys - model_vals
    children = np.random.SeedSequence(seed).spawn(n_boot)
    samples = []
    for child in children:
        rng = np.random.default_rng(child)
        y_star = model_vals + rng.choice(resid, size=resid.size, replace=True)
        samples.append(list(fit(xs, y_star).params.values()))
    samples = np.array(samples)
    return {"fit": ref, "std": dict(zip(ref.params, samples.std(axis=0, ddof=1).tolist())),
            "seed": seed, "n_boot": n_boot}


def _residuals_from(result: FitResult, fit, xs, ys):
    model = result.meta.get("_model")
    if model is None:
        raise ValueError("fit function must record its model in meta['_model']")
    values = model.func(xs, np.array(list(result.params.values())))
    return ys - values


# ---------------------------------------------------------------------------
# models


def _ramsey_f(th, p):
    V, phi, B = p
    return 0.5 * V * np.cos(th + phi) + B


def _ramsey_j(th, p):
    V, phi, _ = p
    return np.column_stack([0.5 * np.cos(th + phi), -0.5 * V * np.sin(th + phi), np.ones_like(th)])


RAMSEY = Model("ramsey", ("V", "phi", "B"), _ramsey_f, _ramsey_j)


def _sat_f(P, p):
    I0, Ps, B = p
    return I0 * P / (Ps + P) + B


def _sat_j(P, p):
    I0, Ps, _ = p
    return np.column_stack([P / (Ps + P), -I0 * P / (Ps + P) ** 2, np.ones_like(P)])


SATURATION = Model("saturation", ("I0", "Psat", "B"), _sat_f, _sat_j)


def _sat_lit_f(P, p):
    I0, Ps, B = p
    return I0 / (1.0 + P / Ps) + B


def _sat_lit_j(P, p):
    I0, Ps, _ = p
    d = 1.0 + P / Ps
    return np.column_stack([1.0 / d, I0 * P / (Ps ** 2 * d ** 2), np.ones_like(P)])


SATURATION_LITERAL = Model("saturation-literal", ("I0", "Psat", "B"), _sat_lit_f, _sat_lit_j)


def _lorentz(f, c, w):
    return w ** 2 / ((f - c) ** 2 + w ** 2)


def _lorentz_grads(f, c, w):
    den = (f - c) ** 2 + w ** 2
    d_c = 2 * w ** 2 * (f - c) / den ** 2
    d_w = 2 * w * (f - c) ** 2 / den ** 2
    return d_c, d_w


def odmr_model(splitting: float, shared_width: bool = True) -> Model:
    """Three Lorentzians at ``center - splitting``, ``center``, ``center + splitting``.

    Parameters: ``center``, width(s) (HWHM), amplitudes ``A_low``, ``A_mid``,
    ``A_high`` and offset ``B``.
    """
    offsets = np.array([-splitting, 0.0, splitting])
    if shared_width:
        names = ("center", "width", "A_low", "A_mid", "A_high", "B")
    else:
        names = ("center", "w_low", "w_mid", "w_high", "A_low", "A_mid", "A_high", "B")

    def unpack(p):
        if shared_width:
            c, w, a1, a2, a3, b = p
            return c, np.array([w, w, w]), np.array([a1, a2, a3]), b
        c, w1, w2, w3, a1, a2, a3, b = p
        return c, np.array([w1, w2, w3]), np.array([a1, a2, a3]), b

    def func(f, p):
        c, ws, amps, b = unpack(p)
        return b + sum(a * _lorentz(f, c + o, w) for a, o, w in zip(amps, offsets, ws))

    def jac(f, p):
        c, ws, amps, _ = unpack(p)
        d_center = np.zeros_like(f)
        d_w = []
        shapes = []
        for a, o, w in zip(amps, offsets, ws):
            dc, dw = _lorentz_grads(f, c + o, w)
            d_center += a * dc
            d_w.append(a * dw)
            shapes.append(_lorentz(f, c + o, w))
        cols = [d_center]
        cols += [sum(d_w)] if shared_width else d_w
        cols += shapes + [np.ones_like(f)]
        return np.column_stack(cols)

    return Model("odmr", names, func, jac)


def t2star_model(c_par_MHz: float = 2.1) -> Model:
    """Two decaying cosines split by the ground-state hyperfine constant (times in us)."""
    dw = 2 * np.pi * c_par_MHz

    def func(t, p):
        T2, A1, A2, w, p1, p2, B = p
        env = np.exp(-t / T2)
        return env * (A1 * np.cos(w * t + p1) + A2 * np.cos((w + dw) * t + p2)) + B

    def jac(t, p):
        T2, A1, A2, w, p1, p2, _ = p
        env = np.exp(-t / T2)
        c1, s1 = np.cos(w * t + p1), np.sin(w * t + p1)
        c2, s2 = np.cos((w + dw) * t + p2), np.sin((w + dw) * t + p2)
        osc = A1 * c1 + A2 * c2
        return np.column_stack([
            env * osc * t / T2 ** 2,
            env * c1,
            env * c2,
            -env * t * (A1 * s1 + A2 * s2),
            -env * A1 * s1,
            -env * A2 * s2,
            np.ones_like(t),
        ])

    return Model("t2star", ("T2star", "A1", "A2", "omega", "phi1", "phi2", "B"), func, jac)


def wrap_phase(phi: float) -> float:
    """Map an angle onto ``(-pi, pi]``."""
    out = float(np.mod(phi + np.pi, 2 * np.pi) - np.pi)
    return np.pi if out == -np.pi else out


# ---------------------------------------------------------------------------
# fit front-ends


def fit_ramsey(thetas, signal) -> FitResult:
    """Fit ``S = (V/2) cos(theta + phi) + B`` with ``V >= 0`` and ``phi`` in ``(-pi, pi]``."""
    th = np.asarray(thetas, dtype=float)
    y = np.asarray(signal, dtype=float)
    if th.size < 4:
        raise ValueError("need at least 4 fringe points")
    if np.ptp(th) < np.pi - 1e-12:
        raise ValueError("thetas must span at least pi")
    # deterministic seed: first Fourier component by linear least squares
    basis = np.column_stack([np.ones_like(th), np.cos(th), np.sin(th)])
    (b0, a, b), *_ = np.linalg.lstsq(basis, y, rcond=None)
    V0 = 2.0 * np.hypot(a, b)
    phi0 = float(np.arctan2(-b, a))
    res = nlls_fit(RAMSEY, [V0, phi0, b0], th, y)
    V, phi, B = res.params["V"], res.params["phi"], res.params["B"]
    if V < 0:
        V, phi = -V, phi + np.pi
        flip = np.diag([-1.0, 1.0, 1.0])
        res.covariance = flip @ res.covariance @ flip
    res.params = {"V": V, "phi": wrap_phase(phi), "B": B}
    scale = max(np.max(np.abs(y)), 1e-300)
    res.meta["phi_defined"] = bool(V > 1e-9 * scale)
    res.meta["_model"] = RAMSEY
    return res


def fit_saturation(powers_mW, intensities, literal: bool = False) -> FitResult:
    """Fit the PL saturation curve.

    The default is the rising form ``I0 * (P/Psat) / (1 + P/Psat) + B``;
    ``literal=True`` fits ``I0 / (1 + P/Psat) + B`` instead.
    """
    P = np.asarray(powers_mW, dtype=float)
    y = np.asarray(intensities, dtype=float)
    if P.size < 4:
        raise ValueError("need at least 4 points")
    if np.any(P < 0):
        raise ValueError("powers must be non-negative")
    model = SATURATION_LITERAL if literal else SATURATION
    order = np.argsort(P)
    B0 = float(y[order[0]]) if not literal else float(y[order[-1]])
    span = float(y[order[-1]] - y[order[0]])
    I0 = 2.0 * span if not literal else -2.0 * span
    Ps0 = float(np.median(P[P > 0])) if np.any(P > 0) else 1.0
    res = nlls_fit(model, [I0, Ps0, B0], P, y, bounds=([-np.inf, 1e-12, -np.inf], [np.inf, np.inf, np.inf]))
    res.meta.update(form="literal" if literal else "standard", _model=model,
                    psat_positive=bool(res.params["Psat"] > 1e-9))
    return res


def fit_saturation_both(powers_mW, intensities) -> dict[str, FitResult]:
    return {"standard": fit_saturation(powers_mW, intensities),
            "literal": fit_saturation(powers_mW, intensities, literal=True)}


def _local_extrema(y, count, sign):
    yy = sign * (y - np.median(y))
    idx = [i for i in range(1, len(y) - 1) if yy[i] >= yy[i - 1] and yy[i] >= yy[i + 1]]
    idx.sort(key=lambda i: -yy[i])
    return sorted(idx[:count])


def fit_odmr_triplet(freqs_MHz, signal, hyperfine_MHz: float = 2.16,
                     shared_width: bool = True) -> FitResult:
    """Fit three hyperfine-split Lorentzian lines with a fixed splitting.

    Returns amplitudes and integrated intensities ``|A| * pi * width`` as
    ``I_low``, ``I_mid`` and ``I_high``. For the ``0 -> -1`` transition with a
    positive ground-state hyperfine constant, low/mid/high frequencies carry
    nuclear projections ``+1``, ``0`` and ``-1``; those aliases are included.
    """
    f = np.asarray(freqs_MHz, dtype=float)
    y = np.asarray(signal, dtype=float)
    order = np.argsort(f)
    f, y = f[order], y[order]
    base = float(np.median(y))
    dips = np.sum(np.abs(np.minimum(y - base, 0))) > np.sum(np.abs(np.maximum(y - base, 0)))
    sign = -1.0 if dips else 1.0
    peaks = _local_extrema(y, 3, sign)
    if len(peaks) == 3:
        center0 = float(np.mean(f[peaks]))
    elif peaks:
        center0 = float(f[peaks[np.argmax([sign * (y[i] - base) for i in peaks])]])
    else:
        center0 = float(np.mean(f))
    if center0 - hyperfine_MHz < f[0] or center0 + hyperfine_MHz > f[-1]:
        raise ValueError("frequency span does not cover all three lines")
    model = odmr_model(hyperfine_MHz, shared_width)
    amp0 = []
    for o in (-hyperfine_MHz, 0.0, hyperfine_MHz):
        amp0.append(float(y[np.argmin(np.abs(f - (center0 + o)))] - base))
    w0 = hyperfine_MHz / 4
    widths = [w0] if shared_width else [w0, w0, w0]
    init = [center0] + widths + amp0 + [base]
    n_w = len(widths)
    lo = [-np.inf] + [1e-6] * n_w + [-np.inf] * 4
    hi = [np.inf] * (1 + n_w + 4)
    res = nlls_fit(model, init, f, y, bounds=(lo, hi))
    p = res.params
    ws = [p["width"]] * 3 if shared_width else [p["w_low"], p["w_mid"], p["w_high"]]
    amps = [p["A_low"], p["A_mid"], p["A_high"]]
    intens = [abs(a) * np.pi * w for a, w in zip(amps, ws)]
    res.meta.update(_model=model, hyperfine_MHz=hyperfine_MHz,
                    intensities={"I_low": intens[0], "I_mid": intens[1], "I_high": intens[2],
                                 "Iplus": intens[0], "I0": intens[1], "Iminus": intens[2]})
    return res


def fit_t2star(times_us, signal, C_par_MHz: float = 2.1, init: Sequence[float] | None = None) -> FitResult:
    """Fit a two-frequency decaying Ramsey signal; the envelope is ``exp(-t/T2*)``."""
    t = np.asarray(times_us, dtype=float)
    y = np.asarray(signal, dtype=float)
    if t.size < 20:
        raise ValueError("need at least 20 points")
    model = t2star_model(C_par_MHz)
    if init is None:
        init = _t2star_seed(t, y, C_par_MHz)
    res = nlls_fit(model, init, t, y, bounds=([1e-9] + [-np.inf] * 6, [np.inf] * 7))
    res.meta.update(_model=model, envelope="exp(-t/T2star)", C_par_MHz=C_par_MHz)
    return res


def _t2star_seed(t, y, c_par):
    """Seed from the dominant periodogram frequency and a linear solve for amplitudes."""
    B0 = float(np.mean(y[-max(3, t.size // 5):]))
    yc = y - B0
    span = t[-1] - t[0]
    freqs = np.linspace(0.5 / span, 0.5 * (t.size - 1) / span, 4000)
    dt = np.gradient(t)
    power = np.abs((yc * dt) @ np.exp(-2j * np.pi * np.outer(t, freqs))) ** 2
    best = None
    for f_guess in (freqs[np.argmax(power)], freqs[np.argmax(power)] - c_par):
        if f_guess <= 0:
            continue
        w = 2 * np.pi * f_guess
        for T2 in (span / 4, span / 2, span):
            env = np.exp(-t / T2)
            cols = np.column_stack([env * np.cos(w * t), -env * np.sin(w * t),
                                    env * np.cos((w + 2 * np.pi * c_par) * t),
                                    -env * np.sin((w + 2 * np.pi * c_par) * t), np.ones_like(t)])
            coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
            rss = float(np.sum((cols @ coef - y) ** 2))
            if best is None or rss < best[0]:
                A1, p1 = np.hypot(coef[0], coef[1]), np.arctan2(coef[1], coef[0])
                A2, p2 = np.hypot(coef[2], coef[3]), np.arctan2(coef[3], coef[2])
                best = (rss, [T2, A1, A2, w, p1, p2, coef[4]])
    return best[1]


MODELS = {
    "ramsey": fit_ramsey,
    "saturation": fit_saturation,
    "saturation-literal": lambda x, y: fit_saturation(x, y, literal=True),
    "odmr": fit_odmr_triplet,
    "t2star": fit_t2star,
}
