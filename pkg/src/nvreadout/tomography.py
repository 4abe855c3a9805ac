"""Qutrit state tomography of the electron and process tomography of the nuclear qubit.

The nuclear qubit lives in the ``{+1, 0}`` projections, with ``+1`` as the
first basis vector, so ``Z = |+1><+1| - |0><0|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import engine as en
from . import nvmodel as nv
from . import sequences as sq
from .nvmodel import ModelParams, RateTable, build_liouvillian
from .spinops import gellmann_basis, herm_eigh, herm_sqrt, partial_trace, rho_from_gellmann

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
PAULI_LABELS = ("I", "X", "Y", "Z")
NUCLEAR_QUBIT = (+1, 0)

# row-major vec of P_m rho P_n^dagger is (P_m kron conj(P_n)) vec(rho)
_BASIS_SUPEROPS = np.array([np.kron(pm, pn.conj()) for pm in PAULI for pn in PAULI])
_CHI_SOLVE = _BASIS_SUPEROPS.reshape(16, 16).T


@dataclass
class ProcessMatrix:
    chi: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.chi = np.asarray(self.chi, dtype=complex)
        if self.chi.shape != (4, 4):
            raise ValueError("process matrix must be 4x4")

    def is_hermitian(self, tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.chi - self.chi.conj().T)) <= tol)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.chi + self.chi.conj().T)).min())


def chi_ideal() -> ProcessMatrix:
    """Process of a measurement that keeps populations and removes coherence."""
    return ProcessMatrix(np.diag([0.5, 0, 0, 0.5]).astype(complex))


def measurement_dephasing(rho: np.ndarray) -> np.ndarray:
    z = PAULI[3]
    return 0.5 * rho + 0.5 * z @ rho @ z


def superop_from_channel(channel: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    cols = []
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            cols.append(np.asarray(channel(e), dtype=complex).reshape(4))
    return np.stack(cols, axis=1)


def chi_from_superop(S: np.ndarray) -> ProcessMatrix:
    coeffs = np.linalg.solve(_CHI_SOLVE, np.asarray(S, dtype=complex).reshape(16))
    return ProcessMatrix(coeffs.reshape(4, 4))


def superop_from_chi(chi: ProcessMatrix | np.ndarray) -> np.ndarray:
    c = chi.chi if isinstance(chi, ProcessMatrix) else np.asarray(chi)
    return np.tensordot(c.reshape(16), _BASIS_SUPEROPS, axes=1)


def qpt_chi(channel: Callable[[np.ndarray], np.ndarray], linearity_tol: float = 1e-8) -> ProcessMatrix:
    """Process matrix of a qubit map from its action on the four matrix units."""
    S = superop_from_channel(channel)
    probe = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    predicted = (S @ probe.reshape(4)).reshape(2, 2)
    if np.max(np.abs(np.asarray(channel(probe)) - predicted)) > linearity_tol:
        raise ValueError("channel is not linear within tolerance")
    return chi_from_superop(S)


def channel_from_chi(chi: ProcessMatrix | np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    c = chi.chi if isinstance(chi, ProcessMatrix) else np.asarray(chi)

    def channel(rho):
        out = np.zeros((2, 2), dtype=complex)
        for m in range(4):
            for n in range(4):
                if c[m, n] != 0:
                    out += c[m, n] * PAULI[m] @ rho @ PAULI[n].conj().T
        return out

    return channel


def _check_psd(chi: ProcessMatrix, tol: float, name: str):
    if not chi.is_hermitian(1e-8):
        raise ValueError(f"{name} is not Hermitian")
    if chi.min_eigenvalue() < -tol:
        raise ValueError(f"{name} is not positive semidefinite")


def process_fidelity(chi_exp: ProcessMatrix, chi_id: ProcessMatrix | None = None, tol: float = 1e-8) -> float:
    """``Tr sqrt(sqrt(chi_id) chi_exp sqrt(chi_id))``."""
    chi_id = chi_ideal() if chi_id is None else chi_id
    _check_psd(chi_exp, tol, "chi_exp")
    _check_psd(chi_id, tol, "chi_id")
    s = herm_sqrt(0.5 * (chi_id.chi + chi_id.chi.conj().T))
    inner = s @ chi_exp.chi @ s
    return float(np.real(np.trace(herm_sqrt(0.5 * (inner + inner.conj().T)))))


def process_fidelity_linear(chi_exp: ProcessMatrix, chi_id: ProcessMatrix | None = None) -> float:
    """``Tr(chi_id chi_exp)``; equals 1/2 for a perfect match to the measurement process."""
    chi_id = chi_ideal() if chi_id is None else chi_id
    return float(np.real(np.trace(chi_id.chi @ chi_exp.chi)))


# ---------------------------------------------------------------------------
# nuclear process under optical pumping


def _embed_nuclear_inputs() -> np.ndarray:
    """Vectorized 21-level states: thermal ground-state electron times each matrix unit."""
    cols = []
    for a in NUCLEAR_QUBIT:
        for b in NUCLEAR_QUBIT:
            rho = np.zeros((nv.DIM, nv.DIM), dtype=complex)
            for ms in nv.SPIN_PROJECTIONS:
                rho[nv.gs_index(ms, a), nv.gs_index(ms, b)] = 1.0 / 3.0
            cols.append(nv.vec(rho))
    return np.stack(cols, axis=1)


def reduced_nuclear(rho: np.ndarray) -> np.ndarray:
    """Nuclear 3x3 state with the electron and orbital degrees traced out."""
    gs = rho[nv.GS_OFFSET:nv.ES_OFFSET, nv.GS_OFFSET:nv.ES_OFFSET]
    es = rho[nv.ES_OFFSET:nv.SINGLET_OFFSET, nv.ES_OFFSET:nv.SINGLET_OFFSET]
    sg = rho[nv.SINGLET_OFFSET:, nv.SINGLET_OFFSET:]
    return partial_trace(gs, 1, (3, 3)) + partial_trace(es, 1, (3, 3)) + sg


def _qubit_block(rho_n: np.ndarray) -> np.ndarray:
    idx = [nv.spin_index(m) for m in NUCLEAR_QUBIT]
    return rho_n[np.ix_(idx, idx)]


def pumping_superop(outputs: np.ndarray) -> tuple[np.ndarray, dict]:
    """Qubit superoperator from the four evolved 21-level inputs, renormalized to the qubit.

    The output for input ``|a><b|`` is scaled by ``1/sqrt(r_a r_b)`` where
    ``r_a`` is the retained qubit trace for ``|a><a|``; this keeps the map
    completely positive and trace preserving on populations.
    """
    blocks = [_qubit_block(reduced_nuclear(nv.unvec(outputs[:, k]))) for k in range(4)]
    retained = np.array([np.real(np.trace(blocks[0])), np.real(np.trace(blocks[3]))])
    if np.any(retained <= 0):
        raise FloatingPointError("nuclear qubit fully depleted")
    scale = np.array([[retained[0], np.sqrt(retained[0] * retained[1])],
                      [np.sqrt(retained[0] * retained[1]), retained[1]]])
    S = np.stack([blocks[k].reshape(4) / scale.reshape(4)[k] for k in range(4)], axis=1)
    return S, {"retained_plus": float(retained[0]), "retained_zero": float(retained[1])}


def pumping_process(S: np.ndarray, dephase: bool = True) -> ProcessMatrix:
    if dephase:
        S = superop_from_channel(measurement_dephasing) @ S
    return chi_from_superop(S)


@dataclass
class FidelityMap:
    fields: np.ndarray
    pump_times: np.ndarray
    fidelity: np.ndarray
    fidelity_linear: np.ndarray
    min_retained: np.ndarray


def nuclear_fidelity_point_series(B: float, pump_times: Iterable[float], p: ModelParams, r: RateTable,
                                  relax: float = en.RELAX_US, laser_scale: float = 1.0):
    """Process fidelity versus pump time at one field (times in any order)."""
    times = np.asarray(list(pump_times), dtype=float)
    if np.any(times < 0):
        raise ValueError("pump times must be non-negative")
    L_on = build_liouvillian(p, r, B, laser_scale)
    dark = en.propagator(build_liouvillian(p, r, B, 0.0), relax)
    v = _embed_nuclear_inputs()
    F = np.empty(times.size)
    F_lin = np.empty(times.size)
    kept = np.empty(times.size)
    t_prev = 0.0
    chi_id = chi_ideal()
    for idx in np.argsort(times, kind="stable"):
        t = float(times[idx])
        if t > t_prev:
            v = en.propagator(L_on, t - t_prev) @ v
            t_prev = t
        # the relaxation wait belongs to a laser pulse; with no pulse there is nothing to relax
        S, diag = pumping_superop(dark @ v if t > 0 else v)
        chi = pumping_process(S)
        F[idx] = process_fidelity(chi, chi_id)
        F_lin[idx] = process_fidelity_linear(chi, chi_id)
        kept[idx] = min(diag.values())
    return F, F_lin, kept


def nuclear_fidelity_map(fields: Iterable[float], pump_times: Iterable[float], p: ModelParams,
                         r: RateTable, relax: float = en.RELAX_US, laser_scale: float = 1.0) -> FidelityMap:
    fields = np.asarray(list(fields), dtype=float)
    times = np.asarray(list(pump_times), dtype=float)
    if fields.size == 0 or times.size == 0:
        raise ValueError("fields and pump times must be non-empty")
    rows = [nuclear_fidelity_point_series(B, times, p, r, relax, laser_scale) for B in fields]
    return FidelityMap(fields, times, np.array([x[0] for x in rows]), np.array([x[1] for x in rows]),
                       np.array([x[2] for x in rows]))


# ---------------------------------------------------------------------------
# qutrit state tomography


def physicalize(rho_raw: np.ndarray) -> np.ndarray:
    """Closest unit-trace PSD matrix by eigenvalue clipping with uniform redistribution."""
    rho = 0.5 * (np.asarray(rho_raw, dtype=complex) + np.asarray(rho_raw, dtype=complex).conj().T)
    w, v = np.linalg.eigh(rho)
    d = w.size
    w = w + (1.0 - w.sum()) / d
    order = np.argsort(w)
    lam = w[order]
    acc = 0.0
    for i in range(d):
        remaining = d - i
        if lam[i] + acc / remaining < 0:
            acc += lam[i]
            lam[i] = 0.0
        else:
            lam[i:] += acc / remaining
            break
    out_w = np.empty(d)
    out_w[order] = lam
    out = (v * out_w) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def state_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise ValueError("dimension mismatch")
    s = herm_sqrt(0.5 * (rho + rho.conj().T))
    inner = s @ sigma @ s
    val = np.real(np.trace(herm_sqrt(0.5 * (inner + inner.conj().T)))) ** 2
    return float(min(max(val, 0.0), 1.0))


# measurement settings: (label, rotation or None, Gell-Mann indices recovered)
# A pi/2 rotation at phase -pi/2 maps X_ab onto P_a - P_b; at phase 0 it maps Y_ab.
_PAIRS = {1: (+1, 0), 2: (+1, 0), 4: (+1, -1), 5: (+1, -1), 6: (0, -1), 7: (0, -1)}
_SETTINGS = [("Z", None, (3, 8))] + [
    (f"lambda{k}", sq.ElectronRotation(_PAIRS[k], np.pi / 2, -np.pi / 2 if k in (1, 4, 6) else 0.0), (k,))
    for k in (1, 2, 4, 5, 6, 7)
]


@dataclass
class QSTResult:
    rho: np.ndarray
    rho_raw: np.ndarray
    lambdas: np.ndarray
    calibration: tuple[float, float]
    contrasts: dict


def calibration_matrix(c_plus: float, c_minus: float) -> np.ndarray:
    """Maps populations ``(P0, P-, P+)`` to readout contrasts without, with -1 and with +1 swaps."""
    C = np.array([[0.0, c_minus, c_plus], [c_minus, 0.0, c_plus], [c_plus, c_minus, 0.0]])
    if abs(np.linalg.det(C)) < 1e-10:
        raise np.linalg.LinAlgError("degenerate calibration contrasts")
    return C


def electron_state(rho21: np.ndarray) -> np.ndarray:
    """Ground-state electron 3x3 reduced state."""
    return partial_trace(rho21[:9, :9], 0, (3, 3))


def prepare_state(state_prep: sq.Sequence | None, p: ModelParams, r: RateTable, B: float,
                  rho0: np.ndarray | None = None) -> np.ndarray:
    rho = en.gs_basis_state(0, +1) if rho0 is None else rho0
    if state_prep is not None and state_prep.segments:
        rho, _ = sq.run_sequence(sq.Sequence(state_prep.label, state_prep.segments, B), rho, p, r)
    return rho


def qst_qutrit(B: float, state_prep: sq.Sequence | None, p: ModelParams, r: RateTable,
               rho0: np.ndarray | None = None, noise: float = 0.0,
               rng: np.random.Generator | None = None, calibration: tuple[float, float] | None = None,
               readout_window: float = en.READOUT_WINDOW_US) -> QSTResult:
    """Reconstruct the ground-state electron state prepared by ``state_prep``.

    Each setting rotates one Gell-Mann operator onto population differences;
    populations come from three optical readouts (no swap, swap with -1, swap
    with +1) inverted through the calibration matrix. ``noise`` adds Gaussian
    noise with that standard deviation, relative to the reference yield, to
    every readout.
    """
    if noise < 0:
        raise ValueError("noise must be non-negative")
    if noise > 0 and rng is None:
        raise ValueError("a random generator is required when noise > 0")
    c_plus, c_minus = calibration if calibration is not None else sq.qst_calibration(B, p, r)
    C_inv = np.linalg.inv(calibration_matrix(c_plus, c_minus))
    rho = prepare_state(state_prep, p, r, B, rho0)
    w = en.readout_functional(build_liouvillian(p, r, B, 1.0), readout_window)
    ref = en.functional_yield(w, en.gs_basis_state(0, +1))
    swaps = [np.eye(nv.DIM)] + [sq._swap_unitary(b) for b in (-1, +1)]
    lambdas = np.zeros(8)
    contrasts = {}
    for label, rot, targets in _SETTINGS:
        rho_s = rho if rot is None else sq._conj(sq._electron_unitary(rot.pair, rot.angle, rot.phase), rho)
        R = []
        for u in swaps:
            y = en.functional_yield(w, sq._conj(u, rho_s))
            if noise > 0:
                y += noise * ref * rng.standard_normal()
            R.append((ref - y) / ref)
        P0, Pm, Pp = C_inv @ np.array(R)
        contrasts[label] = R
        pops = {+1: Pp, 0: P0, -1: Pm}
        if rot is None:
            lambdas[2] = Pp - P0
            lambdas[7] = (Pp + P0 - 2 * Pm) / np.sqrt(3.0)
        else:
            a, b = rot.pair
            lambdas[targets[0] - 1] = pops[a] - pops[b]
    raw = rho_from_gellmann(lambdas)
    return QSTResult(physicalize(raw), raw, lambdas, (c_plus, c_minus), contrasts)


def qst_bootstrap(B: float, state_prep: sq.Sequence | None, p: ModelParams, r: RateTable,
                  noise: float, n_rep: int = 50, seed: int = 0, target: np.ndarray | None = None) -> dict:
    """Repeat noisy tomography with independent child seeds; report fidelity statistics."""
    cal = sq.qst_calibration(B, p, r)
    children = np.random.SeedSequence(seed).spawn(n_rep)
    target = np.eye(3) / 3 if target is None else target
    fids, rhos = [], []
    for child in children:
        res = qst_qutrit(B, state_prep, p, r, noise=noise, rng=np.random.default_rng(child), calibration=cal)
        rhos.append(res.rho)
        fids.append(state_fidelity(res.rho, target))
    fids = np.array(fids)
    return {"fidelities": fids, "mean": float(fids.mean()), "std": float(fids.std(ddof=1)) if n_rep > 1 else 0.0,
            "rho_mean": np.mean(rhos, axis=0), "seed": seed}
