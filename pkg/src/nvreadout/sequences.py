"""Pulse sequences: segment types, the sequence runner and the named experiments.

States between segments are kept in the laboratory frame. Microwave segments
are solved in the frame rotating with their carrier on the addressed electron
branch and converted back at the end of the segment. Nuclear rotations are
exact operations whose azimuth is referenced to a frame rotating at the
``|0,+1> <-> |0,0>`` frequency, so fringe phases exclude the bare nuclear
Larmor precession.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from . import engine as en
from . import nvmodel as nv
from .nvmodel import ModelParams, RateTable, build_liouvillian

DEFAULT_THETAS = tuple(2 * np.pi * k / 12 for k in range(12))
HARD_RABI_MHZ = 12.0
CNOT_RABI_MHZ = 0.8
CNOT_DURATION_US = 0.625
THERMAL_ROTATION_RAD = 1.23
RAMSEY_KINDS = ("longitudinal", "transverse", "control")


@dataclass(frozen=True)
class Laser:
    dur: float
    scale: float = 1.0


@dataclass(frozen=True)
class Wait:
    dur: float


@dataclass(frozen=True)
class MW:
    """Electron microwave drive on the ``0 <-> branch`` transition.

    The carrier sits on the hyperfine line with nuclear projection ``line``
    plus ``detuning`` (MHz). ``t2star`` enables a Gaussian average over
    carrier detunings with ``sigma_omega = sqrt(2)/T2*``.
    """

    branch: int
    rabi: float
    dur: float
    phase: float = 0.0
    detuning: float = 0.0
    line: int = 0
    t2star: float | None = None


@dataclass(frozen=True)
class ElectronRotation:
    """Ideal rotation by ``angle`` about an equatorial axis at azimuth ``phase``.

    ``pair`` names the two electron projections spanned, e.g. ``(+1, 0)``.
    The rotation acts identically for every nuclear projection.
    """

    pair: tuple[int, int]
    angle: float
    phase: float = 0.0


@dataclass(frozen=True)
class NuclearRotation:
    """Ideal rotation in the nuclear ``{+1, 0}`` subspace of the ``m_S=0`` manifold."""

    angle: float
    phase: float = 0.0


@dataclass(frozen=True)
class DephaseElectron:
    pass


@dataclass(frozen=True)
class AdiabaticSwap:
    branch: int


@dataclass(frozen=True)
class Readout:
    window: float = en.READOUT_WINDOW_US
    dt: float = en.READOUT_DT_US
    scale: float = 1.0


Segment = Union[Laser, Wait, MW, ElectronRotation, NuclearRotation, DephaseElectron,
                AdiabaticSwap, Readout]
SEGMENT_TYPES = {cls.__name__: cls for cls in (Laser, Wait, MW, ElectronRotation, NuclearRotation,
                                               DephaseElectron, AdiabaticSwap, Readout)}


@dataclass
class Sequence:
    label: str
    segments: list = field(default_factory=list)
    field_G: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.field_G < 0:
            raise ValueError("field must be non-negative")
        for i, seg in enumerate(self.segments):
            if isinstance(seg, Readout) and i != len(self.segments) - 1:
                raise ValueError("Readout must be the final segment")
            dur = getattr(seg, "dur", 0.0)
            if dur < 0:
                raise ValueError(f"negative duration in {seg}")
            if isinstance(seg, MW):
                if seg.rabi < 0:
                    raise ValueError("rabi frequency must be non-negative")
                if seg.rabi == 0 and seg.dur > 0:
                    raise ValueError("degenerate MW pulse: zero Rabi frequency with non-zero duration")
                if seg.branch not in (-1, +1):
                    raise ValueError("MW branch must be -1 or +1")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "field_G": self.field_G,
            "segments": [{"type": type(s).__name__, **_plain(dataclasses.asdict(s))} for s in self.segments],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Sequence":
        segs = []
        for raw in data.get("segments", []):
            raw = dict(raw)
            kind = raw.pop("type")
            if kind not in SEGMENT_TYPES:
                raise ValueError(f"unknown segment type {kind!r}")
            if "pair" in raw:
                raw["pair"] = tuple(raw["pair"])
            segs.append(SEGMENT_TYPES[kind](**raw))
        return cls(data.get("label", ""), segs, float(data.get("field_G", 0.0)))


def _plain(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


@dataclass
class FringeData:
    thetas: np.ndarray
    signal: np.ndarray

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        self.signal = np.asarray(self.signal, dtype=float)
        if self.thetas.shape != self.signal.shape:
            raise ValueError("thetas and signal lengths differ")
        if np.any(np.diff(self.thetas) <= 0):
            raise ValueError("thetas must be strictly increasing")


# ---------------------------------------------------------------------------
# segment actions


def _electron_unitary(pair: tuple[int, int], angle: float, phase: float) -> np.ndarray:
    """21x21 unitary rotating electron projections ``pair`` in the ground state."""
    a, b = pair
    u = np.eye(nv.DIM, dtype=complex)
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    for mi in nv.SPIN_PROJECTIONS:
        i, j = nv.gs_index(a, mi), nv.gs_index(b, mi)
        u[i, i] = c
        u[j, j] = c
        u[i, j] = -1j * s * np.exp(-1j * phase)
        u[j, i] = -1j * s * np.exp(1j * phase)
    return u


def _nuclear_unitary(angle: float, phase: float) -> np.ndarray:
    u = np.eye(nv.DIM, dtype=complex)
    i, j = nv.gs_index(0, +1), nv.gs_index(0, 0)
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    u[i, i] = c
    u[j, j] = c
    u[i, j] = -1j * s * np.exp(-1j * phase)
    u[j, i] = -1j * s * np.exp(1j * phase)
    return u


def _swap_unitary(branch: int) -> np.ndarray:
    u = np.eye(nv.DIM, dtype=complex)
    for mi in nv.SPIN_PROJECTIONS:
        i, j = nv.gs_index(0, mi), nv.gs_index(branch, mi)
        u[i, i] = u[j, j] = 0.0
        u[i, j] = u[j, i] = 1.0
    return u


def dephase_electron(rho: np.ndarray) -> np.ndarray:
    """Zero all ground-state coherences between different electron projections."""
    out = np.array(rho, dtype=complex, copy=True)
    for ms_a in nv.SPIN_PROJECTIONS:
        for ms_b in nv.SPIN_PROJECTIONS:
            if ms_a == ms_b:
                continue
            for mi_a in nv.SPIN_PROJECTIONS:
                for mi_b in nv.SPIN_PROJECTIONS:
                    out[nv.gs_index(ms_a, mi_a), nv.gs_index(ms_b, mi_b)] = 0.0
    return out


def nuclear_reference_frequency(p: ModelParams, B: float) -> float:
    """``|0,+1> <-> |0,0>`` ground-state frequency (MHz) used as the nuclear frame."""
    e = nv.gs_secular_energies(p, B)
    return float(e[nv.triplet_index(0, +1)] - e[nv.triplet_index(0, 0)])


def mw_line_frequency(p: ModelParams, B: float, branch: int, line: int) -> float:
    """Transition frequency (MHz) of ``|0,line> -> |branch,line>``."""
    e = nv.gs_secular_energies(p, B)
    return float(e[nv.triplet_index(branch, line)] - e[nv.triplet_index(0, line)])


def mw_hamiltonian(p: ModelParams, B: float, seg: MW, extra_detuning: float = 0.0) -> np.ndarray:
    """21x21 Hamiltonian (MHz) in the frame rotating with the MW carrier.

    The ground-state block is secular: dressed energies on the diagonal, the
    addressed branch shifted down by the carrier, plus the drive
    ``(rabi/2)(|0><branch| e^{i phase} + h.c.)`` on every nuclear projection.
    """
    carrier = mw_line_frequency(p, B, seg.branch, seg.line) + seg.detuning + extra_detuning
    h = nv.block_hamiltonian(p, B)
    e = nv.gs_secular_energies(p, B)
    h[:9, :9] = np.diag(e).astype(complex)
    for mi in nv.SPIN_PROJECTIONS:
        k = nv.gs_index(seg.branch, mi)
        h[k, k] -= carrier
        i0 = nv.gs_index(0, mi)
        h[i0, k] += 0.5 * seg.rabi * np.exp(1j * seg.phase)
        h[k, i0] += 0.5 * seg.rabi * np.exp(-1j * seg.phase)
    return h, carrier


def _apply_mw(rho, seg: MW, p, r, B, extra_detuning=0.0):
    h, carrier = mw_hamiltonian(p, B, seg, extra_detuning)
    tag = ("mw", seg.branch, seg.rabi, seg.phase, seg.detuning + extra_detuning, seg.line)
    liou = build_liouvillian(p, r, B, 0.0, extra_hamiltonian=h, tag=tag)
    out = en.propagate(liou, rho, seg.dur)
    # back to the laboratory frame: the addressed level picked up exp(-i 2 pi f t)
    frame = np.ones(nv.DIM, dtype=complex)
    for mi in nv.SPIN_PROJECTIONS:
        frame[nv.gs_index(seg.branch, mi)] = np.exp(-1j * nv.TWO_PI * carrier * seg.dur)
    return frame[:, None] * out * frame.conj()[None, :]


GAUSS_HERMITE_NODES = 15


def apply_mw(rho, seg: MW, p, r, B):
    if seg.dur == 0:
        return np.array(rho, dtype=complex, copy=True)
    if seg.t2star is None:
        return _apply_mw(rho, seg, p, r, B)
    # detuning average over a Gaussian with sigma_omega = sqrt(2)/T2* (rad/us)
    sigma_f = math.sqrt(2.0) / seg.t2star / nv.TWO_PI
    x, w = np.polynomial.hermite_e.hermegauss(GAUSS_HERMITE_NODES)
    w = w / w.sum()
    out = np.zeros_like(rho, dtype=complex)
    for xi, wi in zip(x, w):
        out = out + wi * _apply_mw(rho, seg, p, r, B, sigma_f * xi)
    return out


def _conj(u, rho):
    return u @ rho @ u.conj().T


def run_sequence(seq: Sequence, rho0: np.ndarray, p: ModelParams, r: RateTable,
                 monitor: bool = False, clock0: float = 0.0):
    """Apply the segments of ``seq`` in order.

    Returns ``(final_state, PLRecord or None)``. With ``monitor=True`` every
    segment boundary is checked for trace, Hermiticity and positivity.
    ``clock0`` is the elapsed time before the first segment; it sets the
    azimuth reference of nuclear rotations.
    """
    seq.validate()
    B = seq.field_G
    rho = np.array(rho0, dtype=complex, copy=True)
    clock = float(clock0)
    f_ref = nuclear_reference_frequency(p, B)
    record = None
    for seg in seq.segments:
        if isinstance(seg, Laser):
            rho = en.propagate(build_liouvillian(p, r, B, seg.scale), rho, seg.dur)
            clock += seg.dur
        elif isinstance(seg, Wait):
            rho = en.propagate(build_liouvillian(p, r, B, 0.0), rho, seg.dur)
            clock += seg.dur
        elif isinstance(seg, MW):
            rho = apply_mw(rho, seg, p, r, B)
            clock += seg.dur
        elif isinstance(seg, ElectronRotation):
            rho = _conj(_electron_unitary(seg.pair, seg.angle, seg.phase), rho)
        elif isinstance(seg, NuclearRotation):
            azimuth = seg.phase + nv.TWO_PI * f_ref * clock
            rho = _conj(_nuclear_unitary(seg.angle, azimuth), rho)
        elif isinstance(seg, DephaseElectron):
            rho = dephase_electron(rho)
        elif isinstance(seg, AdiabaticSwap):
            rho = _conj(_swap_unitary(seg.branch), rho)
        elif isinstance(seg, Readout):
            record = en.pl_trace(build_liouvillian(p, r, B, seg.scale), rho, seg.window, seg.dt)
            rho = record.final_state
            clock += seg.window
        else:
            raise TypeError(f"unknown segment {seg!r}")
        if monitor:
            _check_state(rho, seg)
    return rho, record


def _check_state(rho, seg):
    if abs(np.trace(rho) - 1) > 1e-9:
        raise AssertionError(f"trace drift after {seg}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise AssertionError(f"Hermiticity lost after {seg}")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-8:
        raise AssertionError(f"positivity lost after {seg}")


# ---------------------------------------------------------------------------
# named building blocks


def hard_pulse(branch: int, angle: float, rabi: float = HARD_RABI_MHZ, phase: float = 0.0,
               line: int = 0) -> MW:
    """Resonant MW pulse rotating the ``0 <-> branch`` transition by ``angle``."""
    return MW(branch, rabi, angle / (nv.TWO_PI * rabi), phase=phase, line=line)


def cnot_pulse(t2star: float | None = None) -> MW:
    return MW(-1, CNOT_RABI_MHZ, CNOT_DURATION_US, line=0, t2star=t2star)


THERMAL_PREP_LINE = +1  # carrier on the m_I=+1 hyperfine line, where preparations start


def thermal_prep_segments() -> list:
    return [hard_pulse(-1, THERMAL_ROTATION_RAD, line=THERMAL_PREP_LINE),
            hard_pulse(+1, np.pi / 2, line=THERMAL_PREP_LINE), DephaseElectron()]


def prepare_thermal(rho: np.ndarray, p: ModelParams, r: RateTable, B: float) -> np.ndarray:
    """Equalize electron populations with two hard pulses, then remove electron coherences."""
    out, _ = run_sequence(Sequence("thermal-prep", thermal_prep_segments(), B), rho, p, r)
    return out


def ramsey_sequence(kind: str, B: float, repump: float, theta: float,
                    t2star: float | None = None, relax: float = en.RELAX_US) -> Sequence:
    """Segments of one fringe point; ``relax`` is the dark wait after each laser pulse.

    longitudinal: pulse, pulse(theta), thermal prep, repump
    transverse:   pulse, thermal prep, repump, pulse(theta)
    control:      pulse, pulse(theta)   (no thermal prep and no repump;
                  ``repump`` is ignored so the control bounds the other kinds)
    """
    if kind not in RAMSEY_KINDS:
        raise ValueError(f"unknown Ramsey kind {kind!r}; expected one of {RAMSEY_KINDS}")
    half = np.pi / 2
    repump_segs = [Laser(repump), Wait(relax)] if repump > 0 else []
    segs: list = [Laser(en.INIT_PUMP_US), Wait(relax), NuclearRotation(half, 0.0)]
    if kind == "transverse":
        segs += thermal_prep_segments() + repump_segs + [NuclearRotation(half, theta)]
    else:
        segs.append(NuclearRotation(half, theta))
        if kind == "longitudinal":
            segs += thermal_prep_segments() + repump_segs
    segs += [cnot_pulse(t2star), Readout()]
    return Sequence(f"{kind}-ramsey", segs, B)


def ramsey_experiment(kind: str, B: float, repump: float, thetas: Iterable[float],
                      p: ModelParams, r: RateTable, t2star: float | None = None) -> FringeData:
    """Normalized fringe signal ``S(theta)`` for one Ramsey variant and repump time."""
    thetas = np.asarray(list(thetas), dtype=float)
    if thetas.size == 0:
        raise ValueError("thetas must be non-empty")
    ref = en.reference_yield(p, r, B)
    signal = []
    for theta in thetas:
        _, rec = run_sequence(ramsey_sequence(kind, B, repump, theta, t2star), en.mixed_state(), p, r)
        signal.append(rec.yield_ / ref)
    return FringeData(thetas, np.array(signal))


# ---------------------------------------------------------------------------
# superoperator forms used by the scans


def unitary_superop(u: np.ndarray) -> np.ndarray:
    """Row-major superoperator of ``rho -> u rho u^dagger``."""
    return np.kron(u, u.conj())


def _mw_superop_single(seg: MW, p, r, B, extra_detuning=0.0) -> np.ndarray:
    h, carrier = mw_hamiltonian(p, B, seg, extra_detuning)
    tag = ("mw", seg.branch, seg.rabi, seg.phase, seg.detuning + extra_detuning, seg.line)
    liou = build_liouvillian(p, r, B, 0.0, extra_hamiltonian=h, tag=tag)
    frame = np.ones(nv.DIM, dtype=complex)
    for mi in nv.SPIN_PROJECTIONS:
        frame[nv.gs_index(seg.branch, mi)] = np.exp(-1j * nv.TWO_PI * carrier * seg.dur)
    return np.kron(frame, frame.conj())[:, None] * en.propagator(liou, seg.dur)


def mw_superop(seg: MW, p: ModelParams, r: RateTable, B: float) -> np.ndarray:
    """Superoperator of :func:`apply_mw`, including any T2* detuning average."""
    if seg.t2star is None:
        return _mw_superop_single(seg, p, r, B)
    sigma_f = math.sqrt(2.0) / seg.t2star / nv.TWO_PI
    x, w = np.polynomial.hermite_e.hermegauss(GAUSS_HERMITE_NODES)
    w = w / w.sum()
    return sum(wi * _mw_superop_single(seg, p, r, B, sigma_f * xi) for xi, wi in zip(x, w))


def nuclear_rotation_superop(angle: float, phase: float, clock: float, p: ModelParams, B: float) -> np.ndarray:
    azimuth = phase + nv.TWO_PI * nuclear_reference_frequency(p, B) * clock
    return unitary_superop(_nuclear_unitary(angle, azimuth))


def _sequence_duration(segs) -> float:
    total = 0.0
    for s in segs:
        if isinstance(s, (Laser, Wait, MW)):
            total += s.dur
        elif isinstance(s, Readout):
            total += s.window
    return total


# ---------------------------------------------------------------------------
# repump scans


@dataclass
class RepumpPoint:
    field_G: float
    repump_us: float
    visibility: float
    phase_rad: float
    fit_residual: float
    converged: bool
    signal: np.ndarray = field(repr=False, default=None)


def _prefix_states(kind, B, thetas, p, r, relax):
    """Vectorized states just before the repump, one column per theta, and the clock there."""
    init = [Laser(en.INIT_PUMP_US), Wait(relax), NuclearRotation(np.pi / 2, 0.0)]
    rho0, _ = run_sequence(Sequence("init", init, B), en.mixed_state(), p, r)
    clock = _sequence_duration(init)
    if kind == "transverse":
        prep = thermal_prep_segments()
        rho, _ = run_sequence(Sequence("prep", prep, B), rho0, p, r, clock0=clock)
        return nv.vec(rho)[:, None], clock + _sequence_duration(prep)
    cols = []
    after = thermal_prep_segments() if kind == "longitudinal" else []
    for theta in thetas:
        segs = [NuclearRotation(np.pi / 2, theta)] + after
        rho, _ = run_sequence(Sequence("prefix", segs, B), rho0, p, r, clock0=clock)
        cols.append(nv.vec(rho))
    return np.stack(cols, axis=1), clock + _sequence_duration(after)


def repump_scan(kind: str, B: float, repump_times: Iterable[float], p: ModelParams, r: RateTable,
                thetas: Iterable[float] = DEFAULT_THETAS, t2star: float | None = None,
                relax: float = en.RELAX_US) -> list[RepumpPoint]:
    """Fringe visibility and phase versus repump duration for one Ramsey kind.

    Equivalent to calling :func:`ramsey_experiment` per repump time, but the
    repump is propagated incrementally across the sorted time grid and the
    linear tail (relax, pulse, CNOT, readout) is folded into one functional.
    """
    from .fitting import fit_ramsey

    if kind not in RAMSEY_KINDS:
        raise ValueError(f"unknown Ramsey kind {kind!r}; expected one of {RAMSEY_KINDS}")
    thetas = np.asarray(list(thetas), dtype=float)
    times = np.asarray(list(repump_times), dtype=float)
    if times.size == 0 or np.any(times < 0):
        raise ValueError("repump times must be non-empty and non-negative")
    ref = en.reference_yield(p, r, B)
    w_ro = en.readout_functional(build_liouvillian(p, r, B, 1.0))
    tail = w_ro @ mw_superop(cnot_pulse(t2star), p, r, B)
    relax_prop = en.propagator(build_liouvillian(p, r, B, 0.0), relax)
    L_on = build_liouvillian(p, r, B, 1.0)
    states, clock = _prefix_states(kind, B, thetas, p, r, relax)

    def fringe(v_states, t):
        if kind == "control":
            return np.real(tail @ v_states) / ref
        if t > 0:
            v_states = relax_prop @ v_states
        if kind == "longitudinal":
            return np.real(tail @ v_states) / ref
        t_clock = clock + (t + relax if t > 0 else 0.0)
        v = v_states[:, 0]
        return np.array([np.real(tail @ (nuclear_rotation_superop(np.pi / 2, th, t_clock, p, B) @ v))
                         for th in thetas]) / ref

    order = np.argsort(times, kind="stable")
    results: dict[int, RepumpPoint] = {}
    current, t_prev = states, 0.0
    control_signal = fringe(states, 0.0) if kind == "control" else None
    for idx in order:
        t = float(times[idx])
        if kind == "control":
            signal = control_signal
        else:
            if t > t_prev:
                current = en.propagator(L_on, t - t_prev) @ current
                t_prev = t
            signal = fringe(current, t)
        fit = fit_ramsey(thetas, signal)
        results[idx] = RepumpPoint(B, t, fit.params["V"], fit.params["phi"], fit.residual_norm,
                                   fit.converged, np.asarray(signal))
    return [results[i] for i in range(times.size)]


# ---------------------------------------------------------------------------
# population tracks


def thermal_electron_state(mi: int) -> np.ndarray:
    """Ground-state electron mixture ``I/3`` times the nuclear projection ``mi``."""
    rho = np.zeros((nv.DIM, nv.DIM), dtype=complex)
    for ms in nv.SPIN_PROJECTIONS:
        k = nv.gs_index(ms, mi)
        rho[k, k] = 1.0 / 3.0
    return rho


def population_track(rho0: np.ndarray, p: ModelParams, r: RateTable, B: float, horizon: float,
                     n_points: int = 201, laser_scale: float = 1.0) -> tuple[np.ndarray, dict]:
    """Ground-state basis populations sampled uniformly over a laser-on interval."""
    if n_points < 2 or horizon <= 0:
        raise ValueError("need horizon > 0 and at least two samples")
    times = np.linspace(0.0, horizon, n_points)
    step = en.propagator(build_liouvillian(p, r, B, laser_scale), times[1] - times[0])
    v = nv.vec(np.asarray(rho0, dtype=complex))
    diag = [nv.gs_index(ms, mi) * nv.DIM + nv.gs_index(ms, mi) for ms, mi in nv.GS_BASIS]
    rows = [np.real(v[diag])]
    for _ in range(n_points - 1):
        v = step @ v
        rows.append(np.real(v[diag]))
    arr = np.array(rows)
    return times, {state: arr[:, k] for k, state in enumerate(nv.GS_BASIS)}


def peak_time(times: np.ndarray, values: np.ndarray) -> float | None:
    """Time of the largest interior local maximum, refined by a parabola; None if there is none."""
    v = np.asarray(values, dtype=float)
    idx = [i for i in range(1, v.size - 1) if v[i] > v[i - 1] and v[i] >= v[i + 1]]
    if not idx:
        return None
    i = max(idx, key=lambda k: v[k])
    y0, y1, y2 = v[i - 1], v[i], v[i + 1]
    den = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    return float(times[i] + shift * (times[i + 1] - times[i]))


def zero_zero_peak_time(p: ModelParams, r: RateTable, B: float, horizon: float = 3.0,
                        n_points: int = 301) -> float | None:
    """Laser-on time at which the ground-state ``|0,0>`` population peaks, starting from a
    thermal electron with the nucleus in ``m_I=0``."""
    times, pops = population_track(thermal_electron_state(0), p, r, B, horizon, n_points)
    return peak_time(times, pops[(0, 0)])


# ---------------------------------------------------------------------------
# tomography calibration


def laser_initialized_state(p: ModelParams, r: RateTable, B: float,
                            relax: float = en.RELAX_US) -> np.ndarray:
    segs = [Laser(en.INIT_PUMP_US), Wait(relax)]
    rho, _ = run_sequence(Sequence("init", segs, B), en.mixed_state(), p, r)
    return rho


def qst_calibration(B: float, p: ModelParams, r: RateTable, init: str = "ideal") -> tuple[float, float]:
    """Contrasts ``(C_plus, C_minus)`` of the swapped states relative to the unswapped one.

    ``init="ideal"`` starts from ``|0,+1>``; ``init="laser"`` uses the
    optically pumped state instead.
    """
    if init == "ideal":
        rho0 = en.gs_basis_state(0, +1)
    elif init == "laser":
        rho0 = laser_initialized_state(p, r, B)
    else:
        raise ValueError(f"unknown init {init!r}")
    w = en.readout_functional(build_liouvillian(p, r, B, 1.0))
    ref = en.functional_yield(w, rho0)
    out = []
    for branch in (+1, -1):
        rho = _conj(_swap_unitary(branch), rho0)
        out.append((ref - en.functional_yield(w, rho)) / ref)
    return out[0], out[1]
