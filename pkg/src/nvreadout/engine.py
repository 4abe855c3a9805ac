"""Time evolution under piecewise-constant Lindblad generators and PL readout."""
from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import nvmodel as nv
from .nvmodel import Liouvillian, ModelParams, RateTable, build_liouvillian, unvec, vec

READOUT_WINDOW_US = 0.35
READOUT_DT_US = 0.005
RELAX_US = 1.0
INIT_PUMP_US = 20.0


class PropagatorCache:
    """Bounded LRU memo of ``exp(L t)`` keyed by generator identity and duration."""

    def __init__(self, maxsize: int = 64):
        self.maxsize = maxsize
        self._store: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, liou: Liouvillian, t: float) -> np.ndarray:
        key = (liou, round(float(t), 12))
        with self._lock:
            if key in self._store:
                self._store.move_to_end(key)
                self.hits += 1
                return self._store[key]
        prop = expm(liou.generator * float(t))
        if not np.all(np.isfinite(prop)):
            raise FloatingPointError(f"non-finite propagator for t={t} us")
        prop.setflags(write=False)
        with self._lock:
            self.misses += 1
            self._store[key] = prop
            self._store.move_to_end(key)
            while len(self._store) > self.maxsize:
                self._store.popitem(last=False)
        return prop

    def clear(self):
        with self._lock:
            self._store.clear()
            self.hits = self.misses = 0


CACHE = PropagatorCache()


def propagator(liou: Liouvillian, t: float, cache: PropagatorCache | None = CACHE) -> np.ndarray:
    if t < 0:
        raise ValueError(f"duration must be non-negative, got {t}")
    if cache is None:
        return expm(liou.generator * float(t))
    return cache.get(liou, t)


def propagate(liou: Liouvillian, rho: np.ndarray, t: float,
              cache: PropagatorCache | None = CACHE) -> np.ndarray:
    """Evolve ``rho`` for ``t`` microseconds under ``liou``."""
    rho = np.asarray(rho, dtype=complex)
    if t == 0:
        return rho.copy()
    out = unvec(propagator(liou, t, cache) @ vec(rho))
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite state after propagation")
    return out


@dataclass
class PLRecord:
    """Time-integrated radiative emission and the sampled instantaneous rate."""

    yield_: float
    times: np.ndarray = field(repr=False)
    rates: np.ndarray = field(repr=False)
    final_state: np.ndarray | None = field(default=None, repr=False)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.rates.tolist()))


def es_population(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho[nv.ES_OFFSET:nv.SINGLET_OFFSET, nv.ES_OFFSET:nv.SINGLET_OFFSET])))


def pl_trace(L_on: Liouvillian, rho0: np.ndarray, window: float = READOUT_WINDOW_US,
             dt: float = READOUT_DT_US, gamma1: float | None = None) -> PLRecord:
    """Integrate the radiative rate ``Gamma1 * P_ES(t)`` over a laser window.

    Sampling uses a single cached step propagator; a final partial step is
    added when ``window`` is not a multiple of ``dt``.
    """
    if window <= 0 or dt <= 0:
        raise ValueError("window and dt must be positive")
    g1 = RateTable().Gamma1 if gamma1 is None else gamma1
    if L_on.key and gamma1 is None:
        g1 = L_on.key[1].Gamma1
    n_full = int(np.floor(window / dt + 1e-9))
    step = propagator(L_on, dt)
    v = vec(np.asarray(rho0, dtype=complex))
    es_mask = np.zeros(nv.DIM * nv.DIM, dtype=bool)
    for i in range(nv.ES_OFFSET, nv.SINGLET_OFFSET):
        es_mask[i * nv.DIM + i] = True
    times = [0.0]
    rates = [g1 * float(np.real(v[es_mask].sum()))]
    for k in range(1, n_full + 1):
        v = step @ v
        times.append(k * dt)
        rates.append(g1 * float(np.real(v[es_mask].sum())))
    rest = window - n_full * dt
    if rest > 1e-12:
        v = propagator(L_on, rest) @ v
        times.append(window)
        rates.append(g1 * float(np.real(v[es_mask].sum())))
    times_arr, rates_arr = np.array(times), np.array(rates)
    total = float(np.trapezoid(rates_arr, times_arr))
    return PLRecord(max(total, 0.0), times_arr, rates_arr, unvec(v))


_FUNCTIONALS: OrderedDict = OrderedDict()
_FUNCTIONALS_MAX = 32
_FUNCTIONALS_LOCK = threading.Lock()


def readout_functional(L_on: Liouvillian, window: float = READOUT_WINDOW_US,
                       dt: float = READOUT_DT_US, gamma1: float | None = None) -> np.ndarray:
    """Row vector ``w`` with ``pl_trace(L_on, rho).yield_ == Re(w @ vec(rho))``.

    Uses the same sampling grid and trapezoid weights as :func:`pl_trace`.
    """
    g1 = gamma1 if gamma1 is not None else (L_on.key[1].Gamma1 if L_on.key else RateTable().Gamma1)
    key = (L_on, float(window), float(dt), float(g1))
    with _FUNCTIONALS_LOCK:
        if key in _FUNCTIONALS:
            _FUNCTIONALS.move_to_end(key)
            return _FUNCTIONALS[key]
    n_full = int(np.floor(window / dt + 1e-9))
    rest = window - n_full * dt
    weights = np.full(n_full + 1, dt)
    weights[0] = weights[-1] = dt / 2
    if n_full == 0:
        weights[0] = 0.0
    step = propagator(L_on, dt)
    row = np.zeros(nv.DIM * nv.DIM, dtype=complex)
    for i in range(nv.ES_OFFSET, nv.SINGLET_OFFSET):
        row[i * nv.DIM + i] = g1
    acc = weights[0] * row
    for k in range(1, n_full + 1):
        row = row @ step
        acc = acc + weights[k] * row
    if rest > 1e-12:
        acc = acc + 0.5 * rest * row
        acc = acc + 0.5 * rest * (row @ propagator(L_on, rest))
    acc.setflags(write=False)
    with _FUNCTIONALS_LOCK:
        _FUNCTIONALS[key] = acc
        while len(_FUNCTIONALS) > _FUNCTIONALS_MAX:
            _FUNCTIONALS.popitem(last=False)
    return acc


def functional_yield(w: np.ndarray, rho_or_vec: np.ndarray) -> float:
    v = rho_or_vec if rho_or_vec.ndim == 1 else vec(rho_or_vec)
    return float(np.real(w @ v))


def gs_basis_state(ms: int, mi: int) -> np.ndarray:
    rho = np.zeros((nv.DIM, nv.DIM), dtype=complex)
    i = nv.gs_index(ms, mi)
    rho[i, i] = 1.0
    return rho


def mixed_state() -> np.ndarray:
    return np.eye(nv.DIM, dtype=complex) / nv.DIM


def laser_liouvillian(p: ModelParams, r: RateTable, B: float, laser_scale: float = 1.0) -> Liouvillian:
    return build_liouvillian(p, r, B, laser_scale)


def reference_yield(p: ModelParams, r: RateTable, B: float, window: float = READOUT_WINDOW_US,
                    laser_scale: float = 1.0, dt: float = READOUT_DT_US) -> float:
    """PL yield of ``|0,+1>``, the normalization used for contrasts and fringe signals."""
    L_on = laser_liouvillian(p, r, B, laser_scale)
    return pl_trace(L_on, gs_basis_state(0, +1), window, dt).yield_


def contrast(state: tuple[int, int], p: ModelParams, r: RateTable, B: float,
             window: float = READOUT_WINDOW_US, laser_scale: float = 1.0,
             dt: float = READOUT_DT_US) -> float:
    """PL contrast of a ground-state basis state relative to ``|0,+1>``."""
    ms, mi = state
    L_on = laser_liouvillian(p, r, B, laser_scale)
    ref = pl_trace(L_on, gs_basis_state(0, +1), window, dt).yield_
    if (ms, mi) == (0, +1):
        return 0.0
    sig = pl_trace(L_on, gs_basis_state(ms, mi), window, dt).yield_
    return (ref - sig) / ref


def all_contrasts(p: ModelParams, r: RateTable, B: float, window: float = READOUT_WINDOW_US,
                  laser_scale: float = 1.0, dt: float = READOUT_DT_US) -> dict[tuple[int, int], float]:
    """Contrasts of all nine ground-state basis states at one field."""
    L_on = laser_liouvillian(p, r, B, laser_scale)
    ref = pl_trace(L_on, gs_basis_state(0, +1), window, dt).yield_
    out = {}
    for ms, mi in nv.GS_BASIS:
        if (ms, mi) == (0, +1):
            out[(ms, mi)] = 0.0
            continue
        sig = pl_trace(L_on, gs_basis_state(ms, mi), window, dt).yield_
        out[(ms, mi)] = (ref - sig) / ref
    return out


def gs_populations(rho: np.ndarray) -> dict[tuple[int, int], float]:
    return {(ms, mi): float(np.real(rho[nv.gs_index(ms, mi), nv.gs_index(ms, mi)]))
            for ms, mi in nv.GS_BASIS}


def nuclear_gs_populations(rho: np.ndarray) -> dict[int, float]:
    """Ground-state populations summed over the electron, per nuclear projection."""
    pops = gs_populations(rho)
    return {mi: sum(pops[(ms, mi)] for ms in nv.SPIN_PROJECTIONS) for mi in nv.SPIN_PROJECTIONS}


def pump_polarization(p: ModelParams, r: RateTable, B: float, pump: float = INIT_PUMP_US,
                      laser_scale: float = 1.0, relax: float = RELAX_US) -> float:
    """Nuclear polarization into ``m_I=+1`` after optical pumping from the fully mixed state."""
    from .analytics import polarization_metric

    if pump <= 0:
        raise ValueError("pump duration must be positive")
    rho = propagate(laser_liouvillian(p, r, B, laser_scale), mixed_state(), pump)
    rho = propagate(laser_liouvillian(p, r, B, 0.0), rho, relax)
    n = nuclear_gs_populations(rho)
    return polarization_metric(n[0], n[-1], n[+1])
