"""Physical model of the NV center: Hamiltonians, optical-cycle rates and the Lindblad generator.

The 21-dimensional state space is ordered as ground-state triplet (9 states),
excited-state triplet (9 states) and the metastable singlet (3 states, nuclear
spin only). Within each triplet the index is ``3 * e + n`` where ``e`` and
``n`` are the electron and nuclear positions in the ``(+1, 0, -1)`` ordering.

Hamiltonians are returned in MHz (cyclic frequency). The generator works in
rad/us with times in microseconds: Hamiltonian terms are multiplied by 2*pi,
while the tabulated transition rates are already in 1/us and enter as given.
"""
from __future__ import annotations

import dataclasses
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .spinops import kron, spin1_operators

TWO_PI = 2.0 * np.pi
SPIN_PROJECTIONS = (+1, 0, -1)
N_GS, N_ES, N_SINGLET = 9, 9, 3
DIM = N_GS + N_ES + N_SINGLET
GS_OFFSET, ES_OFFSET, SINGLET_OFFSET = 0, 9, 18


def spin_index(m: int) -> int:
    """Position of spin projection ``m`` in the ``(+1, 0, -1)`` ordering."""
    if m not in SPIN_PROJECTIONS:
        raise ValueError(f"spin projection must be one of {SPIN_PROJECTIONS}, got {m}")
    return 1 - m


def triplet_index(ms: int, mi: int) -> int:
    return 3 * spin_index(ms) + spin_index(mi)


def gs_index(ms: int, mi: int) -> int:
    return GS_OFFSET + triplet_index(ms, mi)


def es_index(ms: int, mi: int) -> int:
    return ES_OFFSET + triplet_index(ms, mi)


def singlet_index(mi: int) -> int:
    return SINGLET_OFFSET + spin_index(mi)


def basis_label(ms: int, mi: int) -> str:
    def fmt(m):
        return f"{m:+d}" if m else "0"
    return f"|{fmt(ms)},{fmt(mi)}>"


GS_BASIS = [(ms, mi) for ms in SPIN_PROJECTIONS for mi in SPIN_PROJECTIONS]


@dataclass(frozen=True)
class ModelParams:
    """Spin Hamiltonian constants (MHz, MHz/G).

    ``es_flipflop`` selects the excited-state transverse hyperfine matrix
    element: ``"spin1"`` uses the full spin-1 ladder algebra, so
    ``<-1,+1|H|0,0> = A_perp``; ``"reduced"`` halves the transverse term so the
    same element equals ``A_perp / 2``, as in the reduced four-level picture.
    """

    D_gs: float = 2870.0
    D_es: float = 1420.0
    gamma_e: float = 2.8
    gamma_n: float = 3.0e-4
    P_quad: float = -4.85
    A_par: float = -43.0
    A_perp: float = -23.0
    C_par: float = 2.1
    C_perp: float = 2.1
    es_flipflop: str = "spin1"

    def __post_init__(self):
        if self.es_flipflop not in ("spin1", "reduced"):
            raise ValueError(f"unknown es_flipflop convention {self.es_flipflop!r}")

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class RateTable:
    """Optical-cycle rates (1/us, numerically equal to MHz) and electron relaxation times (us)."""

    Gamma0: float = 6.74
    Gamma1: float = 67.4
    Gamma2: float = 91.6
    Gamma3: float = 91.6
    Gamma4: float = 9.9
    Gamma5: float = 1.06
    Gamma6: float = 1.06
    Gamma7: float = 4.83
    T1_gs: float = 10_000.0
    T2_gs: float = 100.0
    T1_es: float = 1_000.0
    T2_es: float = 0.01

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name.startswith("Gamma") and value < 0:
                raise ValueError(f"negative rate {f.name}={value}")
            if f.name.startswith("T") and value <= 0:
                raise ValueError(f"relaxation time {f.name} must be positive, got {value}")

    def replace(self, **changes) -> "RateTable":
        return dataclasses.replace(self, **changes)

    def coherent_only(self) -> "RateTable":
        """All transition rates zero and relaxation times effectively infinite."""
        huge = np.inf
        return RateTable(0, 0, 0, 0, 0, 0, 0, 0, huge, huge, huge, huge)


def _spin_terms():
    sx, sy, sz = spin1_operators()
    eye = np.eye(3, dtype=complex)
    return sx, sy, sz, eye


def _triplet_hamiltonian(D, A_par, A_perp, p: ModelParams, B: float) -> np.ndarray:
    if B < 0:
        raise ValueError(f"field must be non-negative, got {B}")
    sx, sy, sz, eye = _spin_terms()
    h = D * kron(sz @ sz, eye)
    h = h + p.gamma_e * B * kron(sz, eye)
    h = h + p.P_quad * kron(eye, sz @ sz)
    h = h + p.gamma_n * B * kron(eye, sz)
    h = h + A_par * kron(sz, sz)
    h = h + A_perp * (kron(sx, sx) + kron(sy, sy))
    return h


def gs_hamiltonian(p: ModelParams, B: float) -> np.ndarray:
    """Ground-state 9x9 Hamiltonian in MHz."""
    return _triplet_hamiltonian(p.D_gs, p.C_par, p.C_perp, p, B)


def es_hamiltonian(p: ModelParams, B: float) -> np.ndarray:
    """Excited-state 9x9 Hamiltonian in MHz."""
    a_perp = p.A_perp if p.es_flipflop == "spin1" else 0.5 * p.A_perp
    return _triplet_hamiltonian(p.D_es, p.A_par, a_perp, p, B)


def singlet_hamiltonian(p: ModelParams, B: float) -> np.ndarray:
    """Nuclear-only Hamiltonian of the metastable singlet level (3x3, MHz)."""
    _, _, sz, _ = _spin_terms()
    return p.P_quad * sz @ sz + p.gamma_n * B * sz


def block_hamiltonian(p: ModelParams, B: float) -> np.ndarray:
    """Block-diagonal 21x21 Hamiltonian ``diag(H_gs, H_es, H_singlet)`` in MHz."""
    h = np.zeros((DIM, DIM), dtype=complex)
    h[:9, :9] = gs_hamiltonian(p, B)
    h[9:18, 9:18] = es_hamiltonian(p, B)
    h[18:, 18:] = singlet_hamiltonian(p, B)
    return h


def gs_secular_energies(p: ModelParams, B: float) -> np.ndarray:
    """Dressed ground-state energies (MHz), labelled by the bare basis state they connect to.

    Entry ``triplet_index(ms, mi)`` is the eigenvalue whose eigenvector has
    the largest overlap with ``|ms, mi>``.
    """
    w, v = np.linalg.eigh(gs_hamiltonian(p, B))
    energies = np.empty(9)
    overlap = np.abs(v) ** 2
    for k in range(9):
        energies[int(np.argmax(overlap[:, k]))] = w[k]
    return energies


def _electron_nuclear_operator(to_block: int, to_ms: int | None, from_block: int,
                               from_ms: int | None) -> np.ndarray:
    """``|to, ms><from, ms'|`` tensored with the nuclear identity.

    ``to_ms`` / ``from_ms`` of ``None`` addresses the singlet level.
    """
    op = np.zeros((DIM, DIM), dtype=complex)
    for mi in SPIN_PROJECTIONS:
        row = singlet_index(mi) if to_ms is None else to_block + triplet_index(to_ms, mi)
        col = singlet_index(mi) if from_ms is None else from_block + triplet_index(from_ms, mi)
        op[row, col] = 1.0
    return op


@dataclass(frozen=True)
class JumpOperator:
    name: str
    rate: float
    op: np.ndarray = field(repr=False)


def jump_operators(r: RateTable, laser_scale: float) -> list[JumpOperator]:
    """All dissipative channels of the 21-level model with their rates (1/us).

    Every operator acts as the identity on the nuclear spin, so nuclear
    populations and coherences are carried through the optical cycle.
    """
    if laser_scale < 0:
        raise ValueError(f"laser_scale must be non-negative, got {laser_scale}")
    G, E = GS_OFFSET, ES_OFFSET
    jumps: list[JumpOperator] = []
    for ms in SPIN_PROJECTIONS:
        jumps.append(JumpOperator(f"excite{ms:+d}", laser_scale * r.Gamma0,
                                  _electron_nuclear_operator(E, ms, G, ms)))
        jumps.append(JumpOperator(f"emit{ms:+d}", r.Gamma1,
                                  _electron_nuclear_operator(G, ms, E, ms)))
    isc = {+1: r.Gamma2, -1: r.Gamma3, 0: r.Gamma4}
    relax = {+1: r.Gamma5, -1: r.Gamma6, 0: r.Gamma7}
    for ms in SPIN_PROJECTIONS:
        jumps.append(JumpOperator(f"isc{ms:+d}", isc[ms], _electron_nuclear_operator(0, None, E, ms)))
        jumps.append(JumpOperator(f"singlet_to_gs{ms:+d}", relax[ms],
                                  _electron_nuclear_operator(G, ms, 0, None)))
    for block, t1, t2, tag in ((G, r.T1_gs, r.T2_gs, "gs"), (E, r.T1_es, r.T2_es, "es")):
        for a in SPIN_PROJECTIONS:
            for b in SPIN_PROJECTIONS:
                if a != b:
                    jumps.append(JumpOperator(f"t1_{tag}{b:+d}->{a:+d}", 1.0 / (3.0 * t1),
                                              _electron_nuclear_operator(block, a, block, b)))
            jumps.append(JumpOperator(f"t2_{tag}{a:+d}", 1.0 / t2,
                                      _electron_nuclear_operator(block, a, block, a)))
    return jumps


def hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    """``-i[H, .]`` acting on row-major vectorized states, ``h`` in rad/us."""
    n = h.shape[0]
    eye = np.eye(n)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def dissipator_superop(op: np.ndarray) -> np.ndarray:
    """``D[L] rho = L rho L^+ - {L^+ L, rho}/2`` on row-major vectorized states."""
    n = op.shape[0]
    eye = np.eye(n)
    ldl = op.conj().T @ op
    return np.kron(op, op.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1)


def unvec(v: np.ndarray) -> np.ndarray:
    n = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape(n, n)


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Lindblad generator on row-major vectorized 21x21 states (units 1/us)."""

    generator: np.ndarray = field(repr=False)
    laser_scale: float
    field_G: float
    key: tuple = field(default=(), repr=False)

    def __post_init__(self):
        self.generator.setflags(write=False)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """``d rho / dt`` for a density matrix."""
        return unvec(self.generator @ vec(rho))

    def __hash__(self):
        return hash(self.key) if self.key else id(self)

    def __eq__(self, other):
        if not isinstance(other, Liouvillian):
            return NotImplemented
        if self.key and other.key:
            return self.key == other.key
        return self is other


@lru_cache(maxsize=32)
def dissipative_superop(r: RateTable, laser_scale: float) -> np.ndarray:
    """Sum of all dissipators; independent of field and Hamiltonian."""
    n = DIM
    eye = np.eye(n)
    total = np.zeros((n * n, n * n), dtype=complex)
    anti = np.zeros((n, n), dtype=complex)
    for jump in jump_operators(r, laser_scale):
        if jump.rate > 0:
            total += jump.rate * np.kron(jump.op, jump.op.conj())
            anti += jump.rate * (jump.op.conj().T @ jump.op)
    total -= 0.5 * (np.kron(anti, eye) + np.kron(eye, anti.T))
    total.setflags(write=False)
    return total


@lru_cache(maxsize=256)
def _cached_liouvillian(p: ModelParams, r: RateTable, B: float, laser_scale: float) -> "Liouvillian":
    gen = hamiltonian_superop(TWO_PI * block_hamiltonian(p, B)) + dissipative_superop(r, laser_scale)
    return Liouvillian(gen, laser_scale, B, (p, r, B, laser_scale, ()))


_TAGGED: "OrderedDict[tuple, Liouvillian]" = OrderedDict()
_TAGGED_MAX = 256
_TAGGED_LOCK = threading.Lock()


def build_liouvillian(p: ModelParams, r: RateTable, B: float, laser_scale: float = 1.0,
                      extra_hamiltonian: np.ndarray | None = None, tag: tuple = ()) -> Liouvillian:
    """Assemble ``-i[H, .] + sum_k Gamma_k D[L_k]`` for field ``B`` (G).

    ``laser_scale`` multiplies the tabulated excitation rate ``Gamma0``; zero
    switches the laser off. ``extra_hamiltonian`` (21x21, MHz) replaces the
    block Hamiltonian, e.g. for rotating-frame drives. A non-empty ``tag``
    must identify that Hamiltonian uniquely (given ``p`` and ``B``); it makes
    the result memoizable and cacheable by key.
    """
    if laser_scale < 0:
        raise ValueError(f"laser_scale must be non-negative, got {laser_scale}")
    B, laser_scale = float(B), float(laser_scale)
    if B < 0:
        raise ValueError(f"field must be non-negative, got {B}")
    if extra_hamiltonian is None:
        return _cached_liouvillian(p, r, B, laser_scale)
    key = (p, r, B, laser_scale, tag)
    if tag:
        with _TAGGED_LOCK:
            if key in _TAGGED:
                return _TAGGED[key]
    gen = hamiltonian_superop(TWO_PI * np.asarray(extra_hamiltonian)) + dissipative_superop(r, laser_scale)
    liou = Liouvillian(gen, laser_scale, B, key if tag else ())
    if tag:
        with _TAGGED_LOCK:
            _TAGGED[key] = liou
            while len(_TAGGED) > _TAGGED_MAX:
                _TAGGED.popitem(last=False)
    return liou


def eslac_pair_gap(p: ModelParams, B: float) -> float:
    """Gap (MHz) between the excited-state levels connected to ``|0,0>`` and ``|-1,+1>``.

    Both levels sit in the ``m_S + m_I = 0`` block together with ``|+1,-1>``,
    which stays far above them for fields below ~1 kG, so the pair is the two
    lowest eigenvalues of that block.
    """
    h = es_hamiltonian(p, B)
    idx = [triplet_index(+1, -1), triplet_index(0, 0), triplet_index(-1, +1)]
    w = np.linalg.eigvalsh(h[np.ix_(idx, idx)])
    return float(w[1] - w[0])


def find_eslac(p: ModelParams, lo: float = 400.0, hi: float = 620.0) -> float:
    """Field (G) of the excited-state anti-crossing, to better than 0.1 G."""
    res = minimize_scalar(lambda b: eslac_pair_gap(p, b), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-3})
    return float(res.x)
