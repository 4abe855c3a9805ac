"""Closed-form models: excited-state phase pickup, sensitivity ratios, polarization and excitation rate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .nvmodel import TWO_PI, ModelParams

DEFAULT_T_ES = 0.01  # us


@dataclass(frozen=True)
class ESFourLevelModel:
    """Excited-state block {|0,+1>, |0,0>, |-1,+1>, |-1,0>} at one field.

    Frequencies are stored in MHz; the ``*_rad`` properties give rad/us.
    """

    omega0: float
    omega_e: float
    omega: float
    Omega: float
    A_par: float
    A_perp: float
    T_es: float = DEFAULT_T_ES

    @classmethod
    def from_params(cls, p: ModelParams, B: float, T_es: float = DEFAULT_T_ES) -> "ESFourLevelModel":
        if T_es <= 0:
            raise ValueError("T_es must be positive")
        omega0 = p.P_quad + p.gamma_n * B
        omega_e = p.D_es - p.gamma_e * B
        omega = omega0 + omega_e + p.A_par
        return cls(omega0, omega_e, omega, float(np.hypot(p.A_perp, omega)), p.A_par, p.A_perp, T_es)

    @property
    def omega_rad(self) -> float:
        return TWO_PI * self.omega

    @property
    def Omega_rad(self) -> float:
        return TWO_PI * self.Omega

    def hamiltonian(self) -> np.ndarray:
        """4x4 block in MHz, ordered |0,+1>, |0,0>, |-1,+1>, |-1,0>."""
        h = np.diag([self.omega0, 0.0, self.omega_e + self.omega0 + self.A_par, self.omega_e]).astype(complex)
        h[1, 2] = h[2, 1] = self.A_perp / 2
        return h

    def amplitudes(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Amplitudes alpha(t) on |0,0> and beta(t) on |-1,+1> starting from |0,0>.

        Written in the frame where the pair is centred, so only the detuning
        ``omega`` and the coupling enter.
        """
        t = np.asarray(t, dtype=float)
        W, w = self.Omega_rad, self.omega_rad
        if W == 0:
            return np.ones_like(t, dtype=complex), np.zeros_like(t, dtype=complex)
        alpha = np.cos(W * t / 2) + 1j * (w / W) * np.sin(W * t / 2)
        beta = -1j * (TWO_PI * self.A_perp / W) * np.sin(W * t / 2)
        return alpha, beta

    def accumulated_phase(self, t) -> np.ndarray:
        """Closed-form integral of :func:`phase_velocity` from 0 to ``t`` on the continuous branch."""
        t = np.asarray(t, dtype=float)
        W, w = self.Omega_rad, self.omega_rad
        drift = 0.5 * TWO_PI * (-self.omega_e - self.A_par) * t
        if W == 0:
            return drift
        x = W * t / 2
        k = np.floor(x / np.pi + 0.5)
        # atan((w/W) tan x) continued across the poles of tan
        phi_arc = np.arctan((w / W) * np.tan(x - k * np.pi)) + np.sign(w) * k * np.pi
        return phi_arc + drift


def phase_velocity(model: ESFourLevelModel, t) -> np.ndarray:
    """Rate of change of the |0,+1>/|0,0> relative phase in rad/us, as printed for the four-level block."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    W, w = model.Omega_rad, model.omega_rad
    c, s = np.cos(W * t / 2), np.sin(W * t / 2)
    den = W ** 2 * c ** 2 + w ** 2 * s ** 2
    if W == 0:
        lead = np.zeros_like(t)
    else:
        lead = W ** 2 * w / den
    return 0.5 * (lead - TWO_PI * (model.omega_e + model.A_par))


def mean_phase(model: ESFourLevelModel, upper: float = 20.0) -> float:
    """Phase picked up per excited-state visit, averaged over an exponential residence time.

    Uses ``int (1/T) e^{-t/T} phi(t) dt = int e^{-t/T} phi'(t) dt``, truncated at
    ``upper * T``.
    """
    T = model.T_es
    val, err = integrate.quad(lambda t: np.exp(-t / T) * float(phase_velocity(model, t)),
                              0.0, upper * T, epsabs=1e-12, epsrel=1e-11, limit=400)
    scale = max(abs(val), 1e-12)
    if not np.isfinite(val) or err > 1e-6 * scale + 1e-12:
        raise RuntimeError(f"quadrature did not converge (err={err:g})")
    return float(val)


def phase_susceptibility(p: ModelParams, B: float, T_es: float = DEFAULT_T_ES,
                         nuclear_frame: bool = False) -> float:
    """Mean excited-state phase per unit residence time, in rad/us.

    ``nuclear_frame=True`` removes the constant ``omega0/2`` drift of the bare
    formula, leaving only the part produced by the flip-flop.
    """
    model = ESFourLevelModel.from_params(p, B, T_es)
    chi = mean_phase(model) / T_es
    if nuclear_frame:
        chi -= 0.5 * TWO_PI * model.omega0
    return chi


def phase_susceptibility_per_pump(p: ModelParams, B: float, gamma0: float,
                                  T_es: float = DEFAULT_T_ES, nuclear_frame: bool = False) -> float:
    """Phase per microsecond of optical pumping: mean phase per visit times the excitation rate."""
    model = ESFourLevelModel.from_params(p, B, T_es)
    dphi = mean_phase(model)
    if nuclear_frame:
        dphi -= 0.5 * TWO_PI * model.omega0 * T_es
    return dphi * gamma0


def anticrossing_field(p: ModelParams, lo: float = 300.0, hi: float = 700.0) -> float:
    """Field where the four-level detuning ``omega`` vanishes."""
    f = lambda B: ESFourLevelModel.from_params(p, B).omega
    return float(optimize.brentq(f, lo, hi, xtol=1e-10))


def susceptibility_sweep(p: ModelParams, fields, T_es: float = DEFAULT_T_ES, nuclear_frame: bool = False):
    return np.array([phase_susceptibility(p, B, T_es, nuclear_frame) for B in fields])


@dataclass(frozen=True)
class SensitivityEstimate:
    visibility: float
    T2n: float
    N: float = 1.0

    def __post_init__(self):
        if self.T2n <= 0 or self.N <= 0:
            raise ValueError("T2n and N must be positive")

    @property
    def relative_eta(self) -> float:
        if self.visibility == 0:
            raise ZeroDivisionError("zero visibility")
        return 1.0 / (self.visibility * np.sqrt(self.N * self.T2n))


def sensitivity_ratio(a: SensitivityEstimate, b: SensitivityEstimate) -> float:
    return a.relative_eta / b.relative_eta


def polarization_metric(I0: float, Iminus: float, Iplus: float) -> float:
    """Nuclear polarization from the three line intensities; 1 means fully in m_I=+1."""
    vals = np.array([I0, Iminus, Iplus], dtype=float)
    if np.any(vals < 0):
        raise ValueError("intensities must be non-negative")
    total = vals.sum()
    if total == 0:
        raise ValueError("all intensities are zero")
    return float(1.0 - 1.5 * (I0 + Iminus) / total)


def excitation_rate_from_power(power_mW: float, psat_mW: float, gamma1: float) -> float:
    """Linear scaling of the emission rate by the power relative to saturation."""
    if psat_mW <= 0:
        raise ValueError("psat must be positive")
    if power_mW < 0:
        raise ValueError("power must be non-negative")
    return gamma1 * power_mW / psat_mW
