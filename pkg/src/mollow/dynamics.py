"""Driven two-level atom: optical Bloch equations, emission spectra, intensity correlations.

All frequencies are angular (rad/s) and all times in seconds.  The rotating frame is
that of the drive, with detuning ``delta = omega_laser - omega_atom`` (negative is red).
"""
from dataclasses import dataclass
import warnings

import numpy as np
import scipy.linalg as sla

from . import _lindblad as lb
from .errors import ResolutionWarning, UndefinedModelError, ValidityWarning

TWO_PI = 2.0 * np.pi
RB87_D2_GAMMA = TWO_PI * 6.07e6


def mhz(value):
    """Angular frequency from a value in MHz (ordinary frequency)."""
    return TWO_PI * 1e6 * value


def to_mhz(angular):
    return np.asarray(angular) / (TWO_PI * 1e6)


@dataclass(frozen=True)
class AtomParams:
    gamma: float = RB87_D2_GAMMA
    omega: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "omega", "delta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.omega < 0:
            raise ValueError("omega must be non-negative")

    @classmethod
    def from_mhz(cls, gamma=6.07, omega=0.0, delta=0.0):
        return cls(mhz(gamma), mhz(omega), mhz(delta))


@dataclass(frozen=True)
class BlochState:
    """Excited population and the ground-excited coherence rho_eg = coh_re + i coh_im."""

    p_ee: float
    coh_re: float = 0.0
    coh_im: float = 0.0

    @classmethod
    def ground(cls):
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def excited(cls):
        return cls(1.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, x):
        return cls(float(x[0]), float(x[1]), float(x[2]))

    def as_array(self):
        return np.array([self.p_ee, self.coh_re, self.coh_im])

    @property
    def coherence(self):
        return complex(self.coh_re, self.coh_im)

    def density_matrix(self):
        """2x2 density matrix in the (g, e) basis."""
        c = self.coherence
        return np.array([[1.0 - self.p_ee, np.conj(c)], [c, self.p_ee]], dtype=complex)

    def is_physical(self, tol=1e-6):
        return (-tol <= self.p_ee <= 1 + tol
                and self.coh_re ** 2 + self.coh_im ** 2 <= self.p_ee * (1 - self.p_ee) + tol)


@dataclass(frozen=True)
class Spectrum:
    """Emission spectrum on a grid of offsets from the drive.

    ``density`` is a power density per unit angular frequency; ``elastic_weight`` is the
    integrated power of the coherent delta component at zero offset.
    """

    freq: np.ndarray
    density: np.ndarray
    elastic_weight: float = 0.0

    def __post_init__(self):
        freq = np.asarray(self.freq, dtype=float)
        density = np.asarray(self.density, dtype=float)
        if freq.ndim != 1 or freq.shape != density.shape:
            raise ValueError("freq and density must be 1-D arrays of equal length")
        if freq.size > 1 and np.any(np.diff(freq) <= 0):
            raise ValueError("freq must be strictly increasing")
        if self.elastic_weight < 0:
            raise ValueError("elastic_weight must be non-negative")
        object.__setattr__(self, "freq", freq)
        object.__setattr__(self, "density", density)

    def inelastic_power(self):
        return float(np.trapezoid(self.density, self.freq))

    def total_power(self):
        return self.inelastic_power() + self.elastic_weight


@dataclass(frozen=True)
class SaturationModel:
    p_sat: float = 6.3e-12
    eta: float = 0.0179

    def __post_init__(self):
        if not self.p_sat > 0:
            raise ValueError("p_sat must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")


def lorentzian(freq, center=0.0, fwhm=1.0, area=1.0):
    """Lorentzian line of given integrated area."""
    hw = 0.5 * fwhm
    return area * (hw / np.pi) / ((np.asarray(freq) - center) ** 2 + hw ** 2)


# --- Bloch equations ---------------------------------------------------------

def bloch_matrix(params):
    """Affine generator: d/dt (p, u, v) = A @ (p, u, v) + b."""
    g, om, de = params.gamma, params.omega, params.delta
    A = np.array([
        [-g, 0.0, -om],
        [0.0, -g / 2, -de],
        [om, de, -g / 2],
    ])
    b = np.array([0.0, 0.0, -om / 2])
    return A, b


def steady_state(params):
    g, om, de = params.gamma, params.omega, params.delta
    denom = de ** 2 + g ** 2 / 4 + om ** 2 / 2
    p = (om ** 2 / 4) / denom
    coh = 0.5j * om * (1 - 2 * p) / (1j * de - g / 2)
    return BlochState(p, coh.real, coh.imag)


def _check_state(initial):
    x = initial.as_array() if isinstance(initial, BlochState) else np.asarray(initial, float)
    if not np.all(np.isfinite(x)):
        raise ValueError("initial state is not finite")
    return x


def evolve_grid(params, initial, times):
    """Bloch vectors at each time in `times`, shape (len(times), 3).

    The system is linear with constant coefficients, so propagation uses the exact
    exponential of the augmented 4x4 generator instead of a stepping integrator.
    """
    x0 = _check_state(initial)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if not np.all(np.isfinite(times)):
        raise ValueError("times must be finite")
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    A, b = bloch_matrix(params)
    G = np.zeros((4, 4))
    G[:3, :3] = A
    G[:3, 3] = b
    y0 = np.append(x0, 1.0)
    Us = sla.expm(G[None, :, :] * times[:, None, None])
    return (Us @ y0)[:, :3]


def evolve(params, initial, t):
    if t < 0:
        raise ValueError("t must be non-negative")
    return BlochState.from_array(evolve_grid(params, initial, [t])[0])


def excited_population(params, initial, times):
    return evolve_grid(params, initial, times)[:, 0]


# --- correlations ------------------------------------------------------------

def g2_analytic(params, tau):
    """Resonant strong-drive intensity correlation 1 - e^{-3G|t|/4}(cos Wt + 3G/(4W) sin W|t|)."""
    om = params.omega
    if om == 0:
        raise UndefinedModelError("g2 is undefined without drive (omega = 0)")
    if params.delta != 0:
        warnings.warn("analytic g2 assumes resonant drive; use g2_numeric", ValidityWarning,
                      stacklevel=2)
    if om < params.gamma / 4:
        warnings.warn("omega < gamma/4: analytic g2 outside its strong-drive regime",
                      ValidityWarning, stacklevel=2)
    at = np.abs(np.asarray(tau, dtype=float))
    k = 0.75 * params.gamma
    return 1.0 - np.exp(-k * at) * (np.cos(om * at) + k / om * np.sin(om * at))


def g2_numeric(params, tau_grid):
    """g2 from the excited population after a detection resets the atom to the ground state."""
    p_ss = steady_state(params).p_ee
    if p_ss == 0:
        raise UndefinedModelError("steady-state population is zero; g2 undefined")
    tau = np.asarray(tau_grid, dtype=float)
    at = np.abs(tau.ravel())
    order = np.argsort(at)
    out = np.empty_like(at)
    out[order] = excited_population(params, BlochState.ground(), at[order]) / p_ss
    return out.reshape(tau.shape)


def generalized_rabi(params):
    return float(np.hypot(params.omega, params.delta))


def saturation_rate(model, gamma, p_probe):
    p = np.asarray(p_probe, dtype=float)
    if np.any(p < 0):
        raise ValueError("probe power must be non-negative")
    return model.eta * gamma / 2 * p / (p + model.p_sat)


# --- spectra -----------------------------------------------------------------

def mollow_components(params, freq_grid):
    """The three Lorentzians of the strong-drive triplet: (center, lower sideband, upper sideband).

    Normalized so the complete triplet has unit area: 1/2, 1/4, 1/4.
    """
    g, om = params.gamma, params.omega
    w = np.asarray(freq_grid, dtype=float)
    center = lorentzian(w, 0.0, g, 0.5)
    lower = lorentzian(w, -om, 1.5 * g, 0.25)
    upper = lorentzian(w, om, 1.5 * g, 0.25)
    return center, lower, upper


def mollow_spectrum_analytic(params, freq_grid):
    if params.delta != 0:
        raise ValueError("analytic triplet requires resonant drive; use spectrum_numeric")
    if params.omega <= params.gamma / 4:
        warnings.warn("omega <= gamma/4: triplet formula outside its strong-drive regime",
                      ValidityWarning, stacklevel=2)
    center, lower, upper = mollow_components(params, freq_grid)
    return Spectrum(np.asarray(freq_grid, dtype=float), center + lower + upper, 0.0)


def atom_liouvillian(params):
    H = -params.delta * lb.PROJ_E + 0.5 * params.omega * (lb.SIGMA_PLUS + lb.SIGMA_MINUS)
    return lb.liouvillian(H, [np.sqrt(params.gamma) * lb.SIGMA_MINUS])


def spectrum_numeric(params, freq_grid):
    """Emission spectrum at any detuning from the regression theorem.

    The dipole correlation <s+(0) s-(t)> is split into its stationary part |<s->|^2
    (returned as ``elastic_weight``) and a decaying remainder whose one-sided Fourier
    transform is evaluated exactly through the resolvent of the Liouvillian.  Powers
    are photon emission rates: elastic + inelastic = gamma * p_ee(steady state).
    """
    w = np.asarray(freq_grid, dtype=float)
    if w.size > 1 and np.max(np.diff(w)) > params.gamma / 2:
        warnings.warn("frequency grid coarser than gamma/2 cannot resolve the central line",
                      ResolutionWarning, stacklevel=2)
    L = atom_liouvillian(params)
    rho = lb.steady_state(L)
    s_minus = np.trace(lb.SIGMA_MINUS @ rho)
    s_plus = np.conj(s_minus)
    Y = (rho @ lb.SIGMA_PLUS - s_plus * rho).reshape(-1)
    # adding |rho_ss><1| removes the zero eigenvalue without changing the action on
    # trace-free vectors, so the solve is regular even at w = 0
    M = L + np.outer(rho.reshape(-1), lb.trace_row(2))
    mats = M[None, :, :] + 1j * w[:, None, None] * np.eye(4)[None, :, :]
    Z = -np.linalg.solve(mats, np.broadcast_to(Y, (w.size, 4))[..., None])[..., 0]
    corr = lb.expectation(lb.SIGMA_MINUS, Z)
    density = params.gamma / np.pi * corr.real
    density = np.clip(density, 0.0, None)
    return Spectrum(w, density, float(params.gamma * abs(s_minus) ** 2))
