"""Frequency-filtered photon correlations with weakly coupled two-level sensors.

Each filter is modelled as a two-level absorber tuned to the filter center, decaying
at the filter linewidth and coupled to the atomic dipole with a strength small enough
that it does not perturb the atom.  Correlations of the sensor populations, evaluated
with the quantum regression theorem, are the frequency-resolved photon correlations.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from . import _lindblad as lb
from .dynamics import AtomParams, generalized_rabi
from .errors import DegenerateFitError, UndefinedModelError
from .fitting import DataSeries, least_squares
from .instrument import SIDEBAND_FILTER_FWHM


@dataclass(frozen=True)
class SensorConfig:
    filter_centers: tuple
    filter_fwhm: float = SIDEBAND_FILTER_FWHM
    coupling_epsilon: float = None

    def __post_init__(self):
        if len(self.filter_centers) != 2:
            raise ValueError("need exactly two filter centers")
        if not self.filter_fwhm > 0:
            raise ValueError("filter_fwhm must be positive")
        if self.coupling_epsilon is None:
            object.__setattr__(self, "coupling_epsilon", 1e-3 * self.filter_fwhm)
        if not 0 < self.coupling_epsilon <= self.filter_fwhm / 100:
            raise ValueError("coupling_epsilon must lie in (0, filter_fwhm/100]")

    @classmethod
    def sidebands(cls, params, filter_fwhm=SIDEBAND_FILTER_FWHM, coupling_epsilon=None):
        """Filters on the lower (first) and upper (second) sideband at -/+ the generalized Rabi frequency."""
        w = generalized_rabi(params)
        return cls((-w, w), filter_fwhm, coupling_epsilon)


@dataclass(frozen=True)
class CrossCorrelation:
    """g(tau); tau > 0 means a second-filter photon detected after a first-filter photon."""

    tau: np.ndarray
    g: np.ndarray


@dataclass
class CompositeSystem:
    params: AtomParams
    config: SensorConfig
    liouvillian: np.ndarray
    sensor_lowering: tuple
    _rho_ss: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self):
        return self.sensor_lowering[0].shape[0]

    @property
    def steady_state(self):
        if self._rho_ss is None:
            self._rho_ss = lb.steady_state(self.liouvillian)
        return self._rho_ss

    def sensor_populations(self):
        rho = self.steady_state
        return tuple(float(np.real(np.trace(b.conj().T @ b @ rho))) for b in self.sensor_lowering)


def build_composite(params, cfg):
    """Lindblad generator for atom x sensor x sensor (Hilbert dimension 8)."""
    sm = lb.embed(lb.SIGMA_MINUS, 0, 3)
    sensors = (lb.embed(lb.SIGMA_MINUS, 1, 3), lb.embed(lb.SIGMA_MINUS, 2, 3))
    H = -params.delta * sm.conj().T @ sm + 0.5 * params.omega * (sm + sm.conj().T)
    eps = cfg.coupling_epsilon
    for b, center in zip(sensors, cfg.filter_centers):
        H = H + center * b.conj().T @ b + eps * (sm.conj().T @ b + b.conj().T @ sm)
    c_ops = [np.sqrt(params.gamma) * sm] + [np.sqrt(cfg.filter_fwhm) * b for b in sensors]
    return CompositeSystem(params, cfg, lb.liouvillian(H, c_ops), sensors)


def _conditional_population(system, first, second, taus):
    """<b1^+(0) b2^+(t) b2(t) b1(0)> for t >= 0, via regression from b1 rho b1^+."""
    rho = system.steady_state
    b1 = system.sensor_lowering[first]
    b2 = system.sensor_lowering[second]
    x0 = (b1 @ rho @ b1.conj().T).reshape(-1)
    states = lb.propagate(system.liouvillian, x0, taus)
    return np.real(lb.expectation(b2.conj().T @ b2, states))


def _signed_correlation(system, first, second, tau_grid):
    n = system.sensor_populations()
    if min(n[first], n[second]) <= 0:
        raise UndefinedModelError("a sensor has zero steady-state population")
    tau = np.asarray(tau_grid, dtype=float)
    g = np.empty_like(tau)
    for sel, a, b in ((tau >= 0, first, second), (tau < 0, second, first)):
        if not sel.any():
            continue
        at = np.abs(tau[sel])
        order = np.argsort(at)
        vals = np.empty_like(at)
        vals[order] = _conditional_population(system, a, b, at[order])
        g[sel] = vals / (n[first] * n[second])
    return CrossCorrelation(tau, g)


def filtered_cross_correlation(system, tau_grid):
    """Normalized cross-correlation between the two filters on a signed delay grid."""
    return _signed_correlation(system, 0, 1, tau_grid)


def filtered_auto_correlation(system, tau_grid, sensor=0):
    """Normalized intensity autocorrelation of the light behind one filter.

    A two-level sensor holds one excitation at most, so it cannot correlate with
    itself; two identical sensors on the same center are cross-correlated instead.
    """
    center = system.config.filter_centers[sensor]
    twin = replace(system.config, filter_centers=(center, center))
    return _signed_correlation(build_composite(system.params, twin), 0, 1, tau_grid)


# --- two-exponential fit -------------------------------------------------------

def two_exponential(tau, tau_rise, tau_fall, amplitude, baseline, tau_peak=0.0):
    """Cusp model: exponential rise up to tau_peak, exponential fall after it."""
    dt = np.asarray(tau, dtype=float) - tau_peak
    with np.errstate(over="ignore"):
        shape = np.where(dt < 0, np.exp(np.minimum(dt, 0) / tau_rise),
                         np.exp(-np.maximum(dt, 0) / tau_fall))
    return baseline + amplitude * shape


def _e_fold_guess(x, y, base, amp, default):
    below = np.flatnonzero(y - base < amp / np.e)
    return abs(x[below[0]]) if below.size else default


def fit_two_exponentials(corr, tau_peak=None):
    """Fit rise and fall time constants around the correlation peak.

    The peak position is the grid argmax unless given.  Returns a FitResult with
    names (tau_rise, tau_fall, amplitude, baseline); it unpacks in that order.
    """
    tau = np.asarray(corr.tau, dtype=float)
    g = np.asarray(corr.g, dtype=float)
    order = np.argsort(tau)
    tau, g = tau[order], g[order]
    i = int(np.argmax(g))
    edge = max(1, tau.size // 20)
    base0 = float(np.median(np.concatenate([g[:edge], g[-edge:]])))
    amp0 = float(g[i] - base0)
    if amp0 <= 0 or i in (0, tau.size - 1):
        raise DegenerateFitError("correlation has no interior bunching peak")
    t0 = tau[i] if tau_peak is None else float(tau_peak)
    span = tau[-1] - tau[0]
    rise0 = _e_fold_guess(tau[:i + 1][::-1] - t0, g[:i + 1][::-1], base0, amp0, span / 10)
    fall0 = _e_fold_guess(tau[i:] - t0, g[i:], base0, amp0, span / 10)
    step = np.min(np.diff(tau))
    p0 = [max(rise0, step), max(fall0, step), amp0, base0]

    def model(x, tr, tf, a, b):
        return two_exponential(x, tr, tf, a, b, t0)

    res = least_squares(model, DataSeries(tau, g), p0,
                        bounds=([step / 100, step / 100, 0, -np.inf], [np.inf] * 4),
                        names=("tau_rise", "tau_fall", "amplitude", "baseline"))
    res.info["tau_peak"] = t0
    return res
