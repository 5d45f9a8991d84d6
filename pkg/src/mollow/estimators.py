"""scikit-learn style curve fitters for spectra, g2 traces, saturation curves and cascades.

Every fitter takes a 1-D abscissa (or an (n, 1) column) in SI units: angular
frequency for spectra, seconds for delays, watts for powers.  Fixed physical
constants are constructor parameters, so ``get_params``/``set_params``/``clone`` work
as usual; fitted quantities end in an underscore and ``result_`` holds the full
FitResult.
"""
import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, column_or_1d

from .dynamics import RB87_D2_GAMMA, AtomParams, Spectrum, g2_analytic, lorentzian
from .errors import DegenerateFitError, PeakFindingError, ValidityWarning
from .filtered import CrossCorrelation, fit_two_exponentials, two_exponential
from .fitting import DataSeries, least_squares
from .instrument import (PULSE_LENGTH, REFLECTION_FRACTION, SPECTROSCOPY_CAVITY_FWHM,
                         find_peaks, triangle_window)

POOR_IDENTIFIABILITY = 0.1  # relative sigma above which a parameter is flagged


def _xy(X, y=None):
    x = column_or_1d(np.asarray(X, dtype=float), warn=False)
    if y is None:
        return x
    y = column_or_1d(np.asarray(y, dtype=float), warn=False)
    if x.shape != y.shape:
        raise ValueError("X and y have different lengths")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("X and y must be finite")
    order = np.argsort(x, kind="stable")
    return x, y, order


def instrument_profile(freq, omega, gamma, cavity_fwhm, reflection_fraction):
    """Unit-area triplet as recorded through a Lorentzian cavity, with laser reflection.

    Lorentzian widths add under convolution, so each line of the triplet stays a
    Lorentzian; the reflection is a cavity-width line at zero offset.
    """
    f = reflection_fraction
    atom = (lorentzian(freq, 0.0, gamma + cavity_fwhm, 0.5)
            + lorentzian(freq, -omega, 1.5 * gamma + cavity_fwhm, 0.25)
            + lorentzian(freq, omega, 1.5 * gamma + cavity_fwhm, 0.25))
    return (1 - f) * atom + f * lorentzian(freq, 0.0, cavity_fwhm, 1.0)


def _flag_identifiability(result, name, label):
    v, s = result[name], result.sigma(name)
    if v == 0 or not np.isfinite(s) or s / abs(v) > POOR_IDENTIFIABILITY:
        result.flags.append(f"{label} poorly identified (relative sigma {s / abs(v) if v else np.inf:.2g})")


class _CurveFitter(RegressorMixin, BaseEstimator):
    param_names = ()

    def _model(self, x, *p):
        raise NotImplementedError

    def _initial(self, x, y, y_err):
        raise NotImplementedError

    def _bounds(self):
        return None

    def fit(self, X, y, y_err=None):
        x, y, order = _xy(X, y)
        if y_err is not None:
            y_err = column_or_1d(np.asarray(y_err, dtype=float))[order]
        x, y = x[order], y[order]
        data = DataSeries(x, y, y_err)
        p0 = self._initial(x, y, data.y_err)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            self.result_ = least_squares(self._model, data, p0, self._bounds(), self.param_names)
        self._check(self.result_)
        for name, value in zip(self.param_names, self.result_.values):
            setattr(self, name + "_", value)
        return self

    def _check(self, result):
        pass

    def predict(self, X):
        check_is_fitted(self, "result_")
        x = _xy(X)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            return self._model(x, *self.result_.values)


class SpectrumFitter(_CurveFitter):
    """Triplet spectrum through the scanning cavity: free Rabi frequency, area and flat offset.

    Gamma, cavity width and reflection share stay fixed.  The Rabi frequency is seeded
    from the separation of the outer peaks, so the triplet must be resolved in the data.
    """

    param_names = ("omega", "amplitude", "offset")

    def __init__(self, gamma=RB87_D2_GAMMA, cavity_fwhm=SPECTROSCOPY_CAVITY_FWHM,
                 reflection_fraction=REFLECTION_FRACTION, omega_init=None):
        self.gamma = gamma
        self.cavity_fwhm = cavity_fwhm
        self.reflection_fraction = reflection_fraction
        self.omega_init = omega_init

    def _model(self, x, omega, amplitude, offset):
        return amplitude * instrument_profile(x, omega, self.gamma, self.cavity_fwhm,
                                              self.reflection_fraction) + offset

    def _initial(self, x, y, y_err):
        offset = float(np.min(y))
        amplitude = float(np.trapezoid(y - offset, x))
        if self.omega_init is not None:
            return [self.omega_init, amplitude, offset]
        try:
            left, _, right = find_peaks(Spectrum(x, y - offset), 3)
        except PeakFindingError as exc:
            raise DegenerateFitError(f"triplet not resolved in the data ({exc})") from exc
        return [0.5 * (x[right] - x[left]), amplitude, offset]

    def _bounds(self):
        return ([0.0, 0.0, -np.inf], [np.inf, np.inf, np.inf])

    def _check(self, result):
        _flag_identifiability(result, "omega", "omega")
        if result["omega"] < self.gamma:
            result.flags.append("fitted omega below gamma: sidebands not resolved from the center line")


class G2Fitter(_CurveFitter):
    """Resonant g2 times the pulse triangle window: free Rabi frequency and amplitude."""

    param_names = ("omega", "amplitude")

    def __init__(self, gamma=RB87_D2_GAMMA, pulse_length=PULSE_LENGTH, omega_init=None):
        self.gamma = gamma
        self.pulse_length = pulse_length
        self.omega_init = omega_init

    def _model(self, x, omega, amplitude):
        return amplitude * g2_analytic(AtomParams(self.gamma, omega), x) * triangle_window(
            x, self.pulse_length)

    def _initial(self, x, y, y_err):
        self.oscillation_seen_ = True
        if self.omega_init is not None:
            return [self.omega_init, 1.0]
        pos = x > 0
        xp = x[pos]
        yp = np.convolve(y[pos], np.ones(3) / 3, mode="same")
        # first local maximum after the antibunching dip, above the long-delay level
        interior = np.flatnonzero((yp[1:-1] > yp[:-2]) & (yp[1:-1] >= yp[2:])) + 1
        level = np.median(yp[xp > 0.5 * xp.max()]) if xp.size else 1.0
        interior = interior[yp[interior] > level] if interior.size else interior
        if interior.size == 0:
            self.oscillation_seen_ = False
        # noise can fake an early maximum, so the peak estimate competes with a coarse
        # scan; the amplitude is linear and solved exactly for each candidate
        candidates = list(self.gamma * np.geomspace(0.25, 100, 400))
        if interior.size:
            candidates.append(np.pi / xp[interior[0]])
        w2 = 1.0 / y_err ** 2 if y_err is not None else np.ones_like(y)
        best = None
        for om in candidates:
            m = self._model(x, om, 1.0)
            amp = np.sum(w2 * m * y) / np.sum(w2 * m * m)
            chi2 = np.sum(w2 * (y - amp * m) ** 2)
            if best is None or chi2 < best[0]:
                best = (chi2, om, amp)
        return [best[1], max(best[2], 1e-12)]

    def _bounds(self):
        return ([1e-6 * self.gamma, 0.0], [np.inf, np.inf])

    def _check(self, result):
        if not self.oscillation_seen_:
            result.flags.append("no Rabi oscillation visible; omega poorly identified")
        else:
            _flag_identifiability(result, "omega", "omega")
        if result["omega"] < self.gamma / 4:
            result.flags.append("fitted omega below gamma/4, outside the strong-drive form")


class SaturationFitter(_CurveFitter):
    """Detected rate eta*gamma/2 * P/(P + P_sat): free saturation power and efficiency."""

    param_names = ("p_sat", "eta")

    def __init__(self, gamma=RB87_D2_GAMMA):
        self.gamma = gamma

    def _model(self, x, p_sat, eta):
        return eta * self.gamma / 2 * x / (x + p_sat)

    def _initial(self, x, y, y_err):
        if not np.any(y > 0):
            raise DegenerateFitError("no signal: all rates are zero")
        top = float(np.max(y))
        half = np.flatnonzero(y >= 0.5 * top)
        p_half = float(x[half[0]]) if half.size else float(np.median(x))
        p_sat = max(p_half, np.min(x[x > 0]))
        eta = min(1.0, 2 * top / self.gamma * (1 + p_sat / np.max(x)))
        return [p_sat, eta]

    def _bounds(self):
        return ([1e-300, 0.0], [np.inf, 1.0])

    def _check(self, result):
        rho = result.correlation()[0, 1]
        if abs(rho) > 0.95:
            result.flags.append(f"eta and p_sat strongly correlated (rho = {rho:.3f}); "
                                "data do not reach saturation")


class TwoExponentialFitter(_CurveFitter):
    """Exponential rise and fall on either side of the grid maximum of a correlation trace."""

    param_names = ("tau_rise", "tau_fall", "amplitude", "baseline")

    def fit(self, X, y, y_err=None):
        x, y, order = _xy(X, y)
        self.result_ = fit_two_exponentials(CrossCorrelation(x[order], y[order]))
        self.tau_peak_ = self.result_.info["tau_peak"]
        for name, value in zip(self.param_names, self.result_.values):
            setattr(self, name + "_", value)
        return self

    def _model(self, x, tau_rise, tau_fall, amplitude, baseline):
        return two_exponential(x, tau_rise, tau_fall, amplitude, baseline, self.tau_peak_)


# --- function forms over DataSeries ---------------------------------------------

def fit_spectrum(data, gamma=RB87_D2_GAMMA, cavity_fwhm=SPECTROSCOPY_CAVITY_FWHM,
                 reflection_fraction=REFLECTION_FRACTION):
    est = SpectrumFitter(gamma, cavity_fwhm, reflection_fraction)
    return est.fit(data.x, data.y, data.y_err).result_


def fit_g2(data, gamma=RB87_D2_GAMMA, pulse_length=PULSE_LENGTH):
    return G2Fitter(gamma, pulse_length).fit(data.x, data.y, data.y_err).result_


def fit_saturation(data, gamma=RB87_D2_GAMMA):
    return SaturationFitter(gamma).fit(data.x, data.y, data.y_err).result_
