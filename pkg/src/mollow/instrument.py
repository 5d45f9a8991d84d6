"""Measurement chain: Fabry-Perot filter, laser reflection background, width and peak read-out."""
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve

from .dynamics import Spectrum, lorentzian, mhz, mollow_components
from .errors import NonPhysicalError, PeakFindingError, ResolutionError

SPECTROSCOPY_CAVITY_FWHM = mhz(3.92)
SIDEBAND_FILTER_FWHM = mhz(20.0)
REFLECTION_FRACTION = 0.076
PULSE_LENGTH = 2e-6


@dataclass(frozen=True)
class CavityFilter:
    center: float = 0.0
    fwhm: float = SPECTROSCOPY_CAVITY_FWHM

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError("cavity fwhm must be positive")


@dataclass(frozen=True)
class ReflectionBackground:
    fraction: float = REFLECTION_FRACTION

    def __post_init__(self):
        if not 0 <= self.fraction < 1:
            raise ValueError("reflection fraction must lie in [0, 1)")


def cavity_transfer(filter, omega):
    """Intensity transmission of a single Lorentzian resonance, unity on resonance."""
    x = 2.0 * (np.asarray(omega, dtype=float) - filter.center) / filter.fwhm
    return 1.0 / (1.0 + x ** 2)


def _uniform_step(freq):
    steps = np.diff(freq)
    h = steps.mean()
    if not np.allclose(steps, h, rtol=1e-6, atol=0):
        raise ResolutionError("convolution needs a uniform frequency grid")
    return h


def convolve_with_cavity(spec, filter_fwhm):
    """Scan the spectrum through a cavity of width `filter_fwhm`.

    The result is the power transmitted at each cavity setting, per unit frequency:
    the density convolved with a unit-area Lorentzian, plus the elastic line turned
    into a Lorentzian of the cavity width.  Power that would land outside the grid is
    dropped, so the grid should extend well past the spectral features.
    """
    if not filter_fwhm > 0:
        raise ValueError("filter_fwhm must be positive")
    freq = spec.freq
    if freq.size < 3:
        raise ResolutionError("spectrum grid too short")
    h = _uniform_step(freq)
    if h > filter_fwhm / 10:
        raise ResolutionError(f"grid step {h:.4g} exceeds filter_fwhm/10 = {filter_fwhm / 10:.4g}")
    n = freq.size
    offsets = (np.arange(2 * n - 1) - (n - 1)) * h
    kernel = lorentzian(offsets, 0.0, filter_fwhm) * h
    density = fftconvolve(spec.density, kernel, mode="same")
    density += lorentzian(freq, 0.0, filter_fwhm, spec.elastic_weight)
    return Spectrum(freq, np.clip(density, 0.0, None), 0.0)


def add_reflection(spec, bg):
    """Give a monochromatic reflection `bg.fraction` of the total power, at fixed total."""
    if isinstance(bg, (int, float)):
        bg = ReflectionBackground(bg)
    if bg.fraction == 0:
        return spec
    f = bg.fraction
    total = spec.total_power()
    return replace(spec, density=(1 - f) * spec.density,
                   elastic_weight=(1 - f) * spec.elastic_weight + f * total)


def find_peaks(spec, n_peaks=3):
    """Indices of the `n_peaks` tallest local maxima of the 3-point smoothed density, by frequency."""
    y = spec.density
    if y.size < 3:
        raise PeakFindingError(0, n_peaks)
    smooth = np.convolve(y, np.ones(3) / 3, mode="same")
    smooth[0], smooth[-1] = y[0], y[-1]
    mid = smooth[1:-1]
    idx = np.flatnonzero((mid > smooth[:-2]) & (mid >= smooth[2:])) + 1
    if idx.size < n_peaks:
        raise PeakFindingError(idx.size, n_peaks)
    # tallest first; equal heights go to the smaller |offset|
    order = np.lexsort((np.abs(spec.freq[idx]), -smooth[idx]))
    return np.sort(idx[order[:n_peaks]])


def peak_ratios(spec):
    """(left, center, right) peak heights relative to the smaller sideband."""
    i, j, k = find_peaks(spec, 3)
    h = spec.density[[i, j, k]]
    return tuple(float(v) for v in h / min(h[0], h[2]))


def line_peak_ratios(params, freq_grid, cavity_fwhm=None, reflection_fraction=0.0):
    """(lower, center, upper) heights of the individual triplet lines, relative to the smaller sideband.

    Each line goes through the reflection and cavity steps on its own, so overlap of
    neighbouring line tails does not enter; the reflection line sits under the
    central line and counts toward it.
    """
    freq = np.asarray(freq_grid, dtype=float)
    center, lower, upper = mollow_components(params, freq)
    lines = [Spectrum(freq, c) for c in (lower, center, upper)]
    total = sum(s.total_power() for s in lines)
    f = reflection_fraction
    lines = [replace(s, density=(1 - f) * s.density) for s in lines]
    lines[1] = replace(lines[1], elastic_weight=f * total)
    if cavity_fwhm is not None:
        lines = [convolve_with_cavity(s, cavity_fwhm) for s in lines]
    elif f:
        raise ValueError("a reflection line has no finite height without a cavity")
    h = np.array([s.density.max() for s in lines])
    return tuple(float(v) for v in h / min(h[0], h[2]))


def measure_fwhm(spec, near=0.0):
    """Full width at half maximum of the peak nearest `near`, by interpolating half-height crossings."""
    f, y = spec.freq, spec.density
    i = int(np.argmin(np.abs(f - near)))
    # climb to the local maximum
    while 0 < i < y.size - 1 and max(y[i - 1], y[i + 1]) > y[i]:
        i = i + 1 if y[i + 1] > y[i - 1] else i - 1
    half = 0.5 * y[i]
    right = np.flatnonzero(y[i:] < half)
    left = np.flatnonzero(y[:i + 1] < half)
    if right.size == 0 or left.size == 0:
        raise ResolutionError("half-maximum crossing lies outside the grid")
    r = i + right[0]
    l = left[-1]
    f_right = np.interp(half, [y[r], y[r - 1]], [f[r], f[r - 1]])
    f_left = np.interp(half, [y[l], y[l + 1]], [f[l], f[l + 1]])
    return float(f_right - f_left)


def deconvolve_fwhm(measured_fwhm, cavity_fwhm):
    """Intrinsic Lorentzian width: Lorentzian widths add under convolution."""
    if measured_fwhm <= cavity_fwhm:
        raise NonPhysicalError(
            f"measured width {measured_fwhm:.4g} does not exceed cavity width {cavity_fwhm:.4g}")
    return measured_fwhm - cavity_fwhm


def triangle_window(tau, pulse_length=PULSE_LENGTH):
    """Overlap of two square detection gates of length T offset by tau."""
    if not pulse_length > 0:
        raise ValueError("pulse_length must be positive")
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(tau, dtype=float)) / pulse_length)
