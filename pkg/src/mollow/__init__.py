"""Resonance fluorescence of a driven two-level atom: spectra, photon correlations, fits."""
from .dynamics import (RB87_D2_GAMMA, AtomParams, BlochState, SaturationModel, Spectrum,
                       evolve, evolve_grid, g2_analytic, g2_numeric, generalized_rabi, mhz,
                       mollow_components, mollow_spectrum_analytic, saturation_rate,
                       spectrum_numeric, steady_state, to_mhz)
from .errors import (DegenerateFitError, NonPhysicalError, PeakFindingError, ResolutionError,
                     ResolutionWarning, UndefinedModelError, ValidityWarning)
from .estimators import (G2Fitter, SaturationFitter, SpectrumFitter, TwoExponentialFitter,
                         fit_g2, fit_saturation, fit_spectrum)
from .filtered import (CrossCorrelation, SensorConfig, build_composite, filtered_auto_correlation,
                       filtered_cross_correlation, fit_two_exponentials)
from .fitting import DataSeries, FitResult, least_squares
from .instrument import (CavityFilter, ReflectionBackground, add_reflection, cavity_transfer,
                         convolve_with_cavity, deconvolve_fwhm, line_peak_ratios, measure_fwhm,
                         peak_ratios,
                         triangle_window)
from .montecarlo import (CorrelationHistogram, SimConfig, correlate, hbt_split, simulate_hbt,
                         simulate_stream)

__version__ = "0.1.0"
