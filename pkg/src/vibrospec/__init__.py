"""Vibronic spectroscopy of single dye molecules in a host crystal.

Modules
-------
units     exact unit conversions and the linewidth/lifetime relation
levels    electronic states, vibrational levels, level schemes, laser drives
fcmodel   Franck-Condon factors, displacements, stick spectra
ratesim   steady-state and time-dependent rate equations; simulated spectra
fitkit    Levenberg-Marquardt fitting, peak detection, model library
specpipe  file formats, cross-molecule statistics, plots, command line
"""

__version__ = "0.1.0"

from .fcmodel import (ModeDisplacement, VibronicStick, alpha_from_intensity_ratio,
                      fc_factor_poisson, relative_intensities, stick_to_spectrum)
from .fitkit import (FitResult, Parameter, detect_peaks, fit_lorentzian_multi,
                     fit_rate_model, fit_saturation, levenberg_marquardt)
from .levels import (ZPL, ElectronicState, LaserDrive, LevelScheme, VibronicLevel,
                     transition_linewidth, validate_scheme)
from .ratesim import (RateSystem, add_noise, build_rate_matrix, fluorex_spectrum,
                      saturation_curve, steady_state, sted_spectrum, time_evolve)
from .spectrum import Spectrum
from .units import Quantity, Unit, convert, lifetime_to_linewidth, linewidth_to_lifetime

__all__ = [
    "__version__",
    "ModeDisplacement", "VibronicStick", "alpha_from_intensity_ratio",
    "fc_factor_poisson", "relative_intensities", "stick_to_spectrum",
    "FitResult", "Parameter", "detect_peaks", "fit_lorentzian_multi",
    "fit_rate_model", "fit_saturation", "levenberg_marquardt",
    "ZPL", "ElectronicState", "LaserDrive", "LevelScheme", "VibronicLevel",
    "transition_linewidth", "validate_scheme",
    "RateSystem", "add_noise", "build_rate_matrix", "fluorex_spectrum",
    "saturation_curve", "steady_state", "sted_spectrum", "time_evolve",
    "Spectrum",
    "Quantity", "Unit", "convert", "lifetime_to_linewidth", "linewidth_to_lifetime",
]
