"""Unit-tagged quantities and exact spectroscopic conversions.

Optical transitions are bookkept in mixed units: wavenumbers in cm^-1 for
vibrational intervals, GHz for linewidths and detunings, THz for absolute
frequencies, nm for laser wavelengths, ps/ns for lifetimes.  All conversions
go through the exact speed of light, never through configurable constants.

The only non-trivial relation is the lifetime-limited linewidth of an
exponentially decaying level,

    fwhm = 1 / (2 pi tau),

which ties a 7 ns excited-state lifetime to a 23 MHz optical linewidth and a
10.9 GHz vibrational width to a 14.6 ps relaxation time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

# Exact by definition of the metre: c = 299 792 458 m/s.
WAVENUMBER_TO_GHZ = 29.9792458  # 1 cm^-1 in GHz
SPEED_OF_LIGHT_NM_THZ = 299792.458  # c in nm * THz


class Unit(Enum):
    WAVENUMBER_CM = "wavenumber_cm-1"
    FREQUENCY_GHZ = "frequency_GHz"
    FREQUENCY_THZ = "frequency_THz"
    WAVELENGTH_NM = "wavelength_nm"
    TIME_PS = "time_ps"
    TIME_NS = "time_ns"
    POWER_NW = "power_nW"
    POWER_UW = "power_uW"
    DIMENSIONLESS = "dimensionless"


# Units whose values are meaningless at or below zero (a wavelength of 0 nm,
# a lifetime of -3 ps).  Frequencies and wavenumbers stay signed: detunings
# and axis offsets live there.
_STRICTLY_POSITIVE = {
    Unit.WAVELENGTH_NM,
    Unit.TIME_PS,
    Unit.TIME_NS,
    Unit.POWER_NW,
    Unit.POWER_UW,
}


class UnitError(ValueError):
    """Raised when quantities of different units are combined implicitly."""


def _check_finite(value: float, what: str = "value") -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{what} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class Quantity:
    """A number tagged with its unit.

    Arithmetic between mismatched units raises ``UnitError`` instead of
    guessing; use :func:`convert` to change units explicitly.
    """

    value: float
    unit: Unit

    def __post_init__(self) -> None:
        value = _check_finite(self.value, f"{self.unit.value} quantity")
        object.__setattr__(self, "value", value)
        if self.unit in _STRICTLY_POSITIVE and value <= 0.0:
            raise ValueError(
                f"{self.unit.value} must be strictly positive, got {value}"
            )

    def _require_same_unit(self, other: "Quantity") -> None:
        if not isinstance(other, Quantity):
            raise UnitError(f"cannot combine Quantity with {type(other).__name__}")
        if other.unit is not self.unit:
            raise UnitError(
                f"cannot combine {self.unit.value} with {other.unit.value}; "
                "convert explicitly first"
            )

    def __add__(self, other: "Quantity") -> "Quantity":
        self._require_same_unit(other)
        return Quantity(self.value + other.value, self.unit)

    def __sub__(self, other: "Quantity") -> "Quantity":
        self._require_same_unit(other)
        return Quantity(self.value - other.value, self.unit)


def wavenumber_to_frequency(wavenumber_cm: float) -> float:
    """Convert a wavenumber in cm^-1 to a frequency in GHz."""
    return _check_finite(wavenumber_cm, "wavenumber") * WAVENUMBER_TO_GHZ


def frequency_to_wavenumber(frequency_ghz: float) -> float:
    """Convert a frequency in GHz to a wavenumber in cm^-1."""
    return _check_finite(frequency_ghz, "frequency") / WAVENUMBER_TO_GHZ


def wavelength_to_frequency(wavelength_nm: float) -> float:
    """Convert a vacuum wavelength in nm to an absolute frequency in THz."""
    wavelength_nm = _check_finite(wavelength_nm, "wavelength")
    if wavelength_nm <= 0.0:
        raise ValueError(f"wavelength must be positive, got {wavelength_nm}")
    return SPEED_OF_LIGHT_NM_THZ / wavelength_nm


def frequency_to_wavelength(frequency_thz: float) -> float:
    """Convert an absolute frequency in THz to a vacuum wavelength in nm."""
    frequency_thz = _check_finite(frequency_thz, "frequency")
    if frequency_thz <= 0.0:
        raise ValueError(f"frequency must be positive, got {frequency_thz}")
    return SPEED_OF_LIGHT_NM_THZ / frequency_thz


def linewidth_to_lifetime(fwhm_ghz: float) -> float:
    """Lifetime in ps of a level whose decay-limited FWHM is ``fwhm_ghz``.

    Inverse of :func:`lifetime_to_linewidth`; the product
    ``fwhm_ghz * tau_ns`` equals ``1 / (2 pi)`` for every input.
    """
    fwhm_ghz = _check_finite(fwhm_ghz, "linewidth")
    if fwhm_ghz <= 0.0:
        raise ValueError(f"linewidth must be positive, got {fwhm_ghz}")
    return 1.0e3 / (2.0 * math.pi * fwhm_ghz)


def lifetime_to_linewidth(tau_ps: float) -> float:
    """Decay-limited FWHM in GHz of a level with lifetime ``tau_ps``."""
    tau_ps = _check_finite(tau_ps, "lifetime")
    if tau_ps <= 0.0:
        raise ValueError(f"lifetime must be positive, got {tau_ps}")
    return 1.0e3 / (2.0 * math.pi * tau_ps)


# Plain unit conversions the CLI exposes.  Keys are (from, to).
_CONVERSIONS = {
    (Unit.WAVENUMBER_CM, Unit.FREQUENCY_GHZ): wavenumber_to_frequency,
    (Unit.FREQUENCY_GHZ, Unit.WAVENUMBER_CM): frequency_to_wavenumber,
    (Unit.WAVENUMBER_CM, Unit.FREQUENCY_THZ): lambda w: wavenumber_to_frequency(w) * 1e-3,
    (Unit.FREQUENCY_THZ, Unit.WAVENUMBER_CM): lambda f: frequency_to_wavenumber(f * 1e3),
    (Unit.WAVELENGTH_NM, Unit.FREQUENCY_THZ): wavelength_to_frequency,
    (Unit.FREQUENCY_THZ, Unit.WAVELENGTH_NM): frequency_to_wavelength,
    (Unit.WAVELENGTH_NM, Unit.FREQUENCY_GHZ): lambda w: wavelength_to_frequency(w) * 1e3,
    (Unit.FREQUENCY_GHZ, Unit.WAVELENGTH_NM): lambda f: frequency_to_wavelength(f * 1e-3),
    (Unit.FREQUENCY_GHZ, Unit.FREQUENCY_THZ): lambda f: f * 1e-3,
    (Unit.FREQUENCY_THZ, Unit.FREQUENCY_GHZ): lambda f: f * 1e3,
    (Unit.TIME_PS, Unit.TIME_NS): lambda t: t * 1e-3,
    (Unit.TIME_NS, Unit.TIME_PS): lambda t: t * 1e3,
    (Unit.POWER_NW, Unit.POWER_UW): lambda p: p * 1e-3,
    (Unit.POWER_UW, Unit.POWER_NW): lambda p: p * 1e3,
}

# The lifetime relation is physics, not unit algebra, so it is opted into
# by name rather than folded into the conversion table.
_LIFETIME_RELATION = {
    (Unit.FREQUENCY_GHZ, Unit.TIME_PS): linewidth_to_lifetime,
    (Unit.TIME_PS, Unit.FREQUENCY_GHZ): lifetime_to_linewidth,
    (Unit.FREQUENCY_GHZ, Unit.TIME_NS): lambda f: linewidth_to_lifetime(f) * 1e-3,
    (Unit.TIME_NS, Unit.FREQUENCY_GHZ): lambda t: lifetime_to_linewidth(t * 1e3),
}


def convert(quantity: Quantity, to_unit: Unit, relation: str | None = None) -> Quantity:
    """Convert ``quantity`` to ``to_unit``.

    Parameters
    ----------
    quantity : Quantity
        The tagged value to convert.
    to_unit : Unit
        Target unit.
    relation : str, optional
        ``"lifetime"`` selects the linewidth/lifetime relation for
        frequency <-> time conversions.  Without it only direct unit
        conversions are allowed.
    """
    if quantity.unit is to_unit:
        return quantity
    if relation is None:
        fn = _CONVERSIONS.get((quantity.unit, to_unit))
        if fn is None:
            raise UnitError(
                f"no conversion from {quantity.unit.value} to {to_unit.value}"
            )
    elif relation == "lifetime":
        fn = _LIFETIME_RELATION.get((quantity.unit, to_unit))
        if fn is None:
            raise UnitError(
                "lifetime relation links frequency_GHz with time_ps/time_ns, "
                f"not {quantity.unit.value} -> {to_unit.value}"
            )
    else:
        raise ValueError(f"unknown relation {relation!r}")
    return Quantity(fn(quantity.value), to_unit)


def unit_from_name(name: str) -> Unit:
    """Look up a Unit by its serialized name, e.g. ``"frequency_GHz"``."""
    for unit in Unit:
        if unit.value == name:
            return unit
    raise ValueError(f"unknown unit {name!r}")
