"""Vibronic level schemes for a single guest molecule.

A scheme anchors everything to the purely electronic 00ZPL between the
vibrationless ground state g = |S0, v=0> and the vibrationless excited state
e = |S1, v=0>.  Those two anchors are implicit: only vibrationally excited
levels are listed, each with its wavenumber above its electronic origin, its
relaxation-limited width, and its relative Franck-Condon weight.

Wavenumbers are stored in cm^-1, widths as FWHM/2pi in GHz, the 00ZPL
frequency in THz, and the excited-state lifetime T1 in ns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

# Sentinel accepted wherever a drive target is expected: the purely
# electronic transition between the two implicit vibrationless anchors.
ZPL = "00zpl"

LEVEL_KINDS = ("fundamental", "overtone", "combination", "satellite", "unassigned")


class ElectronicState(Enum):
    S0 = "S0"
    S1 = "S1"


@dataclass(frozen=True)
class VibronicLevel:
    """One vibrationally excited level of S0 or S1.

    Parameters
    ----------
    id : str
        Unique label within the scheme, e.g. ``"v290"``.
    state : ElectronicState
        Electronic state the level belongs to.
    wavenumber_cm1 : float
        Vibrational energy above the state's vibrationless origin, cm^-1.
    gamma_ghz : float
        FWHM/2pi of the level set by its vibrational relaxation, GHz.
    relative_fc : float
        Franck-Condon weight relative to the strongest line, in [0, 1],
        proportional to the squared Rabi frequency of the transition.
    kind : str
        One of ``fundamental``, ``overtone``, ``combination``,
        ``satellite``, ``unassigned``.
    """

    id: str
    state: ElectronicState
    wavenumber_cm1: float
    gamma_ghz: float
    relative_fc: float
    kind: str = "unassigned"


@dataclass(frozen=True)
class LevelScheme:
    """Level structure of one molecule: anchors plus vibronic levels."""

    zpl_frequency_thz: float
    t1_ns: float
    s0_levels: tuple[VibronicLevel, ...] = ()
    s1_levels: tuple[VibronicLevel, ...] = ()
    baseline_sideband_cross_section: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "s0_levels", tuple(self.s0_levels))
        object.__setattr__(self, "s1_levels", tuple(self.s1_levels))

    def zpl_linewidth_ghz(self) -> float:
        """Lifetime-limited FWHM of the 00ZPL in GHz, 1/(2 pi T1)."""
        return 1.0 / (2.0 * math.pi * self.t1_ns)

    def level(self, level_id: str) -> VibronicLevel:
        for lev in self.s0_levels + self.s1_levels:
            if lev.id == level_id:
                return lev
        raise KeyError(f"no level with id {level_id!r} in scheme")


@dataclass(frozen=True)
class LaserDrive:
    """A laser addressing one transition of the scheme.

    ``saturation`` is the dimensionless ratio P/P_sat at the line center of
    the target transition.  ``detuning_ghz`` is the offset of the laser from
    that line center.  The pump may target the 00ZPL sentinel (two-level
    driving with stimulated emission back down) or an S1 vibronic level
    (effectively one-way: fast downhill relaxation empties the upper level).
    A depletion drive targets S0 vibronic levels below the emitting state; a
    depletion target of None references the saturation to a line of unit
    Franck-Condon weight, which scanning spectra use.
    """

    role: str  # "pump" or "depletion"
    target_level: str | None = ZPL
    detuning_ghz: float = 0.0
    saturation: float = 0.0

    def __post_init__(self) -> None:
        if self.role not in ("pump", "depletion"):
            raise ValueError(f"drive role must be pump or depletion, got {self.role!r}")
        if not math.isfinite(self.detuning_ghz):
            raise ValueError("detuning must be finite")
        if not (math.isfinite(self.saturation) and self.saturation >= 0.0):
            raise ValueError(f"saturation must be >= 0, got {self.saturation}")
        if self.role == "pump" and self.target_level is None:
            raise ValueError("pump drive needs a target level or the 00ZPL sentinel")
        if self.role == "depletion" and self.target_level == ZPL:
            raise ValueError("depletion drive cannot target the 00ZPL")


def validate_scheme(scheme: LevelScheme) -> list[str]:
    """Check a scheme against its structural rules.

    Returns a list of human-readable violations, empty when the scheme is
    valid.  Each entry names the offending level id or scheme field.
    """
    problems: list[str] = []
    if not (math.isfinite(scheme.zpl_frequency_thz) and scheme.zpl_frequency_thz > 0):
        problems.append(f"zpl_frequency_thz must be positive, got {scheme.zpl_frequency_thz}")
    if not (math.isfinite(scheme.t1_ns) and scheme.t1_ns > 0):
        problems.append(f"t1_ns must be positive, got {scheme.t1_ns}")
    b = scheme.baseline_sideband_cross_section
    if not (math.isfinite(b) and b >= 0):
        problems.append(f"baseline_sideband_cross_section must be >= 0, got {b}")

    seen: set[str] = set()
    for expected_state, levels in (
        (ElectronicState.S0, scheme.s0_levels),
        (ElectronicState.S1, scheme.s1_levels),
    ):
        for lev in levels:
            if lev.id == ZPL:
                problems.append(f"level id {ZPL!r} is reserved for the vibrationless anchor")
            if lev.id in seen:
                problems.append(f"level id {lev.id!r} is not unique")
            seen.add(lev.id)
            if lev.state is not expected_state:
                problems.append(
                    f"level {lev.id!r} has state {lev.state.value} but is listed "
                    f"under {expected_state.value}"
                )
            if not (math.isfinite(lev.wavenumber_cm1) and lev.wavenumber_cm1 > 0):
                problems.append(
                    f"level {lev.id!r}: wavenumber_cm1 must be positive, got {lev.wavenumber_cm1}"
                )
            if not (math.isfinite(lev.gamma_ghz) and lev.gamma_ghz > 0):
                problems.append(
                    f"level {lev.id!r}: gamma_ghz must be positive, got {lev.gamma_ghz}"
                )
            if not (math.isfinite(lev.relative_fc) and 0.0 <= lev.relative_fc <= 1.0):
                problems.append(
                    f"level {lev.id!r}: relative_fc must lie in [0, 1], got {lev.relative_fc}"
                )
            if lev.kind not in LEVEL_KINDS:
                problems.append(
                    f"level {lev.id!r}: kind {lev.kind!r} not one of {', '.join(LEVEL_KINDS)}"
                )
    return problems


def require_valid(scheme: LevelScheme) -> LevelScheme:
    """Raise ``ValueError`` listing all violations if the scheme is invalid."""
    problems = validate_scheme(scheme)
    if problems:
        raise ValueError("invalid level scheme: " + "; ".join(problems))
    return scheme


def transition_linewidth(scheme: LevelScheme, level_id: str) -> float:
    """Total optical FWHM in GHz of the transition addressing ``level_id``.

    Lorentzian widths add, so the transition inherits the vibrational width
    of the addressed level plus the lifetime-limited width of the emitting
    anchor.  For the 00ZPL sentinel only the anchor width remains:
    T1 = 7 ns gives 23 MHz.
    """
    zpl = scheme.zpl_linewidth_ghz()
    if level_id == ZPL:
        return zpl
    return scheme.level(level_id).gamma_ghz + zpl


def mode_count(n_atoms: int, linear: bool = False) -> int:
    """Number of normal modes of an N-atom molecule, 3N-6 (3N-5 if linear)."""
    if n_atoms < 2:
        raise ValueError(f"need at least two atoms, got {n_atoms}")
    return 3 * n_atoms - (5 if linear else 6)
