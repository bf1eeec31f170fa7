"""Franck-Condon intensity model for displaced harmonic modes.

Each vibrational mode is treated as a one-dimensional harmonic oscillator
whose equilibrium position shifts between the two electronic states without
mixing into other modes.  The dimensionless displacement alpha sets the
Huang-Rhys factor S = alpha**2, and the intensity for exciting n quanta of
the mode follows the Poisson progression

    I(n) = exp(-S) * S**n / n!

so the overtone-to-fundamental intensity ratio is S/2.  Multi-mode sticks
multiply the per-mode factors and sit at the exact sum of their quanta
wavenumbers.

Two independent routes to the same numbers exist on purpose:
:func:`fc_factor_poisson` is the closed form, and :func:`fc_overlap_numeric`
integrates the displaced oscillator eigenfunctions numerically.  Keeping the
slow route around pins down the fast one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectrum import Spectrum
from .units import WAVENUMBER_TO_GHZ

# Modes whose overtone sits within this distance of twice the fundamental
# count as harmonic; measured progressions stay below this defect.
HARMONIC_DEFECT_MAX_CM = 0.15

# Default ceiling on enumerated sticks before the combinatorial explosion
# of a large mode set is treated as a caller error.
DEFAULT_MAX_STICKS = 1_000_000


class QuadratureError(RuntimeError):
    """Numerical overlap integration failed to converge."""


@dataclass(frozen=True)
class ModeDisplacement:
    """A vibrational mode with its dimensionless displacement alpha."""

    mode_id: str
    wavenumber_cm1: float
    alpha: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.wavenumber_cm1) and self.wavenumber_cm1 > 0):
            raise ValueError(
                f"mode {self.mode_id!r}: wavenumber_cm1 must be positive, "
                f"got {self.wavenumber_cm1}"
            )
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(
                f"mode {self.mode_id!r}: alpha must be >= 0, got {self.alpha}"
            )

    @property
    def huang_rhys(self) -> float:
        return self.alpha * self.alpha


@dataclass
class VibronicStick:
    """One line of a stick spectrum: position, weight, and its assignment."""

    wavenumber_cm1: float
    intensity: float
    quanta: dict = field(default_factory=dict)


def fc_factor_poisson(huang_rhys: float, n: int) -> float:
    """Poisson Franck-Condon factor exp(-S) * S**n / n!.

    Parameters
    ----------
    huang_rhys : float
        Huang-Rhys factor S >= 0.
    n : int
        Number of vibrational quanta in the final state, n >= 0.
    """
    if not (math.isfinite(huang_rhys) and huang_rhys >= 0):
        raise ValueError(f"huang_rhys must be >= 0, got {huang_rhys}")
    if n < 0 or n != int(n):
        raise ValueError(f"quanta must be a non-negative integer, got {n}")
    n = int(n)
    if huang_rhys == 0.0:
        return 1.0 if n == 0 else 0.0
    if n <= 20:
        return math.exp(-huang_rhys) * huang_rhys**n / math.factorial(n)
    # log form avoids overflow of S**n and n! for deep progressions
    return math.exp(n * math.log(huang_rhys) - huang_rhys - math.lgamma(n + 1.0))


def _hermite_functions(max_order: int, x: np.ndarray) -> np.ndarray:
    """Normalized Hermite polynomials h_k(x) = H_k(x)/sqrt(2^k k! sqrt(pi)).

    Returns an array of shape (max_order + 1, len(x)).  The three-term
    recurrence keeps every row at unit L2 norm against exp(-x^2), so no
    factorials overflow.
    """
    h = np.empty((max_order + 1, x.size))
    h[0] = math.pi ** -0.25
    if max_order >= 1:
        h[1] = math.sqrt(2.0) * x * h[0]
    for k in range(2, max_order + 1):
        h[k] = math.sqrt(2.0 / k) * x * h[k - 1] - math.sqrt((k - 1.0) / k) * h[k - 2]
    return h


def fc_overlap_numeric(alpha: float, n: int, m: int) -> float:
    """Squared overlap of oscillator level n with displaced level m.

    The second oscillator is shifted by 2*alpha zero-point amplitudes.  The
    integrand is a product of two Hermite-Gaussian wavefunctions; after
    pulling the shared Gaussian into a quadrature weight the integral is
    evaluated by Gauss-Hermite rules of increasing order until two
    successive refinements agree to 1e-10.

    This is the slow, assumption-free counterpart of
    :func:`fc_factor_poisson`; for m against n = 0 the two must agree.
    """
    if not (math.isfinite(alpha) and alpha >= 0):
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if n < 0 or m < 0:
        raise ValueError(f"quantum numbers must be >= 0, got n={n}, m={m}")
    if n > 100 or m > 100:
        raise ValueError("quantum numbers above 100 are not supported")

    d = math.sqrt(2.0) * alpha  # displacement in units of 1/sqrt(mass*omega/hbar)
    prefactor = math.exp(-0.25 * d * d)
    previous = None
    for order in (32, 48, 64, 96, 128, 192):
        u, w = np.polynomial.hermite.hermgauss(order)
        left = _hermite_functions(n, u + 0.5 * d)[n]
        right = _hermite_functions(m, u - 0.5 * d)[m]
        overlap = prefactor * float(np.dot(w, left * right))
        if previous is not None and abs(overlap - previous) < 1e-10:
            return overlap * overlap
        previous = overlap
    raise QuadratureError(
        f"overlap quadrature did not converge for alpha={alpha}, n={n}, m={m}"
    )


def alpha_from_intensity_ratio(ratio: float) -> float:
    """Displacement alpha from a squared-Rabi-frequency intensity ratio.

    Convention used when calibrating against a measured overtone:
    alpha = ratio**(1/2), e.g. a 0.0961 overtone-to-fundamental ratio of
    squared Rabi frequencies gives alpha = 0.31.  Distinct from the Poisson
    progression of :func:`fc_factor_poisson`, whose intensity ratio at small
    S is S/2; both conventions are kept available rather than merged.
    """
    if not (math.isfinite(ratio) and ratio >= 0):
        raise ValueError(f"ratio must be >= 0, got {ratio}")
    return math.sqrt(ratio)


def _assignments(n_modes: int, max_total: int):
    """Yield all quanta tuples with total at most max_total."""
    if n_modes == 0:
        yield ()
        return
    for head in range(max_total + 1):
        for tail in _assignments(n_modes - 1, max_total - head):
            yield (head,) + tail


def relative_intensities(
    modes: list[ModeDisplacement],
    max_total_quanta: int = 2,
    max_sticks: int = DEFAULT_MAX_STICKS,
) -> list[VibronicStick]:
    """Stick spectrum of all excitations up to ``max_total_quanta``.

    Every assignment of quanta to modes with total at most the cap yields
    one stick at the exact sum of quanta times mode wavenumbers, weighted by
    the product of per-mode Poisson factors.  Intensities are normalized so
    the strongest stick is 1.  Sticks are returned sorted by wavenumber.

    Raises ``ValueError`` when the enumeration would exceed ``max_sticks``.
    """
    if max_total_quanta < 0:
        raise ValueError(f"max_total_quanta must be >= 0, got {max_total_quanta}")
    ids = [m.mode_id for m in modes]
    if len(set(ids)) != len(ids):
        raise ValueError("mode ids must be unique")
    count = math.comb(len(modes) + max_total_quanta, max_total_quanta)
    if count > max_sticks:
        raise ValueError(
            f"{count} sticks would be enumerated, above the cap of {max_sticks}; "
            "reduce max_total_quanta or the mode list"
        )

    factors = {m.mode_id: m.huang_rhys for m in modes}
    sticks = []
    for quanta in _assignments(len(modes), max_total_quanta):
        intensity = 1.0
        wavenumber = 0.0
        for mode, nq in zip(modes, quanta):
            intensity *= fc_factor_poisson(factors[mode.mode_id], nq)
            wavenumber += nq * mode.wavenumber_cm1
        assignment = {m.mode_id: nq for m, nq in zip(modes, quanta) if nq > 0}
        sticks.append(VibronicStick(wavenumber, intensity, assignment))

    peak = max((s.intensity for s in sticks), default=0.0)
    if peak > 0.0:
        for s in sticks:
            s.intensity /= peak
    sticks.sort(key=lambda s: (s.wavenumber_cm1, sorted(s.quanta.items())))
    return sticks


def stick_to_spectrum(
    sticks: list[VibronicStick],
    gamma_ghz: float | list[float],
    axis_cm1: np.ndarray,
) -> Spectrum:
    """Broaden sticks into a spectrum of area-normalized Lorentzians.

    ``gamma_ghz`` is either one FWHM for all sticks or one per stick.  On a
    wavenumber axis each stick contributes

        intensity * (2 / (pi * g)) / (1 + (2 (x - x0) / g)**2)

    with g the FWHM converted to cm^-1, so an isolated stick peaks at
    intensity * 2/(pi*g).
    """
    axis = np.asarray(axis_cm1, dtype=float)
    if np.isscalar(gamma_ghz) or isinstance(gamma_ghz, float | int):
        gammas = [float(gamma_ghz)] * len(sticks)
    else:
        gammas = [float(g) for g in gamma_ghz]
        if len(gammas) != len(sticks):
            raise ValueError(
                f"{len(gammas)} widths for {len(sticks)} sticks; give one or one per stick"
            )
    if any(not (math.isfinite(g) and g > 0) for g in gammas):
        raise ValueError("stick widths must be positive and finite")

    values = np.zeros_like(axis)
    for stick, g_ghz in zip(sticks, gammas):
        g = g_ghz / WAVENUMBER_TO_GHZ
        values += stick.intensity * (2.0 / (math.pi * g)) / (
            1.0 + (2.0 * (axis - stick.wavenumber_cm1) / g) ** 2
        )
    return Spectrum(axis, values, kind="fc", axis_unit="cm-1", value_unit="intensity")


def anharmonicity_defect(fundamental_cm1: float, overtone_cm1: float) -> float:
    """Signed defect overtone - 2*fundamental in cm^-1."""
    if not (math.isfinite(fundamental_cm1) and math.isfinite(overtone_cm1)):
        raise ValueError("wavenumbers must be finite")
    return overtone_cm1 - 2.0 * fundamental_cm1


def is_harmonic(fundamental_cm1: float, overtone_cm1: float,
                threshold_cm1: float = HARMONIC_DEFECT_MAX_CM) -> bool:
    """Whether the overtone sits within the harmonic defect threshold."""
    return abs(anharmonicity_defect(fundamental_cm1, overtone_cm1)) < threshold_cm1


def apply_scaling(
    modes: list[ModeDisplacement], slope: float, intercept: float = 0.0
) -> list[ModeDisplacement]:
    """Affine wavenumber recalibration w -> slope*w + intercept.

    Used to map externally computed harmonic wavenumbers onto measured
    ones.  Displacements are untouched.  Raises if the slope is not
    positive or any rescaled wavenumber would leave the physical range.
    """
    if not (math.isfinite(slope) and slope > 0):
        raise ValueError(f"slope must be positive, got {slope}")
    if not math.isfinite(intercept):
        raise ValueError("intercept must be finite")
    out = []
    for m in modes:
        w = slope * m.wavenumber_cm1 + intercept
        if w <= 0:
            raise ValueError(
                f"mode {m.mode_id!r}: rescaled wavenumber {w} is not positive"
            )
        out.append(ModeDisplacement(m.mode_id, w, m.alpha))
    return out
