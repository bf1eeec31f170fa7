"""Shared spectrum container.

Every simulated or measured trace is an axis paired with values: detunings
in GHz, wavenumber offsets in cm^-1, or excitation powers, against count
rates, normalized populations, or depletion factors.  The acquisition settings (drive
saturations, noise seed, reference line) ride along in ``metadata`` so a
fit can reconstruct the conditions that produced the trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPECTRUM_KINDS = ("fluorex", "sted", "saturation", "fc")


@dataclass
class Spectrum:
    """An axis, its values, and how they came to be.

    Parameters
    ----------
    axis : ndarray
        Strictly increasing axis values.
    values : ndarray
        One signal value per axis point.
    kind : str
        One of ``fluorex``, ``sted``, ``saturation``, ``fc``.
    axis_unit : str
        e.g. ``"GHz"``, ``"cm-1"``, ``"power"``.
    value_unit : str
        e.g. ``"population"``, ``"depletion"``, ``"counts"``, ``"intensity"``.
    metadata : dict
        Flat string-to-scalar mapping of acquisition settings.
    """

    axis: np.ndarray
    values: np.ndarray
    kind: str
    axis_unit: str
    value_unit: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.axis = np.asarray(self.axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in SPECTRUM_KINDS:
            raise ValueError(
                f"kind must be one of {', '.join(SPECTRUM_KINDS)}, got {self.kind!r}"
            )
        if self.axis.ndim != 1 or self.axis.shape != self.values.shape:
            raise ValueError(
                f"axis and values must be 1-d and equally long, got "
                f"{self.axis.shape} and {self.values.shape}"
            )
        if self.axis.size >= 2 and not np.all(np.diff(self.axis) > 0):
            raise ValueError("axis must be strictly increasing")
        if not np.all(np.isfinite(self.axis)) or not np.all(np.isfinite(self.values)):
            raise ValueError("axis and values must be finite")

    def __len__(self) -> int:
        return self.axis.size
