"""Matplotlib figure rendering for the command-line reports.

All functions write a PNG to the given path and return the path; they use
the Agg backend so they work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from ..spectrum import Spectrum

_AXIS_LABELS = {
    "cm-1": "wavenumber (cm$^{-1}$)",
    "GHz": "detuning (GHz)",
    "THz": "frequency (THz)",
    "power": "power (arb. units)",
}


def _axis_label(unit: str) -> str:
    return _AXIS_LABELS.get(unit, unit)


def plot_spectrum(spec: Spectrum, path: str, title: str | None = None) -> str:
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(spec.axis, spec.values, lw=1.0, color="C0")
    ax.set_xlabel(_axis_label(spec.axis_unit))
    ax.set_ylabel(spec.value_unit)
    ax.set_title(title if title is not None else spec.kind)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_fit(spec: Spectrum, model_values: np.ndarray, path: str,
             title: str | None = None) -> str:
    """Data with the fitted model overlaid and the residual underneath."""
    model_values = np.asarray(model_values, dtype=float)
    fig, (ax, axr) = plt.subplots(
        2, 1, figsize=(7.0, 5.0), sharex=True,
        gridspec_kw={"height_ratios": [3, 1]},
    )
    ax.plot(spec.axis, spec.values, ".", ms=3, color="C0", label="data")
    ax.plot(spec.axis, model_values, lw=1.2, color="C3", label="fit")
    ax.set_ylabel(spec.value_unit)
    ax.legend(frameon=False)
    ax.set_title(title if title is not None else f"{spec.kind} fit")
    axr.plot(spec.axis, spec.values - model_values, lw=0.8, color="C7")
    axr.axhline(0.0, lw=0.6, color="k")
    axr.set_xlabel(_axis_label(spec.axis_unit))
    axr.set_ylabel("residual")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_sticks(sticks, spec: Spectrum | None, path: str,
                title: str | None = None) -> str:
    """Stick intensities, optionally with the broadened spectrum behind."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    if spec is not None:
        scale = max((s.intensity for s in sticks), default=1.0)
        top = spec.values.max()
        shown = spec.values * (scale / top) if top > 0 else spec.values
        ax.plot(spec.axis, shown, lw=1.0, color="C0", alpha=0.7,
                label="broadened")
    for stick in sticks:
        ax.vlines(stick.wavenumber_cm1, 0.0, stick.intensity,
                  color="C3", lw=1.2)
    ax.set_xlabel("wavenumber (cm$^{-1}$)")
    ax.set_ylabel("relative intensity")
    ax.set_title(title if title is not None else "vibronic sticks")
    if spec is not None:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_mode_stats(report, path: str) -> str:
    """Per-mode deviation panels: wavenumber and linewidth vs mode."""
    fig, (axw, axg) = plt.subplots(2, 1, figsize=(7.5, 6.0), sharex=True)
    colors = {"S0": "C0", "S1": "C3"}
    seen = set()
    for mode in report.modes:
        for st in (mode.s0, mode.s1):
            if st is None or st.singleton:
                continue
            color = colors[st.state]
            label = st.state if st.state not in seen else None
            seen.add(st.state)
            devs_w = [st.wavenumber_deviations[m] for m in st.molecule_ids]
            devs_g = [st.gamma_deviations[m] for m in st.molecule_ids]
            x = [mode.mode_label] * st.n
            axw.plot(x, devs_w, "o", ms=4, color=color, alpha=0.7, label=label)
            axg.plot(x, devs_g, "o", ms=4, color=color, alpha=0.7,
                     label=label)
    axw.axhline(0.0, lw=0.6, color="k")
    axg.axhline(0.0, lw=0.6, color="k")
    axw.set_ylabel("wavenumber deviation (cm$^{-1}$)")
    axg.set_ylabel("linewidth deviation (GHz)")
    axg.set_xlabel("mode mean wavenumber (cm$^{-1}$)")
    if seen:
        axw.legend(frameon=False)
    axw.set_title("mode-to-mode variation across molecules")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
