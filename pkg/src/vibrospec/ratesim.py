"""Multi-level rate-equation model of driven single-molecule spectra.

The molecule is reduced to its populated states: the vibrationless ground
state g, the vibrationless excited state e, the driven vibronic levels p_j
of S1 and d_k of S0.  Coherences never build up because vibrational
relaxation (tens of ps) dephases everything far faster than the optical
cycle, so classical rates suffice.

Channels:

* pump g -> p_j at W_p = S_p (fc_j/fc_ref) Gamma_e L(delta_j), with the
  stimulated reverse p_j -> g at the same rate,
* vibrational relaxation p_j -> e at Gamma_we_j = 2 pi gamma_j,
* spontaneous decay e -> g at Gamma_e = 1/T1 (all radiative branches
  lumped; the weak branches through d_k return via the much faster
  Gamma_vg),
* when the pump targets the 00ZPL, two-level driving g <-> e at
  S_p Gamma_e L(delta)/2 so that P = P_sat halves the saturated rate,
* stimulated depletion e -> d_k at W_d = S_d (fc_k/fc_ref) Gamma_e
  L(delta_k) with its reverse d_k -> e,
* a detuning-independent baseline e -> g stimulated channel
  S_d Gamma_e sigma_base for phonon-wing and far-sideband losses,
* vibrational relaxation d_k -> g at Gamma_vg_k = 2 pi gamma_k.

L(delta; Gamma) = 1/(1 + (2 delta/Gamma)^2) is the unit-height Lorentzian
of the transition FWHM, which is the addressed level width plus the
lifetime-limited 00ZPL width.  Saturation parameters are defined as
P/P_sat at the line center of the drive's reference transition; other
levels under the same laser scale by their Franck-Condon weight ratio, so
overlapping lines simply add rates.

In the one-way pump regime (Gamma_we >> W, Gamma_e) the on-resonance
excited population follows S/(1+S) and the line power-broadens by
sqrt(1+S).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45

from .levels import ZPL, ElectronicState, LaserDrive, LevelScheme, require_valid
from .spectrum import Spectrum
from .units import WAVENUMBER_TO_GHZ


class DegenerateSystemError(ValueError):
    """The generator has more than one steady state (or none reachable)."""


class IntegrationError(RuntimeError):
    """Adaptive time integration failed to proceed."""


@dataclass(frozen=True)
class RateSystem:
    """Labelled rate matrix of one driving configuration.

    ``rates[i, j]`` is the transition rate from state i to state j in 1/s
    (exponential rates; FWHM linewidths convert via Gamma = 2 pi fwhm).
    The diagonal is zero; losses appear on the generator diagonal instead.
    """

    state_labels: tuple[str, ...]
    rates: np.ndarray

    def __post_init__(self) -> None:
        rates = np.asarray(self.rates, dtype=float)
        n = len(self.state_labels)
        if rates.shape != (n, n):
            raise ValueError(f"rates must be {n}x{n}, got {rates.shape}")
        if not np.all(np.isfinite(rates)):
            raise ValueError("rates must be finite")
        if np.any(rates < 0):
            raise ValueError("rates must be non-negative")
        if np.any(np.diag(rates) != 0):
            raise ValueError("diagonal of the rate matrix must be zero")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "state_labels", tuple(self.state_labels))

    def generator(self) -> np.ndarray:
        """Generator G with dn/dt = G n; columns sum to zero."""
        return _generator_from_rates(self.rates[None])[0]

    def index(self, label: str) -> int:
        return self.state_labels.index(label)

    def min_nonzero_rate(self) -> float:
        nz = self.rates[self.rates > 0]
        if nz.size == 0:
            raise ValueError("system has no nonzero rates")
        return float(nz.min())


def _generator_from_rates(rates: np.ndarray) -> np.ndarray:
    g = np.swapaxes(rates, -1, -2).copy()
    outflow = rates.sum(axis=-1)
    idx = np.arange(rates.shape[-1])
    g[..., idx, idx] = -outflow
    return g


def _lorentzian(delta_ghz: np.ndarray, fwhm_ghz: float) -> np.ndarray:
    return 1.0 / (1.0 + (2.0 * delta_ghz / fwhm_ghz) ** 2)


def _pump_reference_fc(scheme: LevelScheme, target: str | None) -> float:
    if target is None or target == ZPL:
        return 1.0
    lev = scheme.level(target)
    if lev.state is not ElectronicState.S1:
        raise ValueError(f"pump cannot target {lev.state.value} level {target!r}")
    if lev.relative_fc <= 0:
        raise ValueError(f"cannot reference pump saturation to dark line {target!r}")
    return lev.relative_fc


def _depletion_reference_fc(scheme: LevelScheme, target: str | None) -> float:
    if target is None:
        return 1.0
    lev = scheme.level(target)
    if lev.state is not ElectronicState.S0:
        raise ValueError(f"depletion cannot target {lev.state.value} level {target!r}")
    if lev.relative_fc <= 0:
        raise ValueError(f"cannot reference depletion saturation to dark line {target!r}")
    return lev.relative_fc


def _rate_stack(
    scheme: LevelScheme,
    pump: LaserDrive | None,
    depletion: LaserDrive | None,
    pump_offset_ghz: np.ndarray | float = 0.0,
    pump_sat: np.ndarray | float | None = None,
    depl_offset_ghz: np.ndarray | float = 0.0,
    depl_sat: np.ndarray | float | None = None,
) -> tuple[list[str], np.ndarray]:
    """Assemble rate matrices for a batch of driving conditions.

    Offsets are the laser frequency minus the 00ZPL frequency in GHz; an
    S1 level at w cm^-1 absorbs at offset +w*c, an S0 level is depleted at
    offset -w*c.  Offsets and saturations broadcast against each other,
    one matrix per point.  Returns (labels, rates) with rates of shape
    (N, n, n).
    """
    require_valid(scheme)
    c = WAVENUMBER_TO_GHZ
    zplw = scheme.zpl_linewidth_ghz()
    gamma_e = 1e9 / scheme.t1_ns

    arrays = [np.atleast_1d(np.asarray(x, dtype=float)) for x in (
        pump_offset_ghz,
        pump_sat if pump_sat is not None else (pump.saturation if pump else 0.0),
        depl_offset_ghz,
        depl_sat if depl_sat is not None else (depletion.saturation if depletion else 0.0),
    )]
    p_off, p_sat, d_off, d_sat = np.broadcast_arrays(*arrays)
    if np.any(p_sat < 0) or np.any(d_sat < 0):
        raise ValueError("saturation parameters must be >= 0")
    npts = p_off.shape[0]

    labels = ["g", "e"]
    if pump is not None:
        labels += [f"p:{lev.id}" for lev in scheme.s1_levels]
    if depletion is not None:
        labels += [f"d:{lev.id}" for lev in scheme.s0_levels]
    n = len(labels)

    rates = np.zeros((npts, n, n))
    rates[:, 1, 0] += gamma_e

    if pump is not None:
        fc_ref = _pump_reference_fc(scheme, pump.target_level)
        for j, lev in enumerate(scheme.s1_levels):
            delta = p_off - lev.wavenumber_cm1 * c
            w = (p_sat * (lev.relative_fc / fc_ref) * gamma_e
                 * _lorentzian(delta, lev.gamma_ghz + zplw))
            a = 2 + j
            rates[:, 0, a] += w
            rates[:, a, 0] += w
            rates[:, a, 1] += 2.0 * math.pi * lev.gamma_ghz * 1e9
        if pump.target_level == ZPL:
            w0 = 0.5 * p_sat * gamma_e * _lorentzian(p_off, zplw)
            rates[:, 0, 1] += w0
            rates[:, 1, 0] += w0

    if depletion is not None:
        fc_ref = _depletion_reference_fc(scheme, depletion.target_level)
        rates[:, 1, 0] += d_sat * gamma_e * scheme.baseline_sideband_cross_section
        base = 2 + (len(scheme.s1_levels) if pump is not None else 0)
        for k, lev in enumerate(scheme.s0_levels):
            delta = d_off + lev.wavenumber_cm1 * c
            w = (d_sat * (lev.relative_fc / fc_ref) * gamma_e
                 * _lorentzian(delta, lev.gamma_ghz + zplw))
            b = base + k
            rates[:, 1, b] += w
            rates[:, b, 1] += w
            rates[:, b, 0] += 2.0 * math.pi * lev.gamma_ghz * 1e9

    return labels, rates


def build_rate_matrix(
    scheme: LevelScheme,
    pump: LaserDrive | None = None,
    depletion: LaserDrive | None = None,
) -> RateSystem:
    """Rate system for one fixed driving condition.

    Drive detunings are taken relative to the line center of each drive's
    target transition.  States of an undriven manifold are omitted: pump
    only on a one-S1-level scheme gives the three states g, e, p.
    """
    if pump is not None and pump.role != "pump":
        raise ValueError(f"pump drive has role {pump.role!r}")
    if depletion is not None and depletion.role != "depletion":
        raise ValueError(f"depletion drive has role {depletion.role!r}")

    c = WAVENUMBER_TO_GHZ
    pump_offset = 0.0
    if pump is not None:
        center = 0.0
        if pump.target_level != ZPL:
            center = scheme.level(pump.target_level).wavenumber_cm1 * c
        pump_offset = center + pump.detuning_ghz
    depl_offset = 0.0
    if depletion is not None:
        if depletion.target_level is None:
            raise ValueError("a fixed depletion drive needs a target level")
        center = -scheme.level(depletion.target_level).wavenumber_cm1 * c
        depl_offset = center + depletion.detuning_ghz

    labels, rates = _rate_stack(scheme, pump, depletion, pump_offset, None,
                                depl_offset, None)
    return RateSystem(tuple(labels), rates[0])


def _steady_states(generators: np.ndarray) -> np.ndarray:
    """Steady-state populations for a stack of generators, shape (N, n)."""
    scale = np.max(np.abs(generators), axis=(-2, -1), keepdims=True)
    if np.any(scale == 0):
        raise DegenerateSystemError("generator is identically zero")
    _, sv, vh = np.linalg.svd(generators / scale)
    # One singular value vanishes for a connected system; a second small
    # one signals disconnected blocks with no unique equilibrium.
    if np.any(sv[:, -2] <= 1e-10 * sv[:, 0]):
        raise DegenerateSystemError(
            "steady state is not unique: generator has a degenerate null space"
        )
    null = vh[:, -1, :]
    total = null.sum(axis=-1)
    if np.any(np.abs(total) < 1e-9):
        raise DegenerateSystemError("null vector is traceless, not a population")
    pops = null / total[:, None]
    if np.any(pops < -1e-9):
        raise DegenerateSystemError("steady state has significantly negative entries")
    pops = np.where(pops < 0.0, 0.0, pops)
    return pops / pops.sum(axis=-1, keepdims=True)


def steady_state(system: RateSystem) -> np.ndarray:
    """Unique normalized null vector of the generator.

    Entries are clamped at zero against -1e-14-level roundoff and sum to 1.
    Raises ``DegenerateSystemError`` when the null space is not
    one-dimensional (disconnected state graphs).
    """
    return _steady_states(_generator_from_rates(system.rates[None]))[0]


def time_evolve(
    system: RateSystem,
    initial: np.ndarray,
    times: np.ndarray,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> np.ndarray:
    """Integrate dn/dt = G n, returning populations at the given times.

    Explicit adaptive Runge-Kutta with dense output; Runge-Kutta steps
    preserve the linear invariant sum(n) exactly, and the total population
    is checked to 1e-10 at every accepted step.  Serves as the slow oracle
    for :func:`steady_state`.
    """
    n0 = np.asarray(initial, dtype=float)
    n = len(system.state_labels)
    if n0.shape != (n,):
        raise ValueError(f"initial populations must have shape ({n},)")
    if np.any(n0 < 0):
        raise ValueError("initial populations must be non-negative")
    if abs(n0.sum() - 1.0) > 1e-9:
        raise ValueError(f"initial populations must sum to 1, got {n0.sum()!r}")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and non-decreasing")

    scale = float(system.rates.max())
    if scale == 0.0 or times[-1] == 0.0:
        return np.tile(n0, (times.size, 1))

    g_scaled = system.generator() / scale
    tau = times * scale

    solver = RK45(lambda _t, y: g_scaled @ y, 0.0, n0, float(tau[-1]),
                  rtol=rtol, atol=atol)
    out = np.empty((times.size, n))
    filled = 0
    while filled < times.size and tau[filled] <= 0.0:
        out[filled] = n0
        filled += 1
    while solver.status == "running":
        solver.step()
        if solver.status == "failed":
            break
        if abs(solver.y.sum() - 1.0) > 1e-10:
            raise IntegrationError(
                f"population drifted to {solver.y.sum()!r} at t*rate={solver.t}"
            )
        dense = solver.dense_output()
        while filled < times.size and tau[filled] <= solver.t:
            out[filled] = dense(tau[filled])
            filled += 1
    if filled < times.size:
        raise IntegrationError(
            f"integrator stopped at t*rate={solver.t}: step size underflow"
        )
    return out


def _strongest_s1(scheme: LevelScheme) -> str:
    if not scheme.s1_levels:
        return ZPL
    best = max(scheme.s1_levels, key=lambda lev: lev.relative_fc)
    return best.id


def _pump_offsets(
    scheme: LevelScheme,
    target: str,
    axis: np.ndarray,
    axis_kind: str,
    ref_cm1: float | None,
) -> tuple[np.ndarray, float | None]:
    c = WAVENUMBER_TO_GHZ
    if axis_kind == "detuning_ghz":
        if ref_cm1 is None:
            ref_cm1 = 0.0 if target == ZPL else scheme.level(target).wavenumber_cm1
        return ref_cm1 * c + axis, ref_cm1
    if axis_kind == "wavenumber_cm1":
        return axis * c, None
    raise ValueError(f"unknown axis_kind {axis_kind!r}")


def fluorex_spectrum(
    scheme: LevelScheme,
    axis: np.ndarray,
    saturation: float,
    axis_kind: str = "detuning_ghz",
    target: str | None = None,
    ref_cm1: float | None = None,
) -> Spectrum:
    """Fluorescence-excitation spectrum: steady-state n_e versus pump tuning.

    ``axis_kind`` selects the axis frame: ``"detuning_ghz"`` scans around a
    reference line (``target``'s center unless ``ref_cm1`` pins the frame
    explicitly, which fits need when the center itself floats), while
    ``"wavenumber_cm1"`` scans the laser offset above the 00ZPL and can
    cover several lines.  ``target`` defaults to the strongest S1 level,
    falling back to the 00ZPL sentinel for a bare scheme.
    """
    axis = np.asarray(axis, dtype=float)
    if target is None:
        target = _strongest_s1(scheme)
    pump = LaserDrive("pump", target, 0.0, saturation)
    offsets, ref = _pump_offsets(scheme, target, axis, axis_kind, ref_cm1)
    _, rates = _rate_stack(scheme, pump, None, offsets, saturation)
    values = _steady_states(_generator_from_rates(rates))[:, 1]
    metadata = {"sp": float(saturation), "target": target, "axis_kind": axis_kind}
    if ref is not None:
        metadata["ref_cm1"] = float(ref)
    return Spectrum(axis, values,
                    kind="fluorex",
                    axis_unit="GHz" if axis_kind == "detuning_ghz" else "cm-1",
                    value_unit="population",
                    metadata=metadata)


def sted_spectrum(
    scheme: LevelScheme,
    axis: np.ndarray,
    sp: float,
    sd: float,
    pump_target: str | None = None,
    depl_target: str | None = None,
    axis_kind: str = "wavenumber_cm1",
    ref_cm1: float | None = None,
    pump_detuning_ghz: float = 0.0,
) -> Spectrum:
    """Depletion spectrum D versus depletion-laser tuning at fixed pump.

    D = (n_e(S_d=0) - n_e(delta_d, S_d)) / n_e(S_d=0), so D vanishes
    identically at S_d = 0, dips sit at S0 level wavenumbers, and the
    baseline stimulated channel floats the wings above zero.  On a
    ``"wavenumber_cm1"`` axis the value at w is taken with the depletion
    laser red of the 00ZPL by w; ``"detuning_ghz"`` scans around
    ``depl_target`` (or an explicit ``ref_cm1``).
    """
    axis = np.asarray(axis, dtype=float)
    if pump_target is None:
        pump_target = _strongest_s1(scheme)
    pump = LaserDrive("pump", pump_target, 0.0, sp)
    depletion = LaserDrive("depletion", depl_target, 0.0, sd)
    c = WAVENUMBER_TO_GHZ

    center = 0.0 if pump_target == ZPL else scheme.level(pump_target).wavenumber_cm1 * c
    pump_offset = center + pump_detuning_ghz

    if axis_kind == "wavenumber_cm1":
        depl_offsets = -axis * c
        ref = None
    elif axis_kind == "detuning_ghz":
        if ref_cm1 is None:
            if depl_target is None:
                raise ValueError("detuning axis needs depl_target or ref_cm1")
            ref_cm1 = scheme.level(depl_target).wavenumber_cm1
        depl_offsets = -ref_cm1 * c + axis
        ref = ref_cm1
    else:
        raise ValueError(f"unknown axis_kind {axis_kind!r}")

    _, rates = _rate_stack(scheme, pump, depletion, pump_offset, sp,
                           depl_offsets, sd)
    n_e = _steady_states(_generator_from_rates(rates))[:, 1]
    _, rates0 = _rate_stack(scheme, pump, depletion, pump_offset, sp, 0.0, 0.0)
    n_e0 = _steady_states(_generator_from_rates(rates0))[0, 1]
    if n_e0 <= 0.0:
        raise ValueError("depletion factor undefined: pump produces no excitation")
    values = (n_e0 - n_e) / n_e0

    metadata = {"sp": float(sp), "sd": float(sd), "pump_target": pump_target,
                "axis_kind": axis_kind, "n_e0": float(n_e0)}
    if depl_target is not None:
        metadata["depl_target"] = depl_target
    if ref is not None:
        metadata["ref_cm1"] = float(ref)
    if pump_detuning_ghz:
        metadata["pump_detuning_ghz"] = float(pump_detuning_ghz)
    return Spectrum(axis, values,
                    kind="sted",
                    axis_unit="cm-1" if axis_kind == "wavenumber_cm1" else "GHz",
                    value_unit="depletion",
                    metadata=metadata)


def saturation_curve(
    scheme: LevelScheme,
    powers: np.ndarray,
    p_sat: float,
    target: str | None = None,
    detuning_ghz: float = 0.0,
) -> Spectrum:
    """On-resonance n_e versus excitation power, S = P/P_sat per point.

    In the one-way pump regime the result follows S/(1+S); pumping the
    00ZPL sentinel saturates at n_e = 1/2 instead because stimulated
    emission balances absorption.
    """
    powers = np.asarray(powers, dtype=float)
    if np.any(powers <= 0):
        raise ValueError("powers must be positive")
    if not (math.isfinite(p_sat) and p_sat > 0):
        raise ValueError(f"p_sat must be positive, got {p_sat}")
    if target is None:
        target = _strongest_s1(scheme)
    sats = powers / p_sat
    pump = LaserDrive("pump", target, 0.0, float(sats[0]))
    c = WAVENUMBER_TO_GHZ
    center = 0.0 if target == ZPL else scheme.level(target).wavenumber_cm1 * c
    _, rates = _rate_stack(scheme, pump, None, center + detuning_ghz, sats)
    values = _steady_states(_generator_from_rates(rates))[:, 1]
    return Spectrum(powers, values,
                    kind="saturation", axis_unit="power", value_unit="population",
                    metadata={"p_sat": float(p_sat), "target": target,
                              "detuning_ghz": float(detuning_ghz)})


def add_noise(spec: Spectrum, seed: int, dwell_scale: float) -> Spectrum:
    """Replace each value by a Poisson draw with mean value*dwell_scale.

    Deterministic for a given seed.  The result carries value_unit
    ``"counts"`` plus the seed and dwell factor in its metadata so a fit
    can weight points and rescale.
    """
    if not (math.isfinite(dwell_scale) and dwell_scale > 0):
        raise ValueError(f"dwell_scale must be positive, got {dwell_scale}")
    if np.any(spec.values < 0):
        raise ValueError("cannot draw Poisson counts around negative values")
    rng = np.random.default_rng(int(seed))
    counts = rng.poisson(spec.values * dwell_scale).astype(float)
    metadata = dict(spec.metadata)
    metadata.update({"seed": int(seed), "dwell_scale": float(dwell_scale),
                     "base_value_unit": spec.value_unit})
    return Spectrum(spec.axis.copy(), counts, spec.kind, spec.axis_unit,
                    "counts", metadata)
