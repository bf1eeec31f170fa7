"""Weighted nonlinear least squares for spectra.

A damped Gauss-Newton (Levenberg-Marquardt) core drives every fit: multi-
Lorentzian line fits, forward rate-model fits of excitation and depletion
spectra, and the two-parameter saturation law.  The Jacobian is always
numerical (central differences), bound constraints are enforced by a smooth
sinusoidal reparameterization instead of clipping, and the damping schedule
only ever accepts steps that lower the weighted sum of squares.

Count data weights points by max(sqrt(counts), 1); anything else defaults
to unit weights.  Non-convergence is an outcome, not an exception: the
returned result carries ``converged=False`` and the caller decides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks, peak_widths

from . import ratesim
from .levels import ZPL, LevelScheme
from .spectrum import Spectrum


class RankDeficiencyError(ValueError):
    """The Jacobian does not determine every parameter independently."""


@dataclass
class Parameter:
    """One free parameter: name, starting value, optional box bounds."""

    name: str
    value: float
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"parameter {self.name!r}: initial value must be finite")
        bounded = math.isfinite(self.lower), math.isfinite(self.upper)
        if bounded[0] != bounded[1]:
            raise ValueError(
                f"parameter {self.name!r}: bounds must be both finite or both absent"
            )
        if self.lower >= self.upper:
            raise ValueError(f"parameter {self.name!r}: lower bound must be below upper")
        if bounded[0] and not (self.lower < self.value < self.upper):
            raise ValueError(
                f"parameter {self.name!r}: initial value {self.value} must lie "
                f"strictly inside ({self.lower}, {self.upper})"
            )


@dataclass
class FitProblem:
    """Declarative fit setup consumed by :func:`levenberg_marquardt`.

    ``model`` is either a registered name (``multi_lorentzian``,
    ``saturation``, ``rate_fluorex``, ``rate_sted``) evaluated against
    ``data``, or a callable mapping a parameter dict straight to a residual
    vector (used for bare least-squares problems).  ``weights`` are
    per-point standard deviations; None selects the default weighting.
    ``context`` carries model state such as the template level scheme.
    """

    model: object
    free: list[Parameter]
    fixed: dict = field(default_factory=dict)
    data: Spectrum | None = None
    weights: np.ndarray | None = None
    context: dict = field(default_factory=dict)


@dataclass
class FitResult:
    """Estimates with their uncertainties and fit diagnostics.

    ``residual_norm`` is the L2 norm of the weighted residual vector at the
    solution.  ``covariance`` rows/columns follow ``parameter_order``;
    sigmas are NaN when the covariance could not be formed.
    """

    model: str
    parameter_order: list[str]
    estimates: dict
    sigmas: dict
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    n_points: int
    message: str = ""


def numeric_jacobian(fn, x: np.ndarray, rel_step: float = 1e-6,
                     abs_floor: float = 1e-9) -> np.ndarray:
    """Central-difference Jacobian of a vector function.

    Steps are max(rel_step*|x_i|, abs_floor) per coordinate; halving the
    step must reproduce the result to about 1e-5 relative on smooth models,
    which the tests enforce.
    """
    x = np.asarray(x, dtype=float)
    r0 = np.asarray(fn(x), dtype=float)
    jac = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = max(rel_step * abs(x[i]), abs_floor)
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        jac[:, i] = (np.asarray(fn(xp), float) - np.asarray(fn(xm), float)) / (xp[i] - xm[i])
    return jac


def estimate_uncertainties(
    jacobian: np.ndarray,
    residuals: np.ndarray,
    weights: np.ndarray | None = None,
    names: list[str] | None = None,
    rank_tol: float = 1e-10,
) -> tuple[np.ndarray, np.ndarray]:
    """One-sigma estimates and covariance from the final linearization.

    covariance = s^2 (J^T W J)^-1 with s^2 the weighted sum of squared
    residuals per degree of freedom.  ``weights`` multiply squared
    residuals (1/sigma^2 per point, default 1).  Raises
    ``RankDeficiencyError`` naming the undetermined parameters when the
    weighted Jacobian loses column rank.
    """
    jac = np.asarray(jacobian, dtype=float)
    res = np.asarray(residuals, dtype=float)
    npts, k = jac.shape
    if res.shape != (npts,):
        raise ValueError(f"residuals must have shape ({npts},), got {res.shape}")
    w = np.ones(npts) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (npts,) or np.any(w < 0):
        raise ValueError("weights must be non-negative, one per point")
    if npts <= k:
        raise ValueError(f"{npts} points cannot determine {k} parameters")

    jw = jac * np.sqrt(w)[:, None]
    sv = np.linalg.svd(jw, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= rank_tol * sv[0]:
        _, _, vh = np.linalg.svd(jw)
        null = np.abs(vh[-1])
        offenders = [i for i in range(k) if null[i] >= 0.5 * null.max()]
        labels = [names[i] if names else f"p{i}" for i in offenders]
        raise RankDeficiencyError(
            "Jacobian is rank deficient; parameters not independently "
            "determined: " + ", ".join(labels)
        )
    s2 = float(np.dot(w * res, res)) / (npts - k)
    cov = s2 * np.linalg.inv(jw.T @ jw)
    cov = 0.5 * (cov + cov.T)
    sigmas = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return sigmas, cov


# ---------------------------------------------------------------------------
# bound transform: x = lo + (hi - lo) (sin(theta) + 1)/2 on bounded axes


def _to_internal(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    theta = x.copy()
    bounded = np.isfinite(lo)
    frac = (x[bounded] - lo[bounded]) / (hi[bounded] - lo[bounded])
    theta[bounded] = np.arcsin(np.clip(2.0 * frac - 1.0, -1.0, 1.0))
    return theta


def _to_external(theta: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    x = theta.copy()
    bounded = np.isfinite(lo)
    x[bounded] = lo[bounded] + (hi[bounded] - lo[bounded]) * (np.sin(theta[bounded]) + 1.0) / 2.0
    return x


def _default_sigma(data: Spectrum) -> np.ndarray:
    if data.value_unit == "counts":
        return np.maximum(np.sqrt(np.clip(data.values, 0.0, None)), 1.0)
    return np.ones_like(data.values)


# ---------------------------------------------------------------------------
# model registry


def _multi_lorentzian_values(params: dict, axis: np.ndarray) -> np.ndarray:
    k = sum(1 for name in params if name.startswith("center"))
    values = np.full_like(axis, params["baseline"])
    for i in range(1, k + 1):
        c = params[f"center{i}"]
        fwhm = params[f"fwhm{i}"]
        values += params[f"amp{i}"] / (1.0 + (2.0 * (axis - c) / fwhm) ** 2)
    return values


def _saturation_values(params: dict, axis: np.ndarray) -> np.ndarray:
    s = axis / params["p_sat"]
    return params["r_inf"] * s / (1.0 + s)


def _apply_scheme_updates(scheme: LevelScheme, updates: dict) -> LevelScheme:
    scheme_fields = {}
    level_updates: dict[str, dict] = {}
    for name, value in updates.items():
        parts = name.split(".")
        if len(parts) == 1:
            scheme_fields[name] = value
        elif len(parts) == 3 and parts[0] in ("s0", "s1"):
            level_updates.setdefault(parts[1], {})[parts[2]] = value
        else:
            raise ValueError(f"unknown scheme parameter {name!r}")

    def rebuild(levels):
        out = []
        for lev in levels:
            if lev.id in level_updates:
                out.append(replace(lev, **level_updates.pop(lev.id)))
            else:
                out.append(lev)
        return tuple(out)

    s0 = rebuild(scheme.s0_levels)
    s1 = rebuild(scheme.s1_levels)
    if level_updates:
        raise ValueError(f"unknown level ids in parameters: {sorted(level_updates)}")
    return replace(scheme, s0_levels=s0, s1_levels=s1, **scheme_fields)


def _rate_model_values(params: dict, data: Spectrum, context: dict) -> np.ndarray:
    scale = params.get("scale", 1.0)
    updates = {k: v for k, v in params.items() if k != "scale"}
    scheme = _apply_scheme_updates(context["scheme"], updates)
    if context["kind"] == "fluorex":
        sim = ratesim.fluorex_spectrum(
            scheme, data.axis, context["sp"],
            axis_kind=context["axis_kind"], target=context["target"],
            ref_cm1=context.get("ref_cm1"))
    else:
        sim = ratesim.sted_spectrum(
            scheme, data.axis, context["sp"], context["sd"],
            pump_target=context["target"], depl_target=context.get("depl_target"),
            axis_kind=context["axis_kind"], ref_cm1=context.get("ref_cm1"))
    return scale * sim.values


def model_values(model: str, params: dict, data: Spectrum,
                 context: dict | None = None) -> np.ndarray:
    """Evaluate a registered model on ``data.axis`` (for plots and checks)."""
    if model == "multi_lorentzian":
        return _multi_lorentzian_values(params, data.axis)
    if model == "saturation":
        return _saturation_values(params, data.axis)
    if model in ("rate_fluorex", "rate_sted"):
        return _rate_model_values(params, data, context or {})
    raise ValueError(f"unknown model {model!r}")


def _build_residual(problem: FitProblem):
    names = [p.name for p in problem.free]
    if callable(problem.model):
        fixed = problem.fixed

        def residual(x: np.ndarray) -> np.ndarray:
            params = dict(fixed)
            params.update(zip(names, x))
            return np.asarray(problem.model(params), dtype=float)

        return residual

    data = problem.data
    if data is None:
        raise ValueError(f"model {problem.model!r} needs data to fit")
    sigma = (np.asarray(problem.weights, dtype=float)
             if problem.weights is not None else _default_sigma(data))
    if sigma.shape != data.values.shape or np.any(sigma <= 0):
        raise ValueError("weights must be positive, one per data point")
    model = problem.model
    if model == "multi_lorentzian":
        value_fn = lambda p: _multi_lorentzian_values(p, data.axis)
    elif model == "saturation":
        value_fn = lambda p: _saturation_values(p, data.axis)
    elif model in ("rate_fluorex", "rate_sted"):
        value_fn = lambda p: _rate_model_values(p, data, problem.context)
    else:
        raise ValueError(f"unknown model {problem.model!r}")
    fixed = problem.fixed

    def residual(x: np.ndarray) -> np.ndarray:
        params = dict(fixed)
        params.update(zip(names, x))
        return (value_fn(params) - data.values) / sigma

    return residual


# ---------------------------------------------------------------------------
# Levenberg-Marquardt core


def levenberg_marquardt(
    problem: FitProblem,
    tol_grad: float = 1e-10,
    tol_step: float = 1e-10,
    max_iter: int = 100,
) -> FitResult:
    """Minimize the weighted sum of squared residuals of ``problem``.

    Classic Marquardt damping on the diagonal-scaled normal equations;
    steps are only accepted when they decrease the weighted SSE, so the
    objective is monotone along the iteration.  Hitting ``max_iter``
    returns ``converged=False`` rather than raising.
    """
    if not problem.free:
        raise ValueError("no free parameters")
    names = [p.name for p in problem.free]
    if len(set(names)) != len(names):
        raise ValueError("duplicate parameter names")
    x0 = np.array([p.value for p in problem.free], dtype=float)
    lo = np.array([p.lower for p in problem.free], dtype=float)
    hi = np.array([p.upper for p in problem.free], dtype=float)

    residual_ext = _build_residual(problem)
    fn = lambda theta: residual_ext(_to_external(theta, lo, hi))

    theta = _to_internal(x0, lo, hi)
    r = np.asarray(fn(theta), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("model evaluation failed at the initial point")
    sse = float(r @ r)

    lam = 1e-3
    converged = False
    message = "reached max_iter"
    iterations = 0

    for iterations in range(1, max_iter + 1):
        jac = numeric_jacobian(fn, theta)
        grad = jac.T @ r
        a = jac.T @ jac
        diag = np.diag(a).copy()
        if np.max(np.abs(grad)) <= tol_grad * max(1.0, sse):
            converged = True
            message = "gradient tolerance reached"
            break
        if np.any(diag == 0.0):
            dead = [names[i] for i in np.nonzero(diag == 0.0)[0]]
            if iterations == 1:
                raise ValueError(
                    "singular normal equations at initial point; parameters "
                    "without influence: " + ", ".join(dead)
                )
            diag[diag == 0.0] = diag.max() * 1e-12 + 1e-300

        accepted = False
        best_attempt = math.inf
        for _ in range(60):
            try:
                delta = np.linalg.solve(a + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam = min(lam * 10.0, 1e14)
                continue
            theta_new = theta + delta
            r_new = np.asarray(fn(theta_new), dtype=float)
            sse_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else math.inf
            best_attempt = min(best_attempt, sse_new)
            if sse_new < sse:
                x_old = _to_external(theta, lo, hi)
                x_new = _to_external(theta_new, lo, hi)
                step_ext = np.abs(x_new - x_old)
                theta, r, sse = theta_new, r_new, sse_new
                lam = max(lam * 0.1, 1e-14)
                accepted = True
                if np.all(step_ext <= tol_step * (np.abs(x_new) + tol_step)):
                    converged = True
                    message = "step tolerance reached"
                break
            lam = min(lam * 10.0, 1e14)
            if lam >= 1e14:
                break
        if not accepted:
            # every trial step either matched the current SSE to within a few
            # ulps or made it worse: the objective is flat at working
            # precision around this point, which is as converged as doubles get
            flat = bool(best_attempt - sse <= 64.0 * float(np.finfo(float).eps) * sse)
            small_grad = bool(
                np.max(np.abs(grad)) <= math.sqrt(tol_grad) * max(1.0, sse))
            converged = flat or small_grad
            message = ("objective flat at working precision" if converged
                       else "damping saturated without improvement")
            break
        if converged:
            break

    x = _to_external(theta, lo, hi)
    estimates = dict(zip(names, x.tolist()))

    # Uncertainties come from the Jacobian in external coordinates so the
    # sinusoidal transform does not distort the error bars.
    sigmas = {name: math.nan for name in names}
    cov = np.full((len(names), len(names)), math.nan)
    try:
        jac_ext = _jacobian_external(residual_ext, x, lo, hi)
        sig, cov = estimate_uncertainties(jac_ext, r, names=names)
        sigmas = dict(zip(names, sig.tolist()))
    except (RankDeficiencyError, ValueError, np.linalg.LinAlgError) as exc:
        message += f"; uncertainties unavailable ({exc})"

    return FitResult(
        model=problem.model if isinstance(problem.model, str) else "callable",
        parameter_order=names,
        estimates=estimates,
        sigmas=sigmas,
        covariance=cov,
        residual_norm=math.sqrt(sse),
        iterations=iterations,
        converged=converged,
        n_points=r.size,
        message=message,
    )


def _jacobian_external(residual_ext, x, lo, hi):
    def fn(xq):
        return residual_ext(np.clip(xq, lo, hi))

    # shrink steps that would poke outside the box
    def stepped(i):
        h = max(1e-6 * abs(x[i]), 1e-9)
        if math.isfinite(lo[i]):
            room = 0.4 * min(hi[i] - x[i], x[i] - lo[i])
            h = min(h, room) if room > 0 else 1e-14 * (hi[i] - lo[i])
        return h

    r0 = np.asarray(fn(x), dtype=float)
    jac = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = stepped(i)
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        jac[:, i] = (np.asarray(fn(xp), float) - np.asarray(fn(xm), float)) / (xp[i] - xm[i])
    return jac


# ---------------------------------------------------------------------------
# peak detection


@dataclass(frozen=True)
class DetectedPeak:
    center: float
    height: float
    fwhm: float


def detect_peaks(
    spec: Spectrum,
    min_prominence: float | None = None,
    min_separation: float = 0.0,
    smooth_window: int = 3,
) -> list[DetectedPeak]:
    """Local maxima with prominence and separation filters.

    The trace is smoothed by a short moving average (default 3 points),
    maxima are kept when their prominence over the surrounding baseline
    exceeds ``min_prominence`` (default 5% of the smoothed range) and when
    they are at least ``min_separation`` axis units apart.  The rough width
    is read off at half prominence.
    """
    values = spec.values
    if values.size < 3:
        raise ValueError("need at least 3 points to detect peaks")
    smoothed = uniform_filter1d(values, size=max(1, smooth_window), mode="nearest")
    vrange = float(smoothed.max() - smoothed.min())
    if min_prominence is None:
        min_prominence = 0.05 * vrange
    if vrange == 0.0:
        return []
    step = float(np.median(np.diff(spec.axis)))
    distance = max(1, int(round(min_separation / step))) if min_separation > 0 else 1
    idx, _ = find_peaks(smoothed, prominence=min_prominence, distance=distance)
    if idx.size == 0:
        return []
    widths = peak_widths(smoothed, idx, rel_height=0.5)[0] * step
    return [DetectedPeak(center=float(spec.axis[i]),
                         height=float(values[i]),
                         fwhm=float(w))
            for i, w in zip(idx, widths)]


# ---------------------------------------------------------------------------
# model-specific fronts


def fit_lorentzian_multi(
    spec: Spectrum,
    n_peaks: int,
    init: list[tuple[float, float, float]] | None = None,
    baseline0: float | None = None,
    min_prominence: float | None = None,
    min_separation: float = 0.0,
    tol_grad: float = 1e-12,
    tol_step: float = 1e-12,
    max_iter: int = 200,
) -> FitResult:
    """Fit a constant baseline plus ``n_peaks`` Lorentzian peaks.

    ``init`` holds (center, fwhm, amplitude) triples; when absent,
    :func:`detect_peaks` seeds the fit and must find at least ``n_peaks``
    candidates.  Estimates are keyed baseline, center1, fwhm1, amp1, ...
    in ascending order of the initial centers.
    """
    if n_peaks < 1:
        raise ValueError("n_peaks must be >= 1")
    axis = spec.axis
    span = float(axis[-1] - axis[0])
    step = float(np.median(np.diff(axis)))
    vmin, vmax = float(spec.values.min()), float(spec.values.max())
    vrange = vmax - vmin

    if init is None:
        found = detect_peaks(spec, min_prominence, min_separation)
        if len(found) < n_peaks:
            raise ValueError(f"detected {len(found)} peaks, need {n_peaks}; "
                             "pass init or lower min_prominence")
        found.sort(key=lambda p: p.height, reverse=True)
        chosen = sorted(found[:n_peaks], key=lambda p: p.center)
        init = [(p.center, max(p.fwhm, 2.0 * step), p.height - vmin) for p in chosen]
    elif len(init) != n_peaks:
        raise ValueError(f"init has {len(init)} entries for {n_peaks} peaks")
    else:
        init = sorted(init, key=lambda t: t[0])
    if baseline0 is None:
        baseline0 = vmin

    big = 2.0 * (vrange + abs(vmax) + 1.0)
    params = [Parameter("baseline", float(baseline0), vmin - big, vmax + big)]
    for i, (center, fwhm, amp) in enumerate(init, start=1):
        params.append(Parameter(f"center{i}", float(center),
                                axis[0] - span - 1.0, axis[-1] + span + 1.0))
        params.append(Parameter(f"fwhm{i}", float(min(max(fwhm, 0.5 * step), 5.0 * span)),
                                0.2 * step, 10.0 * span))
        params.append(Parameter(f"amp{i}", float(np.clip(amp, -0.9 * big, 0.9 * big)),
                                -big, big))
    problem = FitProblem(model="multi_lorentzian", free=params, data=spec)
    return levenberg_marquardt(problem, tol_grad, tol_step, max_iter)


def fit_saturation(
    spec: Spectrum,
    tol_grad: float = 1e-14,
    tol_step: float = 1e-14,
    max_iter: int = 300,
) -> FitResult:
    """Fit r_inf * S/(1+S) with S = P/p_sat to a rate-versus-power curve."""
    powers, values = spec.axis, spec.values
    if powers.size < 3:
        raise ValueError("need at least 3 powers to fit the saturation law")
    if np.any(powers <= 0):
        raise ValueError("powers must be positive")
    vmax = float(values.max())
    if vmax <= 0:
        raise ValueError("rates must contain positive values")

    i_half = int(np.argmin(np.abs(values - 0.5 * vmax)))
    p0 = float(np.clip(powers[i_half], powers[0], powers[-1]))
    r0 = float(values[-1] * (1.0 + p0 / powers[-1]))
    lo_p, hi_p = powers[0] * 1e-4, powers[-1] * 1e4
    lo_r, hi_r = vmax * 1e-3, vmax * 1e4
    problem = FitProblem(
        model="saturation",
        free=[Parameter("r_inf", float(np.clip(r0, 1.01 * lo_r, 0.99 * hi_r)), lo_r, hi_r),
              Parameter("p_sat", float(np.clip(p0, 1.01 * lo_p, 0.99 * hi_p)), lo_p, hi_p)],
        data=spec,
    )
    return levenberg_marquardt(problem, tol_grad, tol_step, max_iter)


_SCHEME_SCALARS = ("t1_ns", "zpl_frequency_thz", "baseline_sideband_cross_section")
_LEVEL_FIELDS = ("wavenumber_cm1", "gamma_ghz", "relative_fc")


def _rate_parameter(scheme: LevelScheme, name: str, axis_span_cm1: float) -> Parameter:
    """Initial value and default bounds for one rate-model parameter."""
    parts = name.split(".")
    if len(parts) == 1:
        if name not in _SCHEME_SCALARS:
            raise ValueError(f"unknown scheme parameter {name!r}")
        value = getattr(scheme, name)
        if name == "baseline_sideband_cross_section":
            return Parameter(name, value, 0.0, max(1.0, 100.0 * value + 1.0))
        return Parameter(name, value, value / 100.0, value * 100.0)
    if len(parts) != 3 or parts[0] not in ("s0", "s1") or parts[2] not in _LEVEL_FIELDS:
        raise ValueError(f"unknown rate-model parameter {name!r}")
    levels = scheme.s0_levels if parts[0] == "s0" else scheme.s1_levels
    match = [lev for lev in levels if lev.id == parts[1]]
    if not match:
        raise ValueError(f"no {parts[0]} level with id {parts[1]!r} in the template")
    lev = match[0]
    if parts[2] == "wavenumber_cm1":
        w = lev.wavenumber_cm1
        halfwidth = max(axis_span_cm1, 1.0)
        return Parameter(name, w, max(w - halfwidth, 0.01 * w), w + halfwidth)
    if parts[2] == "gamma_ghz":
        return Parameter(name, lev.gamma_ghz, lev.gamma_ghz / 100.0, lev.gamma_ghz * 100.0)
    return Parameter(name, lev.relative_fc, 1e-9, 1.0)


def fit_rate_model(
    spec: Spectrum,
    scheme: LevelScheme,
    free: list[str],
    sp: float | None = None,
    sd: float | None = None,
    pump_target: str | None = None,
    depl_target: str | None = None,
    scale: float | None = None,
    tol_grad: float = 1e-12,
    tol_step: float = 1e-12,
    max_iter: int = 200,
) -> FitResult:
    """Fit the forward rate model to an excitation or depletion spectrum.

    ``free`` names the floating quantities: level fields as
    ``s1.<id>.gamma_ghz`` / ``s0.<id>.wavenumber_cm1`` /
    ``...relative_fc``, scheme scalars like
    ``baseline_sideband_cross_section`` or ``t1_ns``, and ``scale`` for the
    overall count-rate factor.  Everything else is pinned at the template's
    values.  Drive settings default to the spectrum's recorded metadata.
    Detuning axes keep the frequency frame the spectrum was recorded in
    (metadata ``ref_cm1``), so a floating center moves the line across it.
    """
    md = spec.metadata
    if spec.kind == "fluorex":
        kind = "fluorex"
        sp = float(md["sp"]) if sp is None else float(sp)
        target = pump_target if pump_target is not None else md.get("target")
    elif spec.kind == "sted":
        kind = "sted"
        sp = float(md["sp"]) if sp is None else float(sp)
        sd = float(md["sd"]) if sd is None else float(sd)
        target = pump_target if pump_target is not None else md.get("pump_target")
        if depl_target is None:
            depl_target = md.get("depl_target")
    else:
        raise ValueError(f"rate model fits fluorex or sted spectra, not {spec.kind!r}")
    if target is None:
        raise ValueError("pump target unknown: pass pump_target or record it in metadata")
    if target != ZPL and target not in {lev.id for lev in scheme.s1_levels}:
        raise ValueError(f"pump target {target!r} is not an S1 level of the template")

    axis_kind = md.get("axis_kind") or (
        "detuning_ghz" if spec.axis_unit.lower() == "ghz" else "wavenumber_cm1")
    context = {"scheme": scheme, "kind": kind, "sp": sp, "sd": sd,
               "target": target, "depl_target": depl_target,
               "axis_kind": axis_kind}
    if axis_kind == "detuning_ghz":
        if "ref_cm1" not in md:
            raise ValueError("detuning-axis spectra need ref_cm1 metadata to fit")
        context["ref_cm1"] = float(md["ref_cm1"])

    span = float(spec.axis[-1] - spec.axis[0])
    span_cm1 = span / 29.9792458 if axis_kind == "detuning_ghz" else span

    if not free:
        raise ValueError("no free parameters")
    params: list[Parameter] = []
    fixed: dict = {}
    want_scale = "scale" in free
    for name in free:
        if name == "scale":
            continue
        params.append(_rate_parameter(scheme, name, span_cm1))

    if scale is None:
        if want_scale:
            base = _rate_model_values({"scale": 1.0}, spec, context)
            peak = float(np.max(np.abs(base)))
            scale0 = float(np.max(np.abs(spec.values)) / peak) if peak > 0 else 1.0
            if scale0 <= 0:
                scale0 = 1.0
        else:
            scale0 = 1.0
    else:
        scale0 = float(scale)
    if want_scale:
        params.append(Parameter("scale", scale0, scale0 * 1e-4, scale0 * 1e4))
    else:
        fixed["scale"] = scale0

    problem = FitProblem(model=f"rate_{kind}", free=params, fixed=fixed,
                         data=spec, context=context)
    return levenberg_marquardt(problem, tol_grad, tol_step, max_iter)
