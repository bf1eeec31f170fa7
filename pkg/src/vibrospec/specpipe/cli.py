"""Command-line front end.

Subcommands::

    convert                    unit conversions, including linewidth<->lifetime
    simulate fluorex|sted|saturation
                               steady-state spectra from a level-scheme JSON
    fit lorentzian|saturation|ratemodel
                               least-squares fits to spectrum CSV files
    fc predict                 vibronic stick spectrum from a mode list CSV
    stats modes                cross-molecule mode statistics report

Options may also be supplied through ``--config FILE`` (a flat JSON object
whose keys are the option names with underscores); explicit command-line
flags win over the config file, which wins over built-in defaults.  Unknown
config keys are rejected.

Exit codes: 0 success, 2 bad input (files, formats, arguments), 3 numerical
failure (non-convergent fit or integration).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..fcmodel import QuadratureError, relative_intensities, stick_to_spectrum
from ..fitkit import (RankDeficiencyError, fit_lorentzian_multi, fit_rate_model,
                      fit_saturation, model_values)
from ..levels import LevelScheme
from ..ratesim import (DegenerateSystemError, IntegrationError, add_noise,
                       fluorex_spectrum, saturation_curve, sted_spectrum)
from ..units import Quantity, UnitError, convert, unit_from_name
from . import io as specio
from . import plots
from .stats import format_summary, match_modes, mode_statistics, report_rows, report_to_dict


class CliError(ValueError):
    """Bad command-line input not caught by argparse itself."""


# ---------------------------------------------------------------------------
# option plumbing: defaults / config file / explicit flags

_SUPPRESS = argparse.SUPPRESS

# dest -> default for every option of every terminal command; None marks an
# optional setting with no built-in value, _REQUIRED marks one that must be
# supplied on the command line or through --config.
_REQUIRED = object()

_COMMON_SIM = {
    "scheme": _REQUIRED,
    "out": _REQUIRED,
    "axis_min": None,
    "axis_max": None,
    "points": 1001,
    "noise": False,
    "seed": 0,
    "dwell_scale": 1.0,
    "plot": None,
}

_DEFAULTS: dict[str, dict] = {
    "convert": {"value": _REQUIRED, "from_unit": _REQUIRED, "to_unit": _REQUIRED,
                "relation": None},
    "simulate fluorex": dict(_COMMON_SIM, saturation=0.1, target=None,
                             axis_kind="detuning_ghz"),
    "simulate sted": dict(_COMMON_SIM, sp=0.05, sd=10.0, pump_target=None,
                          depl_target=None, axis_kind="wavenumber_cm1",
                          pump_detuning_ghz=0.0),
    "simulate saturation": dict(_COMMON_SIM, p_sat=_REQUIRED, power_min=_REQUIRED,
                                power_max=_REQUIRED, points=25, target=None,
                                detuning_ghz=0.0, spacing="log"),
    "fit lorentzian": {"in_path": _REQUIRED, "peaks": _REQUIRED, "out": None,
                       "plot": None, "min_prominence": None,
                       "min_separation": 0.0, "max_iter": 200},
    "fit saturation": {"in_path": _REQUIRED, "out": None, "plot": None,
                       "max_iter": 300},
    "fit ratemodel": {"in_path": _REQUIRED, "scheme": _REQUIRED, "free": _REQUIRED,
                      "out": None, "plot": None, "sp": None, "sd": None,
                      "pump_target": None, "depl_target": None, "scale": None,
                      "max_iter": 200},
    "fc predict": {"modes": _REQUIRED, "out": _REQUIRED, "max_quanta": 2,
                   "spectrum_out": None, "broaden_gamma_ghz": 30.0,
                   "axis_min": None, "axis_max": None, "points": 2000,
                   "plot": None},
    "stats modes": {"records": _REQUIRED, "out_prefix": "mode_stats",
                    "window": 2.0, "pair_window": 10.0, "no_plot": False},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibrospec",
        description="Vibronic spectra of single molecules: simulate, fit, report.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    top = parser.add_subparsers(dest="command", required=True)

    def add(sub, *names, **kwargs):
        kwargs.setdefault("default", _SUPPRESS)
        sub.add_argument(*names, **kwargs)

    p = top.add_parser("convert", help="convert a value between units")
    add(p, "--value", type=float)
    add(p, "--from", dest="from_unit", metavar="UNIT")
    add(p, "--to", dest="to_unit", metavar="UNIT")
    add(p, "--relation", choices=["lifetime"],
        help="opt into the linewidth<->lifetime relation")
    add(p, "--config", metavar="FILE")
    p.set_defaults(run=_cmd_convert)

    sim = top.add_parser("simulate", help="simulate spectra from a level scheme")
    simsub = sim.add_subparsers(dest="subcommand", required=True)

    def add_sim_common(p):
        add(p, "--scheme", metavar="FILE", help="level-scheme JSON")
        add(p, "--out", metavar="FILE", help="output spectrum CSV")
        add(p, "--axis-min", type=float)
        add(p, "--axis-max", type=float)
        add(p, "--points", type=int)
        add(p, "--noise", action="store_true",
            help="replace values by Poisson counts")
        add(p, "--seed", type=int)
        add(p, "--dwell-scale", type=float,
            help="counts per unit value when --noise is set")
        add(p, "--plot", metavar="FILE", help="also render a PNG")
        add(p, "--config", metavar="FILE")

    p = simsub.add_parser("fluorex", help="excitation spectrum (pump scan)")
    add_sim_common(p)
    add(p, "--saturation", type=float, help="pump saturation parameter")
    add(p, "--target", help="pumped S1 level id (default: strongest)")
    add(p, "--axis-kind", choices=["detuning_ghz", "wavenumber_cm1"])
    p.set_defaults(run=_cmd_sim_fluorex)

    p = simsub.add_parser("sted", help="depletion spectrum (depletion scan)")
    add_sim_common(p)
    add(p, "--sp", type=float, help="pump saturation parameter")
    add(p, "--sd", type=float, help="depletion saturation parameter")
    add(p, "--pump-target", help="pumped S1 level id (default: strongest)")
    add(p, "--depl-target", help="depleted S0 level id")
    add(p, "--axis-kind", choices=["wavenumber_cm1", "detuning_ghz"])
    add(p, "--pump-detuning-ghz", type=float)
    p.set_defaults(run=_cmd_sim_sted)

    p = simsub.add_parser("saturation", help="excited population versus power")
    add_sim_common(p)
    add(p, "--p-sat", type=float, help="saturation power (axis units)")
    add(p, "--power-min", type=float)
    add(p, "--power-max", type=float)
    add(p, "--spacing", choices=["log", "linear"])
    add(p, "--target", help="pumped level id (default: strongest)")
    add(p, "--detuning-ghz", type=float)
    p.set_defaults(run=_cmd_sim_saturation)

    fit = top.add_parser("fit", help="fit models to spectrum CSV files")
    fitsub = fit.add_subparsers(dest="subcommand", required=True)

    def add_fit_common(p):
        add(p, "--in", dest="in_path", metavar="FILE", help="input spectrum CSV")
        add(p, "--out", metavar="FILE", help="result JSON (written on success)")
        add(p, "--plot", metavar="FILE", help="render data/fit/residual PNG")
        add(p, "--max-iter", type=int)
        add(p, "--config", metavar="FILE")

    p = fitsub.add_parser("lorentzian", help="baseline plus Lorentzian peaks")
    add_fit_common(p)
    add(p, "--peaks", type=int, help="number of peaks")
    add(p, "--min-prominence", type=float)
    add(p, "--min-separation", type=float)
    p.set_defaults(run=_cmd_fit_lorentzian)

    p = fitsub.add_parser("saturation", help="r_inf * S/(1+S) saturation law")
    add_fit_common(p)
    p.set_defaults(run=_cmd_fit_saturation)

    p = fitsub.add_parser("ratemodel", help="steady-state rate model")
    add_fit_common(p)
    add(p, "--scheme", metavar="FILE", help="template level-scheme JSON")
    add(p, "--free", help="comma-separated parameters, e.g. "
        "s1.v290.gamma_ghz,scale")
    add(p, "--sp", type=float)
    add(p, "--sd", type=float)
    add(p, "--pump-target")
    add(p, "--depl-target")
    add(p, "--scale", type=float, help="fixed overall scale")
    p.set_defaults(run=_cmd_fit_ratemodel)

    fc = top.add_parser("fc", help="Franck-Condon stick spectra")
    fcsub = fc.add_subparsers(dest="subcommand", required=True)
    p = fcsub.add_parser("predict", help="sticks from a mode displacement list")
    add(p, "--modes", metavar="FILE", help="mode list CSV")
    add(p, "--out", metavar="FILE", help="output sticks CSV")
    add(p, "--max-quanta", type=int, help="total quanta cap")
    add(p, "--spectrum-out", metavar="FILE",
        help="also write a Lorentzian-broadened spectrum CSV")
    add(p, "--broaden-gamma-ghz", type=float,
        help="FWHM for the broadened spectrum")
    add(p, "--axis-min", type=float)
    add(p, "--axis-max", type=float)
    add(p, "--points", type=int)
    add(p, "--plot", metavar="FILE")
    add(p, "--config", metavar="FILE")
    p.set_defaults(run=_cmd_fc_predict)

    stats = top.add_parser("stats", help="cross-molecule statistics")
    statssub = stats.add_subparsers(dest="subcommand", required=True)
    p = statssub.add_parser("modes", help="match modes across molecules and report")
    add(p, "--records", metavar="FILE", help="molecule records JSON")
    add(p, "--out-prefix", help="prefix for .csv/.json/.png outputs")
    add(p, "--window", type=float, help="matching window in cm^-1")
    add(p, "--pair-window", type=float,
        help="S0/S1 pairing window in cm^-1")
    add(p, "--no-plot", action="store_true", help="skip the PNG figure")
    add(p, "--config", metavar="FILE")
    p.set_defaults(run=_cmd_stats_modes)

    return parser


def _merge_options(ns: argparse.Namespace) -> dict:
    """Layer defaults, then --config values, then explicit flags."""
    command = ns.command
    sub = getattr(ns, "subcommand", None)
    key = command if sub is None else f"{command} {sub}"
    defaults = _DEFAULTS[key]
    explicit = {k: v for k, v in vars(ns).items()
                if k not in ("command", "subcommand", "run", "config")}

    merged = {k: (None if v is _REQUIRED else v) for k, v in defaults.items()}
    required = {k for k, v in defaults.items() if v is _REQUIRED}

    config_path = getattr(ns, "config", None)
    if config_path is not None:
        try:
            obj = json.loads(Path(config_path).read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"{config_path}: invalid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise CliError(f"{config_path}: config must be a JSON object")
        unknown = sorted(set(obj) - set(defaults))
        if unknown:
            raise CliError(f"{config_path}: unknown config keys for "
                           f"'{key}': {', '.join(unknown)}")
        merged.update(obj)

    merged.update(explicit)
    missing = sorted(k for k in required if merged[k] is None)
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise CliError(f"{key}: missing required option(s): {flags}")
    return merged


def _print_json(obj) -> None:
    print(json.dumps(_jsonable(obj), indent=2, sort_keys=True))


def _jsonable(obj):
    """Deterministic JSON payload: arrays to lists, non-finite to null."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _fit_result_dict(result) -> dict:
    return {
        "model": result.model,
        "converged": result.converged,
        "estimates": result.estimates,
        "sigmas": result.sigmas,
        "parameter_order": result.parameter_order,
        "covariance": result.covariance,
        "residual_norm": result.residual_norm,
        "iterations": result.iterations,
        "n_points": result.n_points,
        "message": result.message,
    }


# ---------------------------------------------------------------------------
# command implementations


def _cmd_convert(opts: dict) -> int:
    quantity = Quantity(opts["value"], unit_from_name(opts["from_unit"]))
    out = convert(quantity, unit_from_name(opts["to_unit"]),
                  relation=opts["relation"])
    _print_json({
        "input_value": quantity.value, "input_unit": quantity.unit.value,
        "value": out.value, "unit": out.unit.value,
        "relation": opts["relation"],
    })
    return 0


def _load_scheme(path: str) -> LevelScheme:
    return specio.read_scheme(path)


def _sim_axis(opts: dict, auto_min: float, auto_max: float) -> np.ndarray:
    lo = opts["axis_min"] if opts["axis_min"] is not None else auto_min
    hi = opts["axis_max"] if opts["axis_max"] is not None else auto_max
    n = int(opts["points"])
    if not (lo < hi):
        raise CliError(f"axis-min ({lo}) must be below axis-max ({hi})")
    if n < 2:
        raise CliError("points must be at least 2")
    return np.linspace(lo, hi, n)


def _wavenumber_span(levels, pad_cm1: float = 2.0) -> tuple[float, float]:
    ws = [lev.wavenumber_cm1 for lev in levels]
    return min(ws) - pad_cm1, max(ws) + pad_cm1


def _finish_spectrum(spec, opts: dict) -> int:
    if opts["noise"]:
        spec = add_noise(spec, opts["seed"], opts["dwell_scale"])
    specio.write_spectrum(opts["out"], spec)
    if opts["plot"]:
        plots.plot_spectrum(spec, opts["plot"])
    _print_json({"out": opts["out"], "kind": spec.kind, "points": len(spec),
                 "value_min": float(spec.values.min()),
                 "value_max": float(spec.values.max())})
    return 0


def _cmd_sim_fluorex(opts: dict) -> int:
    scheme = _load_scheme(opts["scheme"])
    if opts["axis_kind"] == "wavenumber_cm1":
        if not scheme.s1_levels:
            raise CliError("scheme has no S1 levels; give --axis-min/--axis-max")
        auto = _wavenumber_span(scheme.s1_levels)
    else:
        auto = (-50.0, 50.0)
    axis = _sim_axis(opts, *auto)
    spec = fluorex_spectrum(scheme, axis, opts["saturation"],
                            axis_kind=opts["axis_kind"], target=opts["target"])
    return _finish_spectrum(spec, opts)


def _cmd_sim_sted(opts: dict) -> int:
    scheme = _load_scheme(opts["scheme"])
    if opts["axis_kind"] == "wavenumber_cm1":
        if not scheme.s0_levels:
            raise CliError("scheme has no S0 levels; give --axis-min/--axis-max")
        auto = _wavenumber_span(scheme.s0_levels)
    else:
        auto = (-50.0, 50.0)
    axis = _sim_axis(opts, *auto)
    spec = sted_spectrum(scheme, axis, opts["sp"], opts["sd"],
                         pump_target=opts["pump_target"],
                         depl_target=opts["depl_target"],
                         axis_kind=opts["axis_kind"],
                         pump_detuning_ghz=opts["pump_detuning_ghz"])
    return _finish_spectrum(spec, opts)


def _cmd_sim_saturation(opts: dict) -> int:
    scheme = _load_scheme(opts["scheme"])
    lo, hi, n = opts["power_min"], opts["power_max"], int(opts["points"])
    if not (0 < lo < hi):
        raise CliError("need 0 < power-min < power-max")
    if n < 2:
        raise CliError("points must be at least 2")
    powers = (np.geomspace(lo, hi, n) if opts["spacing"] == "log"
              else np.linspace(lo, hi, n))
    spec = saturation_curve(scheme, powers, opts["p_sat"],
                            target=opts["target"],
                            detuning_ghz=opts["detuning_ghz"])
    return _finish_spectrum(spec, opts)


def _finish_fit(result, spec, opts: dict, context: dict | None = None) -> int:
    payload = _fit_result_dict(result)
    _print_json(payload)
    if result.converged and opts["out"]:
        Path(opts["out"]).write_text(
            json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    if opts["plot"]:
        params = dict(result.estimates)
        values = model_values(result.model, params, spec, context)
        plots.plot_fit(spec, values, opts["plot"])
    if not result.converged:
        print(f"fit did not converge: {result.message}", file=sys.stderr)
        return 3
    return 0


def _cmd_fit_lorentzian(opts: dict) -> int:
    spec = specio.read_spectrum(opts["in_path"])
    result = fit_lorentzian_multi(
        spec, int(opts["peaks"]),
        min_prominence=opts["min_prominence"],
        min_separation=opts["min_separation"],
        max_iter=opts["max_iter"],
    )
    return _finish_fit(result, spec, opts)


def _cmd_fit_saturation(opts: dict) -> int:
    spec = specio.read_spectrum(opts["in_path"])
    result = fit_saturation(spec, max_iter=opts["max_iter"])
    return _finish_fit(result, spec, opts)


def _cmd_fit_ratemodel(opts: dict) -> int:
    spec = specio.read_spectrum(opts["in_path"])
    scheme = _load_scheme(opts["scheme"])
    free = [name.strip() for name in opts["free"].split(",") if name.strip()]
    if not free:
        raise CliError("--free must name at least one parameter")
    result = fit_rate_model(
        spec, scheme, free,
        sp=opts["sp"], sd=opts["sd"],
        pump_target=opts["pump_target"], depl_target=opts["depl_target"],
        scale=opts["scale"], max_iter=opts["max_iter"],
    )
    context = None
    if opts["plot"]:
        # rebuild the evaluation context the same way the fit did
        md = spec.metadata
        kind = spec.kind
        context = {
            "scheme": scheme, "kind": kind,
            "sp": opts["sp"] if opts["sp"] is not None else float(md["sp"]),
            "sd": (opts["sd"] if opts["sd"] is not None
                   else (float(md["sd"]) if "sd" in md else None)),
            "target": (opts["pump_target"] or md.get("target")
                       or md.get("pump_target")),
            "depl_target": opts["depl_target"] or md.get("depl_target"),
            "axis_kind": md.get("axis_kind", "wavenumber_cm1"),
        }
        if "ref_cm1" in md:
            context["ref_cm1"] = float(md["ref_cm1"])
    return _finish_fit(result, spec, opts, context)


def _cmd_fc_predict(opts: dict) -> int:
    rows = specio.read_modes_csv(opts["modes"])
    modes = specio.modes_from_rows(rows)
    sticks = relative_intensities(modes, max_total_quanta=int(opts["max_quanta"]))
    specio.write_sticks(opts["out"], sticks, int(opts["max_quanta"]))

    spectrum = None
    if opts["spectrum_out"] or opts["plot"]:
        positions = [s.wavenumber_cm1 for s in sticks]
        auto_lo = min(positions) - 20.0
        auto_hi = max(positions) + 20.0
        axis = _sim_axis(opts, auto_lo, auto_hi)
        spectrum = stick_to_spectrum(sticks, opts["broaden_gamma_ghz"], axis)
        if opts["spectrum_out"]:
            specio.write_spectrum(opts["spectrum_out"], spectrum)
    if opts["plot"]:
        plots.plot_sticks(sticks, spectrum, opts["plot"])

    strongest = max(sticks, key=lambda s: s.intensity)
    _print_json({"out": opts["out"], "n_sticks": len(sticks),
                 "spectrum_out": opts["spectrum_out"],
                 "strongest_wavenumber_cm1": strongest.wavenumber_cm1})
    return 0


_STATS_FIELDS = ["mode_label", "state", "molecule_id", "wavenumber_cm1",
                 "wavenumber_dev_cm1", "gamma_ghz", "gamma_dev_ghz",
                 "relative_omega2", "omega2_dev"]


def _cmd_stats_modes(opts: dict) -> int:
    records = specio.read_records(opts["records"])
    matching = match_modes(records, window=opts["window"])
    report = mode_statistics(matching, pair_window=opts["pair_window"])

    prefix = opts["out_prefix"]
    csv_path = f"{prefix}.csv"
    json_path = f"{prefix}.json"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_STATS_FIELDS)
        writer.writeheader()
        for row in report_rows(report):
            writer.writerow({k: ("%.17g" % v if isinstance(v, float) else v)
                             for k, v in row.items()})
    Path(json_path).write_text(
        json.dumps(_jsonable(report_to_dict(report)), indent=2, sort_keys=True) + "\n")
    outputs = {"csv": csv_path, "json": json_path}
    if not opts["no_plot"]:
        outputs["png"] = plots.plot_mode_stats(report, f"{prefix}.png")

    print(format_summary(report))
    _print_json({"outputs": outputs, "n_modes": len(report.modes),
                 "summary": report.summary})
    return 0


# ---------------------------------------------------------------------------
# entry points


def cli_dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        opts = _merge_options(ns)
        return ns.run(opts)
    except SystemExit as exc:  # argparse --help (0) or usage errors (2)
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 2
    except (DegenerateSystemError, RankDeficiencyError, IntegrationError,
            QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (specio.FormatError, UnitError, CliError, ValueError, KeyError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
