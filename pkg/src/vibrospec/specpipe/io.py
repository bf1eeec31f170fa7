"""File formats: spectrum CSV, level-scheme JSON, records JSON, modes CSV.

Spectra travel as CSV with a single comment header carrying the kind, the
units, and any metadata key=value pairs, followed by axis,value rows
written with 17 significant digits so every float round-trips exactly:

    # kind=fluorex axis_unit=GHz value_unit=population sp=1.0 target=00zpl
    -50.000000000000000,0.0039840637450199202
    ...

Schemes and molecule records are strict JSON: unknown keys are rejected
and every diagnostic names the JSON path it refers to.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..fcmodel import ModeDisplacement, alpha_from_intensity_ratio
from ..levels import ElectronicState, LevelScheme, VibronicLevel, validate_scheme
from ..spectrum import SPECTRUM_KINDS, Spectrum
from .stats import MoleculeRecord, RecordMode


class FormatError(ValueError):
    """A file does not follow its declared format."""


# ---------------------------------------------------------------------------
# spectrum CSV


def _format_metadata_token(key: str, value) -> str:
    text = repr(value) if isinstance(value, float) else str(value)
    if any(ch.isspace() for ch in key + text) or "=" in key:
        raise FormatError(f"metadata entry {key}={text!r} cannot be serialized")
    return f"{key}={text}"


def _parse_metadata_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def write_spectrum(path: str | Path, spec: Spectrum) -> None:
    tokens = [f"kind={spec.kind}", f"axis_unit={spec.axis_unit}",
              f"value_unit={spec.value_unit}"]
    for key in sorted(spec.metadata):
        tokens.append(_format_metadata_token(key, spec.metadata[key]))
    lines = ["# " + " ".join(tokens)]
    for a, v in zip(spec.axis, spec.values):
        lines.append(f"{a:.17g},{v:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_spectrum(path: str | Path) -> Spectrum:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise FormatError(f"{path}: line 1: expected a '# kind=...' header")
    fields: dict[str, object] = {}
    for token in lines[0][2:].split():
        if "=" not in token:
            raise FormatError(f"{path}: line 1: malformed header token {token!r}")
        key, _, value = token.partition("=")
        fields[key] = _parse_metadata_value(value)
    for required in ("kind", "axis_unit", "value_unit"):
        if required not in fields:
            raise FormatError(f"{path}: line 1: header misses {required}")
    kind = str(fields.pop("kind"))
    if kind not in SPECTRUM_KINDS:
        raise FormatError(f"{path}: line 1: unknown kind {kind!r}")
    axis_unit = str(fields.pop("axis_unit"))
    value_unit = str(fields.pop("value_unit"))

    axis, values = [], []
    previous = -math.inf
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise FormatError(f"{path}: line {lineno}: expected axis,value")
        try:
            a, v = float(cells[0]), float(cells[1])
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: non-numeric cell") from None
        if not (math.isfinite(a) and math.isfinite(v)):
            raise FormatError(f"{path}: line {lineno}: non-finite value")
        if a <= previous:
            raise FormatError(f"{path}: line {lineno}: axis must increase strictly")
        previous = a
        axis.append(a)
        values.append(v)
    if not axis:
        raise FormatError(f"{path}: no data rows")
    return Spectrum(np.array(axis), np.array(values), kind, axis_unit,
                    value_unit, fields)


# ---------------------------------------------------------------------------
# scheme JSON


_LEVEL_KEYS = {"id", "wavenumber_cm1", "gamma_ghz", "relative_fc", "kind"}
_SCHEME_KEYS = {"zpl_frequency_thz", "t1_ns", "baseline_sideband_cross_section",
                "s0_levels", "s1_levels"}


def _require_number(obj, path: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise FormatError(f"{path}: expected a number, got {obj!r}")
    return float(obj)


def _parse_level(obj, path: str, state: ElectronicState) -> VibronicLevel:
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: expected an object")
    unknown = set(obj) - _LEVEL_KEYS
    if unknown:
        raise FormatError(f"{path}.{sorted(unknown)[0]}: unknown key")
    for required in ("id", "wavenumber_cm1", "gamma_ghz", "relative_fc"):
        if required not in obj:
            raise FormatError(f"{path}: missing key {required!r}")
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise FormatError(f"{path}.id: expected a non-empty string")
    kind = obj.get("kind", "unassigned")
    if not isinstance(kind, str):
        raise FormatError(f"{path}.kind: expected a string")
    return VibronicLevel(
        id=obj["id"],
        state=state,
        wavenumber_cm1=_require_number(obj["wavenumber_cm1"], f"{path}.wavenumber_cm1"),
        gamma_ghz=_require_number(obj["gamma_ghz"], f"{path}.gamma_ghz"),
        relative_fc=_require_number(obj["relative_fc"], f"{path}.relative_fc"),
        kind=kind,
    )


def scheme_to_dict(scheme: LevelScheme) -> dict:
    def level_obj(lev: VibronicLevel) -> dict:
        return {"id": lev.id, "wavenumber_cm1": lev.wavenumber_cm1,
                "gamma_ghz": lev.gamma_ghz, "relative_fc": lev.relative_fc,
                "kind": lev.kind}

    return {
        "zpl_frequency_thz": scheme.zpl_frequency_thz,
        "t1_ns": scheme.t1_ns,
        "baseline_sideband_cross_section": scheme.baseline_sideband_cross_section,
        "s0_levels": [level_obj(lev) for lev in scheme.s0_levels],
        "s1_levels": [level_obj(lev) for lev in scheme.s1_levels],
    }


def write_scheme(path: str | Path, scheme: LevelScheme) -> None:
    Path(path).write_text(json.dumps(scheme_to_dict(scheme), indent=2,
                                     sort_keys=True) + "\n")


def scheme_from_dict(obj: dict, origin: str = "scheme") -> LevelScheme:
    if not isinstance(obj, dict):
        raise FormatError(f"{origin}: expected a JSON object")
    unknown = set(obj) - _SCHEME_KEYS
    if unknown:
        raise FormatError(f"{origin}.{sorted(unknown)[0]}: unknown key")
    for required in ("zpl_frequency_thz", "t1_ns"):
        if required not in obj:
            raise FormatError(f"{origin}: missing key {required!r}")
    levels = {}
    for field, state in (("s0_levels", ElectronicState.S0),
                         ("s1_levels", ElectronicState.S1)):
        raw = obj.get(field, [])
        if not isinstance(raw, list):
            raise FormatError(f"{origin}.{field}: expected a list")
        levels[field] = tuple(
            _parse_level(item, f"{origin}.{field}[{i}]", state)
            for i, item in enumerate(raw)
        )
    scheme = LevelScheme(
        zpl_frequency_thz=_require_number(obj["zpl_frequency_thz"],
                                          f"{origin}.zpl_frequency_thz"),
        t1_ns=_require_number(obj["t1_ns"], f"{origin}.t1_ns"),
        s0_levels=levels["s0_levels"],
        s1_levels=levels["s1_levels"],
        baseline_sideband_cross_section=_require_number(
            obj.get("baseline_sideband_cross_section", 0.0),
            f"{origin}.baseline_sideband_cross_section"),
    )
    problems = validate_scheme(scheme)
    if problems:
        raise FormatError(f"{origin}: " + "; ".join(problems))
    return scheme


def read_scheme(path: str | Path) -> LevelScheme:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from None
    return scheme_from_dict(obj, origin=str(path))


# ---------------------------------------------------------------------------
# molecule records JSON


_RECORD_KEYS = {"molecule_id", "s0_modes", "s1_modes"}
_MODE_KEYS = {"wavenumber_cm1", "gamma_ghz", "relative_omega2", "kind"}


def _parse_record_mode(obj, path: str) -> RecordMode:
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: expected an object")
    unknown = set(obj) - _MODE_KEYS
    if unknown:
        raise FormatError(f"{path}.{sorted(unknown)[0]}: unknown key")
    for required in ("wavenumber_cm1", "gamma_ghz", "relative_omega2"):
        if required not in obj:
            raise FormatError(f"{path}: missing key {required!r}")
    w = _require_number(obj["wavenumber_cm1"], f"{path}.wavenumber_cm1")
    g = _require_number(obj["gamma_ghz"], f"{path}.gamma_ghz")
    o = _require_number(obj["relative_omega2"], f"{path}.relative_omega2")
    if w <= 0:
        raise FormatError(f"{path}.wavenumber_cm1: must be positive, got {w}")
    if g <= 0:
        raise FormatError(f"{path}.gamma_ghz: must be positive, got {g}")
    if not (0.0 < o <= 1.0):
        raise FormatError(f"{path}.relative_omega2: must lie in (0, 1], got {o}")
    kind = obj.get("kind", "unassigned")
    if not isinstance(kind, str):
        raise FormatError(f"{path}.kind: expected a string")
    return RecordMode(w, g, o, kind)


def records_from_dict(obj: dict, origin: str = "records") -> list[MoleculeRecord]:
    if not isinstance(obj, dict) or "records" not in obj:
        raise FormatError(f"{origin}: expected an object with a 'records' list")
    unknown = set(obj) - {"records"}
    if unknown:
        raise FormatError(f"{origin}.{sorted(unknown)[0]}: unknown key")
    raw = obj["records"]
    if not isinstance(raw, list):
        raise FormatError(f"{origin}.records: expected a list")
    records = []
    seen_ids = set()
    for i, item in enumerate(raw):
        path = f"{origin}.records[{i}]"
        if not isinstance(item, dict):
            raise FormatError(f"{path}: expected an object")
        unknown = set(item) - _RECORD_KEYS
        if unknown:
            raise FormatError(f"{path}.{sorted(unknown)[0]}: unknown key")
        mol = item.get("molecule_id")
        if not isinstance(mol, str) or not mol:
            raise FormatError(f"{path}.molecule_id: expected a non-empty string")
        if mol in seen_ids:
            raise FormatError(f"{path}.molecule_id: duplicate id {mol!r}")
        seen_ids.add(mol)
        modes = {}
        for fieldname in ("s0_modes", "s1_modes"):
            raw_modes = item.get(fieldname, [])
            if not isinstance(raw_modes, list):
                raise FormatError(f"{path}.{fieldname}: expected a list")
            parsed = tuple(_parse_record_mode(m, f"{path}.{fieldname}[{j}]")
                           for j, m in enumerate(raw_modes))
            if parsed:
                peak = max(m.relative_omega2 for m in parsed)
                if abs(peak - 1.0) > 1e-9:
                    raise FormatError(
                        f"{path}.{fieldname}: relative_omega2 must be normalized "
                        f"so its maximum is 1, found {peak}"
                    )
            modes[fieldname] = parsed
        records.append(MoleculeRecord(mol, modes["s0_modes"], modes["s1_modes"]))
    return records


def read_records(path: str | Path) -> list[MoleculeRecord]:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from None
    return records_from_dict(obj, origin=str(path))


def write_records(path: str | Path, records: list[MoleculeRecord]) -> None:
    obj = {"records": [
        {"molecule_id": rec.molecule_id,
         "s0_modes": [{"wavenumber_cm1": m.wavenumber_cm1, "gamma_ghz": m.gamma_ghz,
                       "relative_omega2": m.relative_omega2, "kind": m.kind}
                      for m in rec.s0_modes],
         "s1_modes": [{"wavenumber_cm1": m.wavenumber_cm1, "gamma_ghz": m.gamma_ghz,
                       "relative_omega2": m.relative_omega2, "kind": m.kind}
                      for m in rec.s1_modes]}
        for rec in records
    ]}
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# mode list CSV (external vibrational analyses)


_MODES_HEADER = "mode_id,wavenumber_cm1,value,value_kind"


def read_modes_csv(path: str | Path) -> list[tuple[str, float, float, str]]:
    """Rows of (mode_id, wavenumber_cm1, value, value_kind).

    ``value_kind`` is ``"alpha"`` (dimensionless displacement) or
    ``"intensity"`` (relative squared Rabi frequency); the flag decides how
    :func:`modes_from_rows` interprets the value column.
    """
    lines = [ln for ln in Path(path).read_text().splitlines()
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0].strip() != _MODES_HEADER:
        raise FormatError(f"{path}: line 1: expected header {_MODES_HEADER!r}")
    rows = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 4:
            raise FormatError(f"{path}: line {lineno}: expected 4 columns")
        mode_id, w_text, v_text, kind = cells
        if not mode_id:
            raise FormatError(f"{path}: line {lineno}: empty mode_id")
        if mode_id in seen:
            raise FormatError(f"{path}: line {lineno}: duplicate mode_id {mode_id!r}")
        seen.add(mode_id)
        if kind not in ("alpha", "intensity"):
            raise FormatError(
                f"{path}: line {lineno}: value_kind must be alpha or intensity"
            )
        try:
            w, v = float(w_text), float(v_text)
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: non-numeric cell") from None
        if w <= 0:
            raise FormatError(f"{path}: line {lineno}: wavenumber must be positive")
        if v < 0:
            raise FormatError(f"{path}: line {lineno}: value must be >= 0")
        rows.append((mode_id, w, v, kind))
    if not rows:
        raise FormatError(f"{path}: no mode rows")
    return rows


def write_sticks(path: str | Path, sticks, max_total_quanta: int | None = None) -> None:
    """Write a stick list as CSV: wavenumber, intensity, quanta assignment.

    Assignments are ``mode:quanta`` pairs joined by ``+`` (``origin`` for
    the zero-quanta line), e.g. ``v177:1+v290:1``.
    """
    header = "# kind=fc_sticks"
    if max_total_quanta is not None:
        header += f" max_total_quanta={int(max_total_quanta)}"
    lines = [header, "wavenumber_cm1,intensity,assignment"]
    for stick in sticks:
        assignment = "+".join(f"{mid}:{q}" for mid, q in sorted(stick.quanta.items()))
        lines.append("%.17g,%.17g,%s" % (stick.wavenumber_cm1, stick.intensity,
                                         assignment or "origin"))
    Path(path).write_text("\n".join(lines) + "\n")


def modes_from_rows(rows: list[tuple[str, float, float, str]]) -> list[ModeDisplacement]:
    """Interpret mode rows as displacements.

    ``alpha`` rows pass through; ``intensity`` rows are treated as relative
    squared Rabi frequencies and mapped through the square-root
    convention of :func:`..fcmodel.alpha_from_intensity_ratio`.
    """
    out = []
    for mode_id, w, v, kind in rows:
        alpha = v if kind == "alpha" else alpha_from_intensity_ratio(v)
        out.append(ModeDisplacement(mode_id, w, alpha))
    return out
