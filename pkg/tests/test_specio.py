"""Spectrum container and the on-disk formats: CSV spectra, JSON schemes."""

import json
import math

import numpy as np
import pytest

from vibrospec.levels import ElectronicState, LevelScheme, VibronicLevel
from vibrospec.spectrum import Spectrum
from vibrospec.specpipe.io import (
    FormatError,
    modes_from_rows,
    read_modes_csv,
    read_records,
    read_scheme,
    read_spectrum,
    records_from_dict,
    scheme_from_dict,
    scheme_to_dict,
    write_records,
    write_scheme,
    write_spectrum,
    write_sticks,
)
from vibrospec.specpipe.stats import MoleculeRecord, RecordMode


# ---------------------------------------------------------------------------
# Spectrum container


def test_spectrum_validation():
    axis = np.linspace(0.0, 1.0, 5)
    Spectrum(axis, np.ones(5), "fluorex", "GHz", "population")
    with pytest.raises(ValueError, match="kind"):
        Spectrum(axis, np.ones(5), "excitation", "GHz", "population")
    with pytest.raises(ValueError, match="equally long"):
        Spectrum(axis, np.ones(4), "fluorex", "GHz", "population")
    with pytest.raises(ValueError, match="strictly increasing"):
        Spectrum(axis[::-1].copy(), np.ones(5), "fluorex", "GHz", "population")
    with pytest.raises(ValueError, match="finite"):
        Spectrum(axis, np.array([1, 2, np.nan, 4, 5]), "fluorex", "GHz", "population")
    with pytest.raises(ValueError, match="1-d"):
        Spectrum(axis.reshape(1, 5), np.ones(5).reshape(1, 5),
                 "fluorex", "GHz", "population")


def test_spectrum_len():
    spec = Spectrum(np.arange(7.0), np.zeros(7), "fc", "cm-1", "intensity")
    assert len(spec) == 7


# ---------------------------------------------------------------------------
# spectrum CSV


def test_spectrum_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    axis = np.cumsum(rng.uniform(1e-6, 2.0, 200)) - 50.0
    values = rng.normal(0.0, 1e3, 200) * 10.0 ** rng.integers(-12, 12, 200)
    spec = Spectrum(axis, values, "fluorex", "GHz", "counts",
                    {"sp": 0.3, "seed": 7, "target": "v290",
                     "dwell_scale": 12345.678})
    path = tmp_path / "spec.csv"
    write_spectrum(path, spec)
    back = read_spectrum(path)
    # 17 significant digits round-trip every double exactly
    assert np.array_equal(back.axis, spec.axis)
    assert np.array_equal(back.values, spec.values)
    assert back.kind == spec.kind
    assert back.axis_unit == spec.axis_unit
    assert back.value_unit == spec.value_unit
    assert back.metadata == spec.metadata
    assert isinstance(back.metadata["seed"], int)
    assert isinstance(back.metadata["sp"], float)
    assert back.metadata["target"] == "v290"


def test_spectrum_csv_header_shape(tmp_path):
    spec = Spectrum(np.array([1.0, 2.0]), np.array([3.0, 4.0]),
                    "sted", "cm-1", "depletion", {"sd": 10.0})
    path = tmp_path / "s.csv"
    write_spectrum(path, spec)
    first = path.read_text().splitlines()[0]
    assert first.startswith("# kind=sted axis_unit=cm-1 value_unit=depletion")
    assert "sd=10.0" in first


@pytest.mark.parametrize("content, fragment", [
    ("1,2\n", "expected a '# kind=...' header"),
    ("# kind=fluorex axis_unit=GHz\n1,2\n", "misses value_unit"),
    ("# kind=banana axis_unit=GHz value_unit=x\n1,2\n", "unknown kind"),
    ("# kind=fluorex axis_unit=GHz value_unit=x broken\n1,2\n", "malformed header"),
    ("# kind=fluorex axis_unit=GHz value_unit=x\n1,2\n2\n", "line 3: expected axis,value"),
    ("# kind=fluorex axis_unit=GHz value_unit=x\n1,2\n0.5,3\n", "line 3: axis must increase"),
    ("# kind=fluorex axis_unit=GHz value_unit=x\n1,zap\n", "line 2: non-numeric"),
    ("# kind=fluorex axis_unit=GHz value_unit=x\n1,inf\n", "line 2: non-finite"),
    ("# kind=fluorex axis_unit=GHz value_unit=x\n", "no data rows"),
])
def test_spectrum_csv_error_messages(tmp_path, content, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(FormatError, match="bad.csv"):
        try:
            read_spectrum(path)
        except FormatError as exc:
            assert fragment in str(exc)
            raise


def test_write_sticks_format(tmp_path):
    from vibrospec.fcmodel import ModeDisplacement, relative_intensities
    sticks = relative_intensities([ModeDisplacement("v290", 290.25, 0.31)], 2)
    path = tmp_path / "sticks.csv"
    write_sticks(path, sticks, 2)
    lines = path.read_text().splitlines()
    assert lines[0] == "# kind=fc_sticks max_total_quanta=2"
    assert lines[1] == "wavenumber_cm1,intensity,assignment"
    assert lines[2].endswith(",origin")
    assert lines[3].endswith(",v290:1")
    assert lines[4].endswith(",v290:2")


# ---------------------------------------------------------------------------
# scheme JSON


def demo_scheme():
    return LevelScheme(
        zpl_frequency_thz=402.5687, t1_ns=7.0,
        s0_levels=(VibronicLevel("w258", ElectronicState.S0, 258.0, 2.0, 0.8,
                                 "fundamental"),),
        s1_levels=(VibronicLevel("v290", ElectronicState.S1, 290.25, 10.9, 1.0,
                                 "fundamental"),),
        baseline_sideband_cross_section=0.05,
    )


def test_scheme_json_round_trip(tmp_path):
    scheme = demo_scheme()
    path = tmp_path / "scheme.json"
    write_scheme(path, scheme)
    assert read_scheme(path) == scheme


def test_scheme_dict_round_trip():
    scheme = demo_scheme()
    assert scheme_from_dict(scheme_to_dict(scheme)) == scheme


def test_scheme_unknown_key_names_json_path():
    obj = scheme_to_dict(demo_scheme())
    obj["temperature"] = 1.4
    with pytest.raises(FormatError, match=r"scheme\.temperature: unknown key"):
        scheme_from_dict(obj)
    obj = scheme_to_dict(demo_scheme())
    obj["s1_levels"][0]["color"] = "red"
    with pytest.raises(FormatError, match=r"scheme\.s1_levels\[0\]\.color"):
        scheme_from_dict(obj)


def test_scheme_json_type_and_rule_errors():
    obj = scheme_to_dict(demo_scheme())
    obj["t1_ns"] = "seven"
    with pytest.raises(FormatError, match=r"scheme\.t1_ns: expected a number"):
        scheme_from_dict(obj)
    obj = scheme_to_dict(demo_scheme())
    obj["t1_ns"] = True  # bools are not numbers here
    with pytest.raises(FormatError, match="expected a number"):
        scheme_from_dict(obj)
    obj = scheme_to_dict(demo_scheme())
    del obj["zpl_frequency_thz"]
    with pytest.raises(FormatError, match="missing key 'zpl_frequency_thz'"):
        scheme_from_dict(obj)
    obj = scheme_to_dict(demo_scheme())
    obj["s0_levels"][0]["gamma_ghz"] = -2.0
    with pytest.raises(FormatError, match="gamma_ghz must be positive"):
        scheme_from_dict(obj)


def test_read_scheme_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(FormatError, match="invalid JSON"):
        read_scheme(path)


# ---------------------------------------------------------------------------
# molecule records JSON


def two_records():
    return [
        MoleculeRecord("m1",
                       s0_modes=(RecordMode(258.0, 2.0, 1.0, "fundamental"),),
                       s1_modes=(RecordMode(290.0, 10.0, 1.0, "fundamental"),)),
        MoleculeRecord("m2",
                       s1_modes=(RecordMode(290.5, 11.0, 1.0),)),
    ]


def test_records_round_trip(tmp_path):
    path = tmp_path / "records.json"
    write_records(path, two_records())
    assert read_records(path) == two_records()


def test_records_validation_paths():
    with pytest.raises(FormatError, match="'records' list"):
        records_from_dict({"molecules": []})
    obj = {"records": [{"molecule_id": "m1", "s1_modes": [
        {"wavenumber_cm1": 290.0, "gamma_ghz": 10.0, "relative_omega2": 0.5}]}]}
    with pytest.raises(FormatError, match="normalized"):
        records_from_dict(obj)
    obj = {"records": [
        {"molecule_id": "m1", "s1_modes": []},
        {"molecule_id": "m1", "s1_modes": []},
    ]}
    with pytest.raises(FormatError, match="duplicate id 'm1'"):
        records_from_dict(obj)
    obj = {"records": [{"molecule_id": "m1", "s1_modes": [
        {"wavenumber_cm1": -1.0, "gamma_ghz": 10.0, "relative_omega2": 1.0}]}]}
    with pytest.raises(FormatError, match=r"s1_modes\[0\]\.wavenumber_cm1"):
        records_from_dict(obj)
    obj = {"records": [{"molecule_id": "m1", "s1_modes": [
        {"wavenumber_cm1": 290.0, "gamma_ghz": 10.0, "relative_omega2": 1.0,
         "phase": 0.3}]}]}
    with pytest.raises(FormatError, match=r"\.phase: unknown key"):
        records_from_dict(obj)


def test_records_normalization_tolerance():
    # a strongest mode within 1e-9 of unity passes
    obj = {"records": [{"molecule_id": "m1", "s1_modes": [
        {"wavenumber_cm1": 290.0, "gamma_ghz": 10.0,
         "relative_omega2": 1.0 - 1e-10}]}]}
    records = records_from_dict(obj)
    assert len(records) == 1


# ---------------------------------------------------------------------------
# modes CSV


def test_modes_csv_round_trip(tmp_path):
    path = tmp_path / "modes.csv"
    path.write_text(
        "mode_id,wavenumber_cm1,value,value_kind\n"
        "v177,176.5,0.25,alpha\n"
        "v290,290.25,0.0961,intensity\n")
    rows = read_modes_csv(path)
    assert rows == [("v177", 176.5, 0.25, "alpha"),
                    ("v290", 290.25, 0.0961, "intensity")]
    modes = modes_from_rows(rows)
    assert modes[0].alpha == 0.25
    assert math.isclose(modes[1].alpha, 0.31, rel_tol=1e-12)


@pytest.mark.parametrize("content, fragment", [
    ("wavenumber,stuff\n", "expected header"),
    ("mode_id,wavenumber_cm1,value,value_kind\nv1,1.0,0.1\n", "4 columns"),
    ("mode_id,wavenumber_cm1,value,value_kind\n,1.0,0.1,alpha\n", "empty mode_id"),
    ("mode_id,wavenumber_cm1,value,value_kind\nv1,1.0,0.1,alpha\nv1,2.0,0.1,alpha\n",
     "duplicate mode_id"),
    ("mode_id,wavenumber_cm1,value,value_kind\nv1,1.0,0.1,rabi\n", "value_kind"),
    ("mode_id,wavenumber_cm1,value,value_kind\nv1,-1.0,0.1,alpha\n", "positive"),
    ("mode_id,wavenumber_cm1,value,value_kind\nv1,1.0,-0.1,alpha\n", ">= 0"),
    ("mode_id,wavenumber_cm1,value,value_kind\nv1,one,0.1,alpha\n", "non-numeric"),
    ("mode_id,wavenumber_cm1,value,value_kind\n", "no mode rows"),
])
def test_modes_csv_errors(tmp_path, content, fragment):
    path = tmp_path / "modes.csv"
    path.write_text(content)
    with pytest.raises(FormatError) as err:
        read_modes_csv(path)
    assert fragment in str(err.value)


def test_modes_csv_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "modes.csv"
    path.write_text(
        "# computed displacements\n"
        "mode_id,wavenumber_cm1,value,value_kind\n"
        "\n"
        "v1,100.0,0.2,alpha\n")
    assert len(read_modes_csv(path)) == 1


def test_metadata_tokens_reject_unserializable_values(tmp_path):
    spec = Spectrum(np.array([1.0, 2.0]), np.array([0.0, 1.0]),
                    "fluorex", "GHz", "population", {"note": "two words"})
    with pytest.raises(FormatError, match="note"):
        write_spectrum(tmp_path / "x.csv", spec)
