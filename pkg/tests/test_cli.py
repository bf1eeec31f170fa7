"""End-to-end exercises of the command-line interface."""

import json
import math
from pathlib import Path

import pytest

from vibrospec.levels import ElectronicState, LevelScheme, VibronicLevel
from vibrospec.specpipe import io as specio
from vibrospec.specpipe.cli import cli_dispatch


def demo_scheme():
    return LevelScheme(
        zpl_frequency_thz=402.5687, t1_ns=7.0,
        s0_levels=(VibronicLevel("w258", ElectronicState.S0, 258.0,
                                 2.0, 0.8, "fundamental"),),
        s1_levels=(VibronicLevel("v290", ElectronicState.S1, 290.25,
                                 10.9, 1.0, "fundamental"),),
        baseline_sideband_cross_section=0.05,
    )


@pytest.fixture()
def scheme_path(tmp_path):
    path = tmp_path / "scheme.json"
    specio.write_scheme(path, demo_scheme())
    return str(path)


def run(capsys, *argv):
    rc = cli_dispatch(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def last_json(out):
    """Parse the JSON object that ends a command's stdout."""
    start = out.index("{")
    return json.loads(out[start:])


# ---------------------------------------------------------------------------
# convert


def test_convert_roundtrip(capsys):
    rc, out, _ = run(capsys, "convert", "--value", "290", "--from",
                     "wavenumber_cm-1", "--to", "frequency_GHz")
    assert rc == 0
    payload = json.loads(out)
    assert math.isclose(payload["value"], 290 * 29.9792458, rel_tol=1e-12)
    assert payload["unit"] == "frequency_GHz"


def test_convert_lifetime_relation_is_opt_in(capsys):
    rc, _, err = run(capsys, "convert", "--value", "10.9", "--from",
                     "frequency_GHz", "--to", "time_ps")
    assert rc == 2
    assert "error:" in err
    rc, out, _ = run(capsys, "convert", "--value", "10.9", "--from",
                     "frequency_GHz", "--to", "time_ps",
                     "--relation", "lifetime")
    assert rc == 0
    assert math.isclose(json.loads(out)["value"], 1e3 / (2 * math.pi * 10.9),
                        rel_tol=1e-12)


def test_convert_unknown_unit_exits_2(capsys):
    rc, _, err = run(capsys, "convert", "--value", "1", "--from",
                     "furlongs", "--to", "frequency_GHz")
    assert rc == 2 and "error:" in err


# ---------------------------------------------------------------------------
# simulate


def test_simulate_fluorex_writes_spectrum(tmp_path, scheme_path, capsys):
    out_csv = str(tmp_path / "fluorex.csv")
    rc, out, _ = run(capsys, "simulate", "fluorex", "--scheme", scheme_path,
                     "--out", out_csv, "--saturation", "1.0")
    assert rc == 0
    payload = last_json(out)
    assert payload["kind"] == "fluorex"
    assert payload["points"] == 1001
    spec = specio.read_spectrum(out_csv)
    assert spec.kind == "fluorex"
    assert spec.axis_unit == "GHz"
    assert len(spec) == 1001
    # resonant peak of the pumped three-level chain sits near S/(1+S(1+2eps))
    assert 0.49 < spec.values.max() < 0.50


def test_simulate_sted_wavenumber_axis(tmp_path, scheme_path, capsys):
    out_csv = str(tmp_path / "sted.csv")
    rc, out, _ = run(capsys, "simulate", "sted", "--scheme", scheme_path,
                     "--out", out_csv, "--sp", "0.05", "--sd", "50.0",
                     "--points", "401")
    assert rc == 0
    spec = specio.read_spectrum(out_csv)
    assert spec.kind == "sted"
    assert spec.axis_unit == "cm-1"
    assert spec.axis.min() == 256.0 and spec.axis.max() == 260.0
    assert spec.values.max() > 0.5  # deep depletion on resonance


def test_simulate_saturation_log_axis(tmp_path, scheme_path, capsys):
    out_csv = str(tmp_path / "sat.csv")
    rc, _, _ = run(capsys, "simulate", "saturation", "--scheme", scheme_path,
                   "--out", out_csv, "--p-sat", "3.5", "--power-min", "0.1",
                   "--power-max", "100", "--points", "9")
    assert rc == 0
    spec = specio.read_spectrum(out_csv)
    assert spec.kind == "saturation"
    assert spec.axis_unit == "power"
    ratios = spec.axis[1:] / spec.axis[:-1]
    assert math.isclose(ratios.min(), ratios.max(), rel_tol=1e-9)


def test_simulate_noise_is_seed_deterministic(tmp_path, scheme_path, capsys):
    args = ["simulate", "fluorex", "--scheme", scheme_path, "--saturation",
            "0.5", "--noise", "--dwell-scale", "1e4", "--points", "101"]
    paths = [str(tmp_path / f"n{i}.csv") for i in range(3)]
    run(capsys, *args, "--out", paths[0], "--seed", "1")
    run(capsys, *args, "--out", paths[1], "--seed", "1")
    run(capsys, *args, "--out", paths[2], "--seed", "2")
    a, b, c = (Path(p).read_bytes() for p in paths)
    assert a == b
    assert a != c


def test_simulate_bad_axis_exits_2(tmp_path, scheme_path, capsys):
    rc, _, err = run(capsys, "simulate", "fluorex", "--scheme", scheme_path,
                     "--out", str(tmp_path / "x.csv"),
                     "--axis-min", "5", "--axis-max", "-5")
    assert rc == 2 and "axis-min" in err


def test_missing_scheme_file_exits_2(tmp_path, capsys):
    rc, _, err = run(capsys, "simulate", "fluorex", "--scheme",
                     str(tmp_path / "nope.json"), "--out",
                     str(tmp_path / "x.csv"))
    assert rc == 2 and "error:" in err


def test_missing_required_option_exits_2(capsys, scheme_path):
    rc, _, err = run(capsys, "simulate", "fluorex", "--scheme", scheme_path)
    assert rc == 2
    assert "--out" in err


# ---------------------------------------------------------------------------
# config file layering


def test_config_supplies_options_and_flags_win(tmp_path, scheme_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "scheme": scheme_path, "out": str(tmp_path / "from_config.csv"),
        "saturation": 2.0, "points": 11,
    }))
    rc, _, _ = run(capsys, "simulate", "fluorex", "--config", str(cfg))
    assert rc == 0
    spec = specio.read_spectrum(tmp_path / "from_config.csv")
    assert len(spec) == 11
    assert spec.metadata["sp"] == 2.0

    override = str(tmp_path / "override.csv")
    rc, _, _ = run(capsys, "simulate", "fluorex", "--config", str(cfg),
                   "--out", override, "--saturation", "4.0")
    assert rc == 0
    assert specio.read_spectrum(override).metadata["sp"] == 4.0


def test_config_unknown_key_rejected(tmp_path, scheme_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scheme": scheme_path, "out": "x.csv",
                               "saturatoin": 2.0}))
    rc, _, err = run(capsys, "simulate", "fluorex", "--config", str(cfg))
    assert rc == 2
    assert "unknown config keys" in err and "saturatoin" in err


def test_config_must_be_object(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2]")
    rc, _, err = run(capsys, "simulate", "fluorex", "--config", str(cfg))
    assert rc == 2 and "JSON object" in err


# ---------------------------------------------------------------------------
# fit


def test_fit_lorentzian_writes_result_on_convergence(tmp_path, scheme_path,
                                                     capsys):
    data = str(tmp_path / "fluorex.csv")
    run(capsys, "simulate", "fluorex", "--scheme", scheme_path,
        "--out", data, "--saturation", "0.02", "--points", "501")
    result_path = tmp_path / "fit.json"
    plot_path = tmp_path / "fit.png"
    rc, out, _ = run(capsys, "fit", "lorentzian", "--in", data, "--peaks", "1",
                     "--out", str(result_path), "--plot", str(plot_path))
    assert rc == 0
    payload = last_json(out)
    assert payload["converged"] is True
    # at S=0.02 power broadening is ~1%, so the width is close to natural
    assert math.isclose(payload["estimates"]["fwhm1"], 10.9, rel_tol=0.02)
    assert math.isclose(payload["estimates"]["center1"], 0.0, abs_tol=0.1)
    on_disk = json.loads(result_path.read_text())
    assert on_disk == payload
    assert plot_path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_fit_nonconvergence_exits_3_and_writes_nothing(tmp_path, scheme_path,
                                                       capsys):
    data = str(tmp_path / "fluorex.csv")
    run(capsys, "simulate", "fluorex", "--scheme", scheme_path,
        "--out", data, "--saturation", "1.0", "--points", "201")
    result_path = tmp_path / "fit.json"
    rc, out, err = run(capsys, "fit", "lorentzian", "--in", data,
                       "--peaks", "1", "--out", str(result_path),
                       "--max-iter", "1")
    assert rc == 3
    assert "did not converge" in err
    assert last_json(out)["converged"] is False
    assert not result_path.exists()


def test_fit_saturation_roundtrip(tmp_path, scheme_path, capsys):
    data = str(tmp_path / "sat.csv")
    run(capsys, "simulate", "saturation", "--scheme", scheme_path,
        "--out", data, "--p-sat", "3.5", "--power-min", "0.05",
        "--power-max", "200", "--points", "41")
    rc, out, _ = run(capsys, "fit", "saturation", "--in", data)
    assert rc == 0
    payload = last_json(out)
    assert payload["converged"] is True
    # stimulated back-transfer shifts the apparent saturation power by
    # 1/(1 + 2 Gamma_e/Gamma_we); for 10.9 GHz and 7 ns that is ~0.42%
    eps = 1e9 / 7.0 / (2 * math.pi * 10.9e9)
    assert math.isclose(payload["estimates"]["p_sat"], 3.5 / (1 + 2 * eps),
                        rel_tol=1e-6)


def test_fit_ratemodel_recovers_width(tmp_path, scheme_path, capsys):
    data = str(tmp_path / "fluorex.csv")
    run(capsys, "simulate", "fluorex", "--scheme", scheme_path,
        "--out", data, "--saturation", "0.3", "--points", "301")
    rc, out, _ = run(capsys, "fit", "ratemodel", "--in", data,
                     "--scheme", scheme_path,
                     "--free", "s1.v290.gamma_ghz",
                     "--plot", str(tmp_path / "rate.png"))
    assert rc == 0
    payload = last_json(out)
    assert math.isclose(payload["estimates"]["s1.v290.gamma_ghz"], 10.9,
                        rel_tol=1e-6)
    assert (tmp_path / "rate.png").exists()


# ---------------------------------------------------------------------------
# fc predict


def test_fc_predict_outputs(tmp_path, capsys):
    modes_csv = tmp_path / "modes.csv"
    modes_csv.write_text(
        "mode_id,wavenumber_cm1,value,value_kind\n"
        "v290,290.25,0.31,alpha\n"
        "v177,176.5,0.2,alpha\n")
    sticks_path = tmp_path / "sticks.csv"
    spec_path = tmp_path / "fc.csv"
    plot_path = tmp_path / "fc.png"
    rc, out, _ = run(capsys, "fc", "predict", "--modes", str(modes_csv),
                     "--out", str(sticks_path), "--spectrum-out",
                     str(spec_path), "--plot", str(plot_path))
    assert rc == 0
    payload = last_json(out)
    # origin + 2 fundamentals + 2 overtones + 1 combination
    assert payload["n_sticks"] == 6
    assert payload["strongest_wavenumber_cm1"] == 0.0
    lines = sticks_path.read_text().splitlines()
    assert lines[0] == "# kind=fc_sticks max_total_quanta=2"
    assert any(line.endswith(",v290:1") for line in lines)
    spec = specio.read_spectrum(spec_path)
    assert spec.kind == "fc"
    assert plot_path.exists()


def test_fc_predict_bad_modes_csv_exits_2(tmp_path, capsys):
    bad = tmp_path / "modes.csv"
    bad.write_text("mode_id,wavenumber_cm1,value,value_kind\n"
                   "v1,notanumber,0.3,alpha\n")
    rc, _, err = run(capsys, "fc", "predict", "--modes", str(bad),
                     "--out", str(tmp_path / "s.csv"))
    assert rc == 2 and "error:" in err


# ---------------------------------------------------------------------------
# stats modes


def records_file(tmp_path):
    from vibrospec.specpipe.stats import MoleculeRecord, RecordMode
    records = [
        MoleculeRecord("m1", s1_modes=(RecordMode(290.0, 10.0, 1.0),)),
        MoleculeRecord("m2", s1_modes=(RecordMode(290.5, 12.0, 1.0),)),
    ]
    path = tmp_path / "records.json"
    specio.write_records(path, records)
    return str(path)


def test_stats_modes_writes_triple(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc, out, _ = run(capsys, "stats", "modes", "--records",
                     records_file(tmp_path), "--out-prefix", "report")
    assert rc == 0
    assert "S1: mean wavenumber spread" in out
    assert "reference 0.9 cm-1" in out
    payload = last_json(out)
    assert payload["outputs"] == {"csv": "report.csv", "json": "report.json",
                                  "png": "report.png"}
    assert Path("report.csv").exists()
    assert json.loads(Path("report.json").read_text())["summary"][
        "s1_mean_wavenumber_spread_cm1"] == 0.5
    assert Path("report.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_stats_modes_no_plot(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc, out, _ = run(capsys, "stats", "modes", "--records",
                     records_file(tmp_path), "--out-prefix", "quiet",
                     "--no-plot")
    assert rc == 0
    assert "png" not in last_json(out)["outputs"]
    assert not Path("quiet.png").exists()


# ---------------------------------------------------------------------------
# top-level behaviour


def test_help_and_version_exit_0(capsys):
    assert run(capsys, "--help")[0] == 0
    assert run(capsys, "--version")[0] == 0
    assert run(capsys, "fit", "--help")[0] == 0


def test_unknown_command_exits_2(capsys):
    assert run(capsys, "frobnicate")[0] == 2
