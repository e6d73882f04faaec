import csv

import pytest
import yaml

from risim.cli import main

SMALL = {
    "scenario": {"k_subcarriers": 64},
    "frame": {"n_azimuth": 4, "n_zenith": 2, "n_total": 16},
    "campaign": {"px_dbw": [-20.0, -8.0], "n_blocks": 2,
                 "schemes": ["ncds"]},
}


def write_cfg(tmp_path, data=SMALL, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def read_csv(path):
    with open(path, newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_run_produces_outputs_and_exit_zero(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "results"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "results.csv")
    assert len(rows) == 2
    assert {r["px_dbw"] for r in rows} == {"-20", "-8"}
    assert (out / "config_frozen.yaml").exists()
    manifest = (out / "manifest.txt").read_text()
    assert "config_sha256" in manifest and "master_seed" in manifest
    first = open(out / "results.csv").readline()
    assert "dBW" in first and "packets/s" in first    # units named up front


def test_px_flag_narrows_sweep(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "narrow"
    assert main(["run", "--config", cfg, "--out", str(out), "--px", "-8"]) == 0
    rows = read_csv(out / "results.csv")
    assert len(rows) == 1 and rows[0]["px_dbw"] == "-8"


def test_unknown_field_exits_two_and_names_path(tmp_path, capsys):
    bad = dict(SMALL)
    bad = {"scenario": {"k_subcarrier": 64}}        # typo on purpose
    cfg = write_cfg(tmp_path, bad)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
    assert "scenario.k_subcarrier" in capsys.readouterr().err


def test_invalid_value_exits_two(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"campaign": {"ris_mode": "nope"}})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
    assert "ris_mode" in capsys.readouterr().err


def test_frozen_config_reruns_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(out1)]) == 0
    frozen = out1 / "config_frozen.yaml"
    assert main(["run", "--config", str(frozen), "--out", str(out2)]) == 0
    assert (out1 / "results.csv").read_bytes() == \
        (out2 / "results.csv").read_bytes()


def test_env_var_output_dir(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path)
    monkeypatch.setenv("RISIM_OUT", str(tmp_path / "envout"))
    monkeypatch.chdir(tmp_path)
    assert main(["run", "--config", cfg]) == 0
    assert (tmp_path / "envout" / "results.csv").exists()


def test_analyze_writes_closed_form_table(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "an"
    assert main(["analyze", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "analysis.csv")
    assert len(rows) == 2
    assert set(rows[0]) == {"P_x_dBW", "rho_ncds_dB", "rho_d_dB", "rho_r_dB",
                            "rho_emp_dB"}
    # closed forms are monotone over the sweep
    assert float(rows[1]["rho_ncds_dB"]) >= float(rows[0]["rho_ncds_dB"])
    assert rows[0]["rho_emp_dB"] == ""


def test_reproduce_table1_exact(tmp_path):
    out = tmp_path / "t1"
    assert main(["reproduce", "--target", "table1", "--out", str(out)]) == 0
    checks = read_csv(out / "table1_expectations.csv")
    assert len(checks) == 5
    assert all(c["pass"] == "True" for c in checks)
    data = read_csv(out / "table1.csv")
    got = {(r["scheme"], r["stage"]): int(r["complex_products"]) for r in data}
    assert got[("rs", "1")] == 0
    assert got[("ncds", "1")] == 2 * 1023 * 64


def test_reproduce_validates_config_before_running(tmp_path):
    assert main(["reproduce", "--target", "fig3", "--out", str(tmp_path),
                 "--set", "campaign.ris_mode=bad"]) == 2


def test_reproduce_rejects_unknown_target(tmp_path):
    with pytest.raises(SystemExit):
        main(["reproduce", "--target", "fig9", "--out", str(tmp_path)])


def test_set_override_applies(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "ov"
    assert main(["run", "--config", cfg, "--out", str(out),
                 "--set", "campaign.seed=99", "--px", "-8"]) == 0
    rows = read_csv(out / "results.csv")
    assert rows[0]["seed"] == "99"


def test_analyze_sweeps_monotone_in_power_antennas_elements(tmp_path):
    # px sweep monotone plus spot checks over B and M via overrides
    base = {"campaign": {"px_dbw": [-20.0, -10.0, 0.0]}}
    cfg = write_cfg(tmp_path, base)
    rho_r_by_m = {}
    rho_by_b = {}
    for m, shape in ((16, "[4,4]"), (64, "[8,8]"), (256, "[16,16]")):
        out = tmp_path / f"m{m}"
        assert main(["analyze", "--config", cfg, "--out", str(out),
                     "--set", f"scenario.ris_shape={shape}"]) == 0
        rows = read_csv(out / "analysis.csv")
        vals = [float(r["rho_ncds_dB"]) for r in rows]
        assert vals == sorted(vals)              # monotone in px
        rho_r_by_m[m] = float(rows[0]["rho_r_dB"])
    assert rho_r_by_m[16] < rho_r_by_m[64] < rho_r_by_m[256]
    for b, shape in ((4, "[2,2]"), (16, "[4,4]")):
        out = tmp_path / f"b{b}"
        assert main(["analyze", "--config", cfg, "--out", str(out),
                     "--set", f"scenario.bs_shape={shape}"]) == 0
        rows = read_csv(out / "analysis.csv")
        rho_by_b[b] = float(rows[0]["rho_d_dB"])
    assert rho_by_b[4] <= rho_by_b[16]
    # hand spot check of the direct-only closed form at -20 dBW
    import numpy as np
    bd, b_ant, px, nv = 10 ** -8.6, 16, 10 ** -2.0, 1e-9
    expect = 1.0 / (1.0 + 2 * nv / (b_ant * bd * px)
                    + nv ** 2 / (b_ant * bd ** 2 * px ** 2))
    assert float(read_csv(tmp_path / "b16" / "analysis.csv")[0]["rho_d_dB"]) \
        == pytest.approx(10 * np.log10(expect), abs=1e-4)
