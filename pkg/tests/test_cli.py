import json

import pytest

from qndprobe import cli
from qndprobe.cli import RunConfig, main, parse_config, run


def read_csv_rows(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    body = [l.split(",") for l in lines[1:] if not l.startswith("#")]
    footer = [l for l in lines[1:] if l.startswith("#")]
    return header, body, footer


# --------------------------------------------------------------- config parsing

def test_minimal_sweep_config(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"g1": 1e-7, "nl_total": 1e8, "na_min": 1e4,
                                "na_max": 1e6, "na_points": 6}))
    config = parse_config(["sweep", "--config", str(conf), "--g2", "0"])
    assert config.mode == "sweep"
    assert config.g1 == 1e-7
    assert config.na_points == 6


def test_unknown_key_rejected_by_name(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"g3": 1.0}))
    with pytest.raises(ValueError, match="g3"):
        parse_config(["sweep", "--config", str(conf)])


def test_flag_overrides_file_value(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"p": 2}))
    config = parse_config(["sweep", "--config", str(conf), "--p", "5"])
    assert config.p == 5


def test_validation_failures_exit_2(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"na_min": -1.0}))
    assert main(["sweep", "--config", str(conf)]) == 2
    conf.write_text("not json")
    assert main(["sweep", "--config", str(conf)]) == 2


# ------------------------------------------------------------------ run modes

def test_algebra_check_reports_tiny_residuals(tmp_path):
    out = tmp_path / "algebra.csv"
    assert main(["algebra-check", "--out", str(out)]) == 0
    header, body, _ = read_csv_rows(out)
    assert header[0] == "f"
    assert [row[0] for row in body] == ["0.5", "1", "1.5", "2"]
    for row in body:
        assert all(float(x) < 1e-12 for x in row[1:])


def test_oracle_compare_runs(tmp_path):
    out = tmp_path / "oracle.csv"
    code = main(["oracle-compare", "--out", str(out), "--g1", "1e-3", "--g2", "1e-3",
                 "--n-ph", "4", "--oracle-na", "2", "--p", "2"])
    assert code == 0
    _, body, footer = read_csv_rows(out)
    assert len(body) == 4
    assert "max_first_moment_deviation" in footer[0]


def test_sweep_csv_matches_projection_line_for_g2_zero(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--out", str(out), "--g2", "0", "--p", "5"]) == 0
    header, body, footer = read_csv_rows(out)
    i_var = header.index("normalized_meter_var")
    i_line = header.index("projection_line")
    for row in body:
        var, line = float(row[i_var]), float(row[i_line])
        assert abs(var - line) / line < 1e-9
    assert any(line.startswith("# c2") for line in footer)


def test_fixed_seed_runs_are_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["montecarlo", "--seed", "42", "--trials", "5000", "--na", "1e5", "--p", "2"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_manifest_written_with_parameters(tmp_path):
    out = tmp_path / "imp.csv"
    assert main(["impact", "--out", str(out), "--na", "5e5"]) == 0
    manifest = (out.parent / (out.name + ".manifest")).read_text()
    assert "seed = " in manifest
    assert "na = 500000.0" in manifest
    assert "timestamp = " in manifest


def test_suppression_mode(tmp_path):
    out = tmp_path / "sup.csv"
    assert main(["suppression", "--out", str(out), "--p-values", "2,4"]) == 0
    header, body, _ = read_csv_rows(out)
    assert header == ["p", "c2"]
    assert float(body[0][1]) > float(body[1][1]) > 0


def test_non_finite_output_aborts_with_exit_1(tmp_path, monkeypatch):
    def bad_runner(config):
        return ["x"], [[float("nan")]], []

    monkeypatch.setitem(cli._RUNNERS, "impact", bad_runner)
    config = RunConfig(mode="impact", out=str(tmp_path / "bad.csv"))
    assert run(config) == 1
    assert not (tmp_path / "bad.csv").exists()


def test_unwritable_output_path(tmp_path):
    out = tmp_path / "no_such_dir" / "x.csv"
    assert main(["algebra-check", "--out", str(out)]) == 2
