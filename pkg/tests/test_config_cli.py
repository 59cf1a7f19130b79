import json

import pytest

from bbmlab import cli
from bbmlab.config import ConfigError, parse_config, serialize
from bbmlab.runner import EXIT_PASS, EXIT_TOLERANCE, report_json, rows_csv, run_config

MINIMAL = """\
name: tiny
mode: sweep
domain: interval 0 1
field: affine 1 0
p: 2
s_grid: [0.9, 0.95, 0.99]
cells: 32
target_cells: 128
"""


def errcode(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value


def test_minimal_parses():
    cfg = parse_config(MINIMAL)
    assert cfg.name == "tiny" and cfg.p == 2.0 and cfg.s_grid == (0.9, 0.95, 0.99)


def test_error_codes_are_distinct():
    assert errcode(MINIMAL + "colour: red\n").code == "E100"
    assert errcode("mode: sweep\n").code == "E101"
    assert errcode("name: [oops\n").code == "E102"
    assert errcode(MINIMAL.replace("interval 0 1", "blob 0 1")).code == "E200"
    assert errcode(MINIMAL.replace("p: 2", "p: 0.5")).code == "E300"
    assert errcode(MINIMAL.replace("p: 2", "p: two")).code == "E301"


def test_s_value_one_names_s_grid():
    err = errcode(MINIMAL.replace("[0.9, 0.95, 0.99]", "[0.9, 1.0]"))
    assert err.code == "E300" and err.key == "s_grid"


def test_malformed_ball_has_position():
    text = MINIMAL.replace("interval 0 1", "diff (box -1 -1 1 1) (ball 0 0)").replace(
        "affine 1 0", "affine 1 0 0")
    err = errcode(text)
    assert err.code == "E200" and err.key == "domain"
    assert err.position == len("diff (box -1 -1 1 1) (ball 0 0") + 1


def test_dimension_inference():
    from bbmlab.config import resolved_dim

    cfg = parse_config(MINIMAL.replace("interval 0 1", "box 0 0 1 1")
                       .replace("affine 1 0", "bump 0.5 0.5 0.4 1"))
    assert resolved_dim(cfg) == 2
    with pytest.raises(ConfigError):
        resolved_dim(parse_config(MINIMAL.replace("affine 1 0", "affine 1 0 0")))


def test_round_trip_presets():
    for name in cli.preset_names():
        cfg = parse_config(cli.preset_text(name))
        assert parse_config(serialize(cfg)) == cfg


def test_report_is_deterministic():
    cfg = parse_config(MINIMAL)
    a, b = run_config(cfg), run_config(cfg)
    assert rows_csv(a) == rows_csv(b)
    a.pop("timing"), b.pop("timing")
    assert report_json(a) == report_json(b)
    assert a["exit_code"] == EXIT_PASS


def test_run_writes_files(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(MINIMAL)
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path)]) == 0
    header = (tmp_path / "tiny.csv").read_text().splitlines()[0]
    assert header == "s,seminorm,scaled,error,pitch"
    report = json.loads((tmp_path / "tiny.report.json").read_text())
    assert report["schema"] == 1 and report["verdict"] == "convergent"
    assert "wall_clock_s" in report["timing"]


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["presets", "run", "affine_1d", "--out", str(tmp_path)]) == EXIT_PASS
    assert cli.main(["presets", "run", "affine_1d_tight", "--out", str(tmp_path)]) == EXIT_TOLERANCE
    assert cli.main(["presets", "run", "kappa_table", "--out", str(tmp_path)]) == EXIT_PASS
    assert cli.main(["presets", "run", "no_such_preset"]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text(MINIMAL.replace("interval 0 1", "interval 0"))
    assert cli.main(["run", "--config", str(bad)]) == 1
    assert "E200" in capsys.readouterr().err


def test_kappa_command(capsys):
    assert cli.main(["kappa", "--dim", "2", "--p", "1"]) == 0
    assert capsys.readouterr().out.strip() == "0.636619772368"
    assert cli.main(["kappa", "--dim", "3", "--p", "2"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1 / 3, abs=1e-12)


def test_presets_list(capsys):
    assert cli.main(["presets", "list"]) == 0
    out = capsys.readouterr().out
    for name in ("affine_1d", "cusp_divergence", "indicator_disk", "kappa_table"):
        assert name in out
