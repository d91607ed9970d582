import json

import pytest

from lindstedt.cli import main
from lindstedt.series import ConjugationSeries, coefficients_to_csv

from .conftest import data_path


def _run(tmp_path, command, config=None, *extra):
    argv = ["--out", str(tmp_path / "out")]
    if config is not None:
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps(config))
        argv += ["--config", str(cfg)]
    return main(argv + list(extra) + [command])


def test_cf(tmp_path, capsys):
    assert _run(tmp_path, "cf") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rotation"]["cf"][:5] == [1, 1, 1, 1, 1]
    assert float(report["bryuno"]["partial_sums"][20]) == pytest.approx(3.2844975105656646)
    assert (tmp_path / "out" / "cf.json").exists()


def test_series_csv_is_byte_identical(tmp_path, capsys):
    cfg = {"max_order": 6}
    assert _run(tmp_path, "series", cfg) == 0
    first = (tmp_path / "out" / "coefficients.csv").read_bytes()
    assert _run(tmp_path, "series", cfg) == 0
    assert (tmp_path / "out" / "coefficients.csv").read_bytes() == first
    assert (tmp_path / "out" / "H_coefficients.csv").exists()


def test_series_first_order_two_rows(tmp_path):
    assert _run(tmp_path, "series", {"max_order": 1}) == 0
    lines = (tmp_path / "out" / "coefficients.csv").read_text().splitlines()
    assert lines[0] == "k,nu,re,im"
    assert [l.split(",")[:2] for l in lines[1:]] == [["1", "-1"], ["1", "1"]]


def test_residual_and_curve(tmp_path, capsys):
    assert _run(tmp_path, "residual", {"max_order": 3}) == 0
    rep = json.loads(capsys.readouterr().out)
    assert abs(rep["fitted_slope"] - 4) < 0.05
    cfg = {"max_order": 4, "curve": {"eps": 0.01, "grid_size": 8, "steps": 10}}
    assert _run(tmp_path, "curve", cfg) == 0
    rows = (tmp_path / "out" / "curve.csv").read_text().splitlines()
    assert rows[0] == "psi,x,y" and len(rows) == 9


def test_precision_override(tmp_path, capsys):
    assert _run(tmp_path, "cf", None, "--precision-bits", "128") == 0
    assert json.loads(capsys.readouterr().out)["rotation"]["precision_bits"] == 128


@pytest.mark.parametrize("config,extra", [
    ({"rotation": {"value": "0.5", "depth": 5}}, []),
    ({"max_order": 0}, []),
    ({"bogus": 1}, []),
    ({"model": data_path("reality_violation.json")}, []),
    ({"model": data_path("zero_twist.json")}, []),
    (None, ["--jobs", "0"]),
    (None, ["--precision-bits", "16"]),
])
def test_configuration_errors_exit_2(tmp_path, capsys, config, extra):
    assert _run(tmp_path, "series", config, *extra) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path):
    assert main(["--config", str(tmp_path / "nope.json"), "cf"]) == 2


def test_rational_family_member_is_named(tmp_path, capsys):
    cfg = {"study": {"family": [{"periodic_tail": [1], "label": "ok"},
                                {"value": "0.375", "depth": 4, "label": "bad-one"}]}}
    assert _run(tmp_path, "bryuno-study", cfg) == 2
    assert "bad-one" in capsys.readouterr().err


def test_verify_trees_linear_and_general(tmp_path, capsys):
    assert _run(tmp_path, "verify-trees", {"trees": {"max_order": 3, "identity_trials": 50}}) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["pass"] and not rep["general"]
    cfg = {"model": data_path("zdep_model.json"), "quadratic_twist": {"c": 0.5},
           "trees": {"max_order": 2, "identity_trials": 50}}
    assert _run(tmp_path, "verify-trees", cfg) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["pass"] and rep["general"]
    assert (tmp_path / "out" / "verify_trees.csv").exists()


def test_corrupted_coefficients_exit_1(tmp_path, golden, std_map):
    text = coefficients_to_csv(ConjugationSeries.compute(golden, std_map, None, 3))
    lines = text.splitlines()
    k, nu, re, im = lines[3].split(",")
    lines[3] = ",".join([k, nu, re, str(float(im) * 1.001)])
    path = tmp_path / "bad.csv"
    path.write_text("\n".join(lines) + "\n")
    cfg = {"trees": {"max_order": 3, "identity_trials": 20, "coefficients": str(path)}}
    assert _run(tmp_path, "verify-trees", cfg) == 1


def test_small_study_and_radius(tmp_path, capsys):
    cfg = {"max_order": 12, "study": {"family": [{"periodic_tail": [1], "label": "g"},
                                                 {"periodic_tail": [3], "label": "t3"}],
                                      "window": [2, 12]}}
    assert _run(tmp_path, "bryuno-study", cfg) == 0
    assert (tmp_path / "out" / "bryuno_study.csv").read_text().startswith("omega_id,bryuno,bryuno_tail,log_rho_hat")
    capsys.readouterr()
    assert _run(tmp_path, "radius", {"max_order": 12, "radius": {"window": [2, 12]}}) == 0
    assert json.loads(capsys.readouterr().out)["rho_hat"] > 0
