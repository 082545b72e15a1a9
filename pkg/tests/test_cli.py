import csv
import json

import jsonschema
import numpy as np
import pytest

from casimir_cac import __version__
from casimir_cac.cli import build_parser, load_config, main
from casimir_cac.config import RunConfig, contour_from_record


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


SMALL = {"geometry": {"builder": "piston"}, "contours": [{"kind": "wick"}], "resolutions": [8]}


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(jsonschema.ValidationError):
        RunConfig.from_dict({"geometry": {"builder": "piston"}, "colour": "red"})
    with pytest.raises(jsonschema.ValidationError):
        RunConfig.from_dict({"quadrature": {"nodes": 3}})
    assert main(["force", "--config", _write(tmp_path, {"bogus": 1})]) == 3


def test_schema_type_checks():
    with pytest.raises(jsonschema.ValidationError):
        RunConfig.from_dict({"resolutions": [4]})
    with pytest.raises(jsonschema.ValidationError):
        RunConfig.from_dict({"contours": [{"kind": "conductive", "sigma": -1}]})
    with pytest.raises(jsonschema.ValidationError):
        RunConfig.from_dict({"resolutions": [16, 32, 64]})


def test_hash_ignores_output_and_jobs():
    a = RunConfig.from_dict(SMALL)
    b = a.override(out="elsewhere", jobs=4)
    c = a.override(resolutions=[16])
    assert a.sha256() == b.sha256() != c.sha256()
    assert a.header().startswith(f"casimir_cac {__version__} config_sha256=")


def test_jobs_precedence(tmp_path, monkeypatch):
    parse = build_parser().parse_args
    monkeypatch.setenv("CASIMIR_CAC_JOBS", "3")
    assert load_config(parse(["force"]))["jobs"] == 3
    assert load_config(parse(["force", "--jobs", "2"]))["jobs"] == 2
    path = _write(tmp_path, dict(SMALL, jobs=1))
    assert load_config(parse(["force", "--config", path]))["jobs"] == 1
    cfg = load_config(parse(["force", "--resolution", "16,32", "--out", "x"]))
    assert cfg["resolutions"] == [16, 32] and cfg["out"] == "x"


def test_contour_records():
    assert contour_from_record({"kind": "wick"}).kind == "wick"
    assert contour_from_record({"kind": "conductive", "sigma": 3}).sigma == 3
    fl = contour_from_record({"kind": "fluid", "d_m": 0.3})
    assert np.isclose(fl.material(1.0).imag, 565.0954701173705, rtol=1e-9)
    assert contour_from_record({"kind": "fluid_tabulated"}).kind == "material"
    with pytest.raises(ValueError):
        contour_from_record({"kind": "conductive"})


def test_force_outputs_and_determinism(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["force", "--config", cfg, "--out", str(tmp_path / "a"), "--jobs", "1"]) == 0
    assert main(["force", "--config", cfg, "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["force_summary.json", "force_wick_r8.json", "integrand_wick_r8.csv",
                     "partial_wick_r8.csv"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    rows = list(csv.reader(open(tmp_path / "a" / "partial_wick_r8.csv")))
    assert rows[0][0].startswith("# casimir_cac") and "config_sha256=" in rows[0][0]
    assert rows[1] == ["xi", "partial_fx", "partial_over_fx"]
    d = json.load(open(tmp_path / "a" / "force_wick_r8.json"))
    assert d["converged"] and 0.03 < d["force"][0] < 0.04


def test_force_two_resolutions_extrapolates(tmp_path):
    cfg = _write(tmp_path, dict(SMALL, resolutions=[8, 16]))
    assert main(["force", "--config", cfg, "--out", str(tmp_path)]) == 0
    s = json.load(open(tmp_path / "force_summary.json"))
    f8, f16 = (r["force"][0] for r in s["runs"])
    assert np.isclose(s["extrapolated"]["wick"][0], f16 + (f16 - f8) / 3)


def test_force_nonconverged_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, {"geometry": {"builder": "parallel_plates_1d"}, "model": "1d",
                            "contours": [{"kind": "wick"}], "resolutions": [16],
                            "quadrature": {"xi_max": 1.0, "xi_linear": 1.0}})
    assert main(["force", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "not converged" in capsys.readouterr().err


def test_single_block_config_null(tmp_path):
    cfg = _write(tmp_path, {"geometry": {"builder": "single_block"},
                            "contours": [{"kind": "conductive", "sigma": 100.0}], "resolutions": [8]})
    assert main(["force", "--config", cfg, "--out", str(tmp_path)]) == 0
    fx = json.load(open(tmp_path / "force_summary.json"))["runs"][0]["force"][0]
    assert abs(fx) < 1e-4 * 0.0335


def test_contour_table(tmp_path):
    cfg = _write(tmp_path, {"contours": [{"kind": "wick"}, {"kind": "rotation"},
                                         {"kind": "conductive", "sigma": 1.0}, {"kind": "vacuum"},
                                         {"kind": "fluid_tabulated"}]})
    assert main(["contour-table", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(open(tmp_path / "contour_table.csv")))
    table = {r[0]: r[3] for r in rows[2:]}
    assert list(table.values()) == ["False", "False", "True", "True", "True"]


def test_omega_scan(tmp_path, capsys):
    cfg = _write(tmp_path, {"scan": {"re_min": 0.0, "re_max": 2.0, "im_min": 0.0, "im_max": 2.0,
                                     "n_re": 3, "n_im": 3, "resolution": 8}})
    assert main(["omega-scan", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "qualitative" in capsys.readouterr().err
    rows = list(csv.reader(open(tmp_path / "omega_scan.csv")))
    assert rows[1][-1] == "status" and len(rows) == 2 + 9
    assert rows[2][-1] == "excluded"
    assert sum(r[-1] == "ok" for r in rows[2:]) >= 7


def test_experiment_plan(tmp_path):
    cfg = _write(tmp_path, {"resolutions": [8],
                            "experiment": {"n_freq": 4, "antennas": 2, "orientations": ["x", "z"]}})
    assert main(["experiment-plan", "--config", cfg, "--out", str(tmp_path)]) == 0
    rep = json.load(open(tmp_path / "bandwidth.json"))
    assert rep["xi_fraction_Hz"] < 2e9 and rep["antennas"]["orientations"] == ["x", "z"]
    rows = list(csv.reader(open(tmp_path / "smatrix.csv")))
    assert rows[1] == ["f_Hz", "antenna_i", "antenna_j", "orient_i", "orient_j", "re_S", "im_S"]
    assert len(rows) == 2 + 2 * 2 * 4


def test_oracles_subcommand(tmp_path):
    assert main(["oracles", "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(open(tmp_path / "oracles.csv")))
    assert all(r[5] == "True" for r in rows[2:])
