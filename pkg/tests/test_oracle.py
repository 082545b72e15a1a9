import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from casimir_cac.geometry import Grid, MaterialMap
from casimir_cac.oracle import (OracleReport, channel_plate_force, dense_operator,
                                gap_correlations_1d, gap_stress_1d, lifshitz_1d_force,
                                mode_sum_1d_force, run_oracle_suite, write_reports)


def test_lifshitz_closed_form():
    assert abs(lifshitz_1d_force(1.0) + np.pi / 24) < 1e-14
    assert abs(lifshitz_1d_force(2.0) + np.pi / 96) < 1e-14
    with pytest.raises(ValueError):
        lifshitz_1d_force(0.0)


def test_two_analytic_routes_agree():
    for d in (0.5, 1.0, 3.0):
        a, b = lifshitz_1d_force(d), mode_sum_1d_force(d)
        assert abs(a - b) <= 1e-8 * abs(a)


@given(st.floats(0.05, 10.0), st.floats(0.05, 0.95))
def test_gap_stress_is_position_independent(xi, x):
    g, ddg = gap_correlations_1d(xi, 1.0, x)
    # only E_z and H_y exist: T_xx = -(<HH>_yy + <EE>_zz) / 2, bulk part xi / (2 pi)
    t = -(ddg - xi**2 * g) / (2 * np.pi) + xi / (2 * np.pi)
    assert np.isclose(t, gap_stress_1d(xi, 1.0), rtol=1e-10)


def test_dense_operator_wick_positive_definite():
    g = Grid(1, (0.0,), (10,), 8)
    m = MaterialMap(np.zeros(10, dtype=np.int16))
    labels, pos, A = dense_operator(g, m, 0.8j, "1D")
    assert np.allclose(A, A.T)
    assert np.all(np.linalg.eigvalsh(A.real) > 0)


def test_dense_operator_respects_metal():
    g = Grid(2, (0.0, 0.0), (4, 4), 8)
    labels = np.zeros((4, 4), dtype=np.int16)
    labels[1, 1] = 1
    lab, _, A = dense_operator(g, MaterialMap(labels, ("b",)), 1j, "TM")
    # 3 x 3 interior nodes, the four touching the metal cell are pinned
    assert A.shape == (5, 5)


def test_channel_force_attracts_nearer_wall():
    assert channel_plate_force(1.0, 2.0, 1.0, "2d-tm") > 0
    assert channel_plate_force(2.0, 1.0, 1.0, "2d-tm") < 0
    assert abs(channel_plate_force(1.0, 1.0, 1.0, "z-invariant-em")) < 1e-15
    with pytest.raises(ValueError):
        channel_plate_force(1.0, 2.0, 1.0, "3d")


def test_channel_wide_limit_approaches_parallel_plates():
    # TE (Neumann) n = 0 mode is the 1D problem; wide channels add many modes
    one_d = -lifshitz_1d_force(1.0) + lifshitz_1d_force(50.0)
    assert channel_plate_force(1.0, 50.0, 0.05, "2d-te", n_max=0) == pytest.approx(one_d, rel=1e-8)


def test_report_semantics(tmp_path):
    r = OracleReport("q", 1.0, 1.001, 1e-2, "m")
    assert r.passed and np.isclose(r.rel_error, 0.001 / 1.001)
    assert not OracleReport("q", 1.0, 2.0, 1e-2, "m").passed
    write_reports([r], tmp_path / "o.csv", "hdr")
    rows = list(csv.reader(open(tmp_path / "o.csv")))
    assert rows[0] == ["# hdr"] and rows[2][0] == "q" and rows[2][5] == "True"


def test_oracle_suite_passes():
    reports = run_oracle_suite()
    failed = [r.quantity for r in reports if not r.passed]
    assert not failed, failed
    assert len(reports) >= 9
