import numpy as np
import pytest
from hypothesis import given, strategies as st

from casimir_cac.contours import (Contour, EquivalentMaterial, TabulatedMaterial,
                                  check_physicality, contour_of_material, default_probes,
                                  eps_c_of_contour, jacobian, omega_of_xi)

xis = st.floats(1e-3, 1e3)
sigmas = st.floats(1e-2, 1e4)
phis = st.floats(0.01, np.pi / 2 - 0.01)


def _contours(sigma, phi):
    return [Contour.wick(), Contour.rotation(phi), Contour.conductive(sigma),
            Contour.from_material(EquivalentMaterial.conductive(sigma, 80.0))]


@given(xis, sigmas, phis)
def test_branch_consistency(xi, sigma, phi):
    for c in _contours(sigma, phi):
        w = omega_of_xi(c, xi)
        eps = c.equivalent_material()(xi)
        assert abs(w**2 / xi**2 - eps) <= 1e-12 * abs(eps)


@given(xis, sigmas, phis)
def test_passive_contours_stay_in_upper_half_plane(xi, sigma, phi):
    for c in _contours(sigma, phi):
        assert omega_of_xi(c, xi).imag >= 0


@given(st.floats(1e-2, 1e2), sigmas)
def test_jacobian_matches_finite_difference(xi, sigma):
    for c in (Contour.conductive(sigma), Contour.from_material(EquivalentMaterial.conductive(sigma, 80.0))):
        h = 1e-6 * xi
        fd = (omega_of_xi(c, xi + h) - omega_of_xi(c, xi - h)) / (2 * h)
        j = jacobian(c, xi)
        assert abs(j - fd) / abs(j) <= 1e-6


def test_conductive_asymptotics():
    for sigma in (0.1, 10.0, 1000.0):
        c = Contour.conductive(sigma)
        assert abs(omega_of_xi(c, 1e4 * sigma) / (1e4 * sigma) - 1) < 1e-3
        assert abs(np.angle(omega_of_xi(c, 1e-6 * sigma)) - np.pi / 4) < 1e-3


def test_wick_and_rotation_values():
    assert omega_of_xi(Contour.wick(), 2.0) == 2j
    assert np.isclose(omega_of_xi(Contour.rotation(np.pi / 3), 2.0), 2 * np.exp(1j * np.pi / 3))
    assert jacobian(Contour.wick(), 3.0) == 1j


def test_xi_zero_rejected():
    with pytest.raises(ValueError):
        omega_of_xi(Contour.conductive(1.0), 0.0)
    with pytest.raises(ValueError):
        jacobian(Contour.wick(), [1.0, 0.0])
    with pytest.raises(ValueError):
        EquivalentMaterial.conductive(1.0)(0.0)


def test_bad_contour_parameters():
    with pytest.raises(ValueError):
        Contour.conductive(0.0)
    with pytest.raises(ValueError):
        Contour("spiral")


def test_eps_c_of_contour_with_base_material():
    c = Contour.conductive(5.0)
    drude = lambda w: 1 - 4.0 / (w * (w + 0.1j))
    xi = 0.7
    w = omega_of_xi(c, xi)
    assert np.isclose(eps_c_of_contour(c, xi, drude), drude(w) * w**2 / xi**2, rtol=1e-14)
    assert np.isclose(eps_c_of_contour(c, xi), 1 + 5j / xi, rtol=1e-14)


def test_contour_of_material_round_trip():
    xi = np.logspace(-2, 2, 7)
    eps = EquivalentMaterial.conductive(3.0)
    assert np.allclose(contour_of_material(eps, xi), omega_of_xi(Contour.conductive(3.0), xi),
                       rtol=1e-14)
    assert np.allclose(contour_of_material(-1.0, xi), 1j * xi)


def test_physicality_table():
    probes = default_probes()
    wick = check_physicality(Contour.wick(), probes)
    assert (wick.physical, wick.passive) == (False, False)
    for phi in (0.1, np.pi / 4, 1.4):
        rot = check_physicality(Contour.rotation(phi), probes)
        assert (rot.physical, rot.conjugate_symmetric) == (False, False)
    for sigma in (0.01, 1.0, 100.0):
        assert check_physicality(Contour.conductive(sigma), probes).physical
    assert check_physicality(EquivalentMaterial.vacuum(), probes).physical


def test_physicality_flags_gain_at_positive_xi():
    gain = EquivalentMaterial(lambda x: 2.0 - 0.5j * np.sign(x))
    rep = check_physicality(gain, default_probes())
    assert not rep.passive and rep.conjugate_symmetric
    assert "gain" in rep.witness[2]


def test_physicality_requires_declared_extension():
    m = EquivalentMaterial(lambda x: 1 + 0j * x, symmetric_extension=False)
    with pytest.raises(ValueError):
        check_physicality(m, [1.0])
    with pytest.raises(ValueError):
        check_physicality(EquivalentMaterial.vacuum(), [])


def test_tabulated_material(tmp_path):
    xi = np.logspace(-3, 2, 40)
    vals = 80 + 5j / xi
    path = tmp_path / "eps.csv"
    with open(path, "w") as fh:
        fh.write("# saline\nxi,re,im\n")
        for x, v in zip(xi, vals):
            fh.write(f"{float(x)!r},{float(v.real)!r},{float(v.imag)!r}\n")
    tab = TabulatedMaterial.from_csv(path, symmetric_extension=True)
    m = tab.as_material()
    probe = np.sqrt(xi[10] * xi[11])
    assert abs(m(probe) - (80 + 5j / probe)) / abs(80 + 5j / probe) < 1e-3
    assert m(-probe) == np.conj(m(probe))
    assert check_physicality(tab, np.logspace(-2, 1, 10)).physical
    with pytest.raises(ValueError):
        m(1e3)  # outside the table, no extrapolation
    c = Contour.from_material(tab)
    h = 1e-6 * probe
    fd = (omega_of_xi(c, probe + h) - omega_of_xi(c, probe - h)) / (2 * h)
    assert abs(jacobian(c, probe) - fd) / abs(fd) < 1e-4


def test_tabulated_rejects_bad_input():
    with pytest.raises(ValueError):
        TabulatedMaterial(np.array([1.0, 0.5]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        TabulatedMaterial(np.array([1.0]), np.array([1.0]))
