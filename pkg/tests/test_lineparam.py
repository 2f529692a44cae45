import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from faultzone.errors import ConfigError
from faultzone.lineparam import (EPS0, Conductor, LineParameters, TowerGeometry,
                                 balanced_matrix, bundle_reduce, effective_height,
                                 geometry_from_table, kron_reduce, line_parameters, line_reactance,
                                 load_geometry, load_line_parameters, potential_coefficients,
                                 save_line_parameters, sequence_components,
                                 series_impedance_matrix, shunt_capacitance_matrix)
from oracles import carson_correction, carson_matrix


@pytest.fixture(scope="module")
def tower():
    return geometry_from_table()


def single_wire(h=20.0, radius=0.015, rho=100.0):
    c = Conductor(0.0, h, radius * np.exp(-0.25), radius, 0.05)
    return TowerGeometry((c, Conductor(10.0, h, c.gmr, radius, 0.05),
                          Conductor(20.0, h, c.gmr, radius, 0.05)),
                         bundle_n=1, bundle_spacing=0.0, ground_wires=(), sag=0.0,
                         earth_resistivity=rho)


# effective height and bundles

def test_effective_height_two_thirds_sag():
    assert effective_height(41.46, 14) == pytest.approx(32.1267, abs=5e-5)
    assert effective_height(30.0, 0.0) == 30.0


def test_effective_height_rejects_negative():
    with pytest.raises(ConfigError):
        effective_height(9.0, 15.0)


def test_bundle_reduce_twin():
    gmr, _ = bundle_reduce(0.012161, 0.0156, 0.45, 2)
    assert gmr == pytest.approx(0.073976, abs=5e-7)


def test_bundle_reduce_single_and_degenerate():
    assert bundle_reduce(0.01, 0.013, 0.4, 1) == (0.01, 0.013)
    # twin bundle spaced one GMR apart
    assert bundle_reduce(0.01, 0.013, 0.01, 2)[0] == pytest.approx(0.01)
    with pytest.raises(ConfigError):
        bundle_reduce(0.01, 0.013, 0.4, 5)


def test_bundle_reduce_matches_mean_distance():
    # geometric mean of a subconductor's gmr and its distances to the others
    gmr, s = 0.012, 0.45
    angles = 2 * np.pi * np.arange(4) / 4
    rad = s / (2 * np.sin(np.pi / 4))
    pts = rad * np.column_stack([np.cos(angles), np.sin(angles)])
    dists = [np.linalg.norm(pts[0] - p) for p in pts[1:]]
    expect = (gmr * np.prod(dists)) ** 0.25
    assert bundle_reduce(gmr, 0.015, s, 4)[0] == pytest.approx(expect, rel=1e-12)


# geometry validation

def test_geometry_rejects_bad_gmr():
    c = Conductor(0.0, 20.0, 0.02, 0.01, 0.05)
    with pytest.raises(ConfigError):
        TowerGeometry((c, c, c), 1, 0.0, (), 0.0)


def test_geometry_rejects_unknown_field():
    with pytest.raises(ConfigError):
        geometry_from_table({"phase_spacing": 3})


def test_coincident_wires_rejected():
    c = Conductor(0.0, 20.0, 0.01, 0.013, 0.05)
    geom = TowerGeometry((c, c, Conductor(5.0, 20.0, 0.01, 0.013, 0.05)), 1, 0.0, (), 0.0)
    with pytest.raises(ConfigError):
        series_impedance_matrix(geom, 50.0)


def test_geometry_file_round_trip(tmp_path):
    doc = {"phase_spacing_m": 12.0, "earth_resistivity_ohm_m": 250.0}
    path = tmp_path / "g.json"
    path.write_text(json.dumps(doc))
    geom = load_geometry(path)
    assert geom.earth_resistivity == 250.0
    assert geom.conductors[2].x - geom.conductors[1].x == 12.0


# series impedance

def _carson_reference(tower):
    wires = [(x, y, g, r) for x, y, g, _, r in tower.wires()]
    return carson_matrix(wires, 50.0, tower.earth_resistivity)


def test_carson_oracle_matches_integral(tower):
    # the series oracle itself against direct quadrature of the earth-return integral
    h, rho, f = 32.1267, 100.0, 50.0
    w = 2 * np.pi * f
    m2 = 1j * w * 4e-7 * np.pi / rho

    def part(lam, k):
        v = np.exp(-2 * h * lam) / (lam + np.sqrt(lam * lam + m2))
        return v.real if k == 0 else v.imag

    re = quad(part, 0, np.inf, args=(0,), limit=500)[0]
    im = quad(part, 0, np.inf, args=(1,), limit=500)[0]
    integral = re + 1j * im
    dz = 1j * w * 4e-7 * integral * 1e3
    dr, dx = carson_correction(h, h, 0.0, f, rho)
    assert dr == pytest.approx(dz.real, rel=1e-8)
    assert dx == pytest.approx(dz.imag, rel=1e-8)


def test_series_impedance_matches_carson_series(tower):
    z = series_impedance_matrix(tower, 50.0)
    zc = _carson_reference(tower)
    assert np.all(np.abs(z.real - zc.real) <= 0.01 * np.abs(zc.real))
    assert np.all(np.abs(z.imag - zc.imag) <= 0.01 * np.abs(zc.imag))


def test_sequence_impedances_match_carson_series(tower):
    z = kron_reduce(series_impedance_matrix(tower, 50.0), [3, 4])
    zc = kron_reduce(_carson_reference(tower), [3, 4])
    for a, b in zip(sequence_components(z), sequence_components(zc)):
        assert abs(a - b) <= 0.01 * abs(b)


def test_series_impedance_diagonal_matches_carson_series(tower):
    z = np.diag(series_impedance_matrix(tower, 50.0))
    zc = np.diag(_carson_reference(tower))
    assert np.all(np.abs(z - zc) <= 0.01 * np.abs(zc))


def test_perfect_earth_limit():
    geom = single_wire(rho=1e-9)
    z = series_impedance_matrix(geom, 50.0)
    k = 2 * np.pi * 50 * 4e-7 * np.pi / (2 * np.pi) * 1e3
    wires = geom.wires()
    for i, (xi, yi, gi, _, _) in enumerate(wires):
        assert z[i, i].imag == pytest.approx(k * np.log(2 * yi / gi), rel=1e-4)
        for j, (xj, yj, _, _, _) in enumerate(wires[:i]):
            ratio = np.hypot(xi - xj, yi + yj) / np.hypot(xi - xj, yi - yj)
            assert z[i, j].imag == pytest.approx(k * np.log(ratio), rel=1e-4)


def test_line_parameter_invariants(tower):
    lp = line_parameters(tower)
    np.testing.assert_allclose(lp.z_series, lp.z_series.T, rtol=0, atol=1e-15)
    np.testing.assert_allclose(lp.c_shunt, lp.c_shunt.T, rtol=0, atol=1e-24)
    r_dc = tower.conductors[0].r_dc / tower.bundle_n
    assert np.all(np.diag(lp.z_series).real >= r_dc)
    assert np.all(np.diag(lp.c_shunt) > 0)
    off = lp.c_shunt[~np.eye(3, dtype=bool)]
    assert np.all(off <= 0)
    assert abs(lp.z0) > abs(lp.z1)


def test_line_parameters_round_trip(tmp_path, tower):
    lp = line_parameters(tower)
    path = tmp_path / "lp.json"
    save_line_parameters(lp, path)
    back = load_line_parameters(path)
    np.testing.assert_array_equal(back.z_series, lp.z_series)
    np.testing.assert_array_equal(back.c_shunt, lp.c_shunt)
    assert isinstance(back, LineParameters)


# capacitance

def test_single_conductor_capacitance():
    c = Conductor(0.0, 20.0, 0.01, 0.013, 0.05)
    far = [Conductor(x, 20.0, 0.01, 0.013, 0.05) for x in (1e7, 2e7)]
    geom = TowerGeometry((c, *far), 1, 0.0, (), 0.0)
    cm = shunt_capacitance_matrix(geom)
    expect = 2 * np.pi * EPS0 / np.log(2 * 20.0 / 0.013) * 1e3
    assert cm[0, 0] == pytest.approx(expect, rel=1e-9)


def test_widely_separated_decouple():
    conds = tuple(Conductor(x, 20.0, 0.01, 0.013, 0.05) for x in (0.0, 1e8, 2e8))
    cm = shunt_capacitance_matrix(TowerGeometry(conds, 1, 0.0, (), 0.0))
    assert np.max(np.abs(cm[~np.eye(3, dtype=bool)])) < 1e-12 * cm[0, 0]


def test_potential_coefficients_positive(tower):
    pm = potential_coefficients(tower)
    assert np.all(np.linalg.eigvalsh(pm) > 0)


# Kron reduction and sequence quantities

def test_kron_reduce_identity_and_block_diagonal():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 3)) + 5 * np.eye(3)
    np.testing.assert_array_equal(kron_reduce(a, []), a)
    m = np.zeros((5, 5))
    m[:3, :3] = a
    m[3:, 3:] = np.eye(2) * 4
    np.testing.assert_allclose(kron_reduce(m, [3, 4]), a, atol=1e-15)


def test_kron_reduce_schur_complement():
    rng = np.random.default_rng(1)
    b = rng.normal(size=(5, 5))
    m = b @ b.T + 5 * np.eye(5)
    red = kron_reduce(m, [3, 4])
    inv = np.linalg.inv(m)
    # the Schur complement inverts the kept block of the inverse
    np.testing.assert_allclose(red, np.linalg.inv(inv[:3, :3]), rtol=1e-12)


def test_sequence_components_of_diagonal():
    z1, z0 = sequence_components((0.3 + 0.5j) * np.eye(3))
    assert z1 == z0 == pytest.approx(0.3 + 0.5j)


@settings(max_examples=50, deadline=None)
@given(st.permutations([0, 1, 2]), st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 2))
def test_sequence_components_permutation_invariant(perm, r1, x1, x0):
    z = balanced_matrix(complex(r1, x1), complex(r1 * 3, x0 + x1))
    zp = z[np.ix_(perm, perm)]
    a, b = sequence_components(z)
    c, d = sequence_components(zp)
    assert a == pytest.approx(c) and b == pytest.approx(d)
    assert a == pytest.approx(complex(r1, x1))


def test_line_reactance_near_tcsc_implied(tower):
    # 50 % compensation of 60.225 uF at 50 Hz implies 105.7 ohm for 250 km
    x = line_reactance(tower, 250.0, 60.0)
    assert abs(x - 105.7) <= 0.15 * 105.7


def test_positive_sequence_values(tower):
    lp = line_parameters(tower, 50.0)
    assert lp.z1.real == pytest.approx(0.02861, abs=5e-5)
    assert lp.z1.imag == pytest.approx(0.34974, abs=5e-5)
