import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfplane.lattice import (
    LatticeConfig,
    bergman_ball,
    bergman_distance,
    build_lattice,
    consistent_gamma_bounds,
    covering_audit,
    gamma_bounds,
    inclusion_audit,
    lattice_csv,
    separation,
)
from halfplane.weights import DomainError

upper = st.builds(complex, st.floats(-50, 50), st.floats(1e-3, 50))
DELTAS = (0.1, 0.3, 0.5)


def test_gamma_bounds_example():
    lo, hi, mid = gamma_bounds(0.5)
    assert lo == pytest.approx(0.00902, abs=1e-5)
    assert hi == pytest.approx(0.04514, abs=1e-5)
    assert mid == pytest.approx(0.5 * (lo + hi))


@given(st.floats(1e-4, 0.999))
def test_gamma_bounds_ordered(delta):
    lo, hi, _ = gamma_bounds(delta)
    assert 0 < lo < hi
    clo, chi, _ = consistent_gamma_bounds(delta)
    assert clo == pytest.approx(4 * lo) and chi == pytest.approx(4 * hi)


def test_gamma_bounds_vanish_with_delta():
    assert gamma_bounds(1e-6)[1] < 1e-12


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.2])
def test_delta_domain(delta):
    with pytest.raises(DomainError):
        gamma_bounds(delta)


def test_config_validation():
    with pytest.raises(DomainError):
        LatticeConfig(0.5, gamma=0.2)
    with pytest.raises(DomainError):
        LatticeConfig(0.5, l_range=(3, 2))
    with pytest.raises(DomainError):
        LatticeConfig(0.5, bounds="free")
    assert LatticeConfig(0.5, gamma=0.2, bounds="free").gamma == 0.2


def test_lattice_points():
    lat = build_lattice(LatticeConfig(0.5, gamma=0.02, l_range=(-5, 5), j_range=(-3, 3)))
    assert lat.x_of(4, 0) == pytest.approx(0.125)
    assert np.all(lat.points[:, 5].real == 0)
    np.testing.assert_allclose(lat.y[1:] / lat.y[:-1], 2.0 ** 0.02, rtol=1e-15)
    for jj in (-3, 0, 3):
        lo, hi = lat.I(2, jj)
        plo, phi = lat.I(2, jj, primed=True)
        assert lo < plo < phi < hi
        lo, hi = lat.J(jj)
        plo, phi = lat.J(jj, primed=True)
        assert lo < plo < phi < hi


def test_distance_examples():
    assert bergman_distance(1j, 1j) == 0.0
    assert bergman_distance(1j, 2j) == pytest.approx(0.5 * math.log(2), rel=1e-15)
    with pytest.raises(DomainError):
        bergman_distance(1j, 1.0)


@given(upper, upper)
def test_distance_symmetric(z, w):
    assert bergman_distance(z, w) == pytest.approx(bergman_distance(w, z), rel=1e-12, abs=1e-15)


@given(upper, upper, upper)
def test_triangle_inequality(a, b, c):
    assert bergman_distance(a, c) <= bergman_distance(a, b) + bergman_distance(b, c) + 1e-12


@given(upper, upper, st.floats(-20, 20), st.floats(0.01, 100))
def test_distance_invariances(z, w, a, c):
    d = bergman_distance(z, w)
    assert bergman_distance(z + a, w + a) == pytest.approx(d, rel=1e-9, abs=1e-12)
    assert bergman_distance(c * z, c * w) == pytest.approx(d, rel=1e-9, abs=1e-12)


def test_bergman_ball_boundary():
    c, r = bergman_ball(1j, 0.3)
    pts = c + r * np.exp(1j * np.linspace(0, 2 * np.pi, 50))
    np.testing.assert_allclose(bergman_distance(pts, 1j), 0.3, rtol=1e-10)


@pytest.mark.parametrize("delta", DELTAS)
def test_audits_with_consistent_gamma(delta):
    lat = build_lattice(LatticeConfig(delta, bounds="consistent"))
    cov = covering_audit(lat, 10_000, seed=0)
    inc = inclusion_audit(lat, 100, 25, seed=0)
    assert cov.passed, cov.notes
    assert inc.passed
    assert cov.checks["iv"]["max_multiplicity"] <= 4


@pytest.mark.parametrize("delta", DELTAS)
def test_default_gamma_range_only_breaks_primed_row_disjointness(delta):
    # 2^gamma below (1 + d/20)/(1 - d/20) makes neighbouring J' overlap
    lat = build_lattice(LatticeConfig(delta))
    cov = covering_audit(lat, 10_000, seed=0)
    bad = {k for k, c in cov.checks.items() if c.get("violations", 0)}
    assert bad == {"iii"}
    assert cov.checks["iii"]["violations"] == cov.checks["iii"]["pairs"]
    assert inclusion_audit(lat, 100, 25, seed=0).passed


def test_cell_corners_and_centre():
    lat = build_lattice(LatticeConfig(0.5, l_range=(-2, 2), j_range=(-2, 2)))
    z0 = complex(lat.x_of(0, 0), lat.y_of(0))
    ilo, ihi = lat.I(0, 0)
    jlo, jhi = lat.J(0)
    corners = np.array([ilo + 1j * jlo, ilo + 1j * jhi, ihi + 1j * jlo, ihi + 1j * jhi])
    assert np.all(bergman_distance(corners, z0) < lat.d)
    assert bergman_distance(z0, z0) < lat.d / 80


def test_audit_is_seeded():
    lat = build_lattice(LatticeConfig(0.3, bounds="consistent"))
    a = covering_audit(lat, 2000, seed=7).to_record()
    b = covering_audit(lat, 2000, seed=7).to_record()
    assert a == b


def test_separation_positive():
    lat = build_lattice(LatticeConfig(0.5, l_range=(-20, 20), j_range=(-10, 10)))
    s = separation(lat)
    assert 0 < s < lat.d


def test_lattice_csv():
    lat = build_lattice(LatticeConfig(0.5, l_range=(-1, 1), j_range=(0, 1)))
    rows = list(csv.reader(io.StringIO(lattice_csv(lat))))
    assert rows[0] == ["l", "j", "x", "y", "I_lo", "I_hi", "J_lo", "J_hi"]
    assert len(rows) == 1 + 6
    assert float(rows[1][2]) == lat.x[0, 0]
