import csv
import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halfplane.atomic import (
    CoefficientArray,
    SequenceSpaceParams,
    SliceInterpolant,
    TruncationWarning,
    derivative_char_check,
    indicator_measure,
    random_coefficients,
    reconstruct,
    row_sums,
    sample_on_lattice,
    sampling_check,
    script_I,
    sequence_norm,
    slice_average_check,
    synthesize,
)
from halfplane.bergman import HoloTestFunction, KernelParams, kernel_eval, test_family
from halfplane.lattice import LatticeConfig, build_lattice
from halfplane.quadrature import SliceProfile, SpaceParams, mixed_norm
from halfplane.weights import BUILTIN_GROWTH, DomainError, WeightSpec

IDENT = BUILTIN_GROWTH["identity"]
K0 = WeightSpec(1, 1, 0.0, IDENT)
F3 = HoloTestFunction.single(-1j, 3)
F4 = HoloTestFunction.single(-1j, 4)
CFG = LatticeConfig(0.5)


def sp_for(cfg=CFG, k=0.0, p=2.0, q=2.0, alpha=0.0):
    return SequenceSpaceParams(p, q, alpha, WeightSpec(1, 1, k, IDENT), cfg.gamma)


@pytest.fixture(scope="module")
def interp3():
    return SliceInterpolant(F3, 2, (-13, 13))


def test_coefficient_validation():
    with pytest.raises(DomainError):
        CoefficientArray([0], [0, 1], [1.0], 0.5, 0.02)
    with pytest.raises(DomainError):
        CoefficientArray([0], [0], [np.nan], 0.5, 0.02)


def test_sequence_norm_examples():
    g = CFG.gamma
    one = CoefficientArray([0], [0], [1.0], 0.5, g)
    for k in (-1.0, 0.0, 1.0):
        assert sequence_norm(one, sp_for(k=k)) == pytest.approx(1.0)
    two = CoefficientArray([0, 1], [0, 0], [1.0, 1.0], 0.5, g)
    assert sequence_norm(two, sp_for()) == pytest.approx(math.sqrt(2))
    assert sequence_norm(CoefficientArray([], [], [], 0.5, g), sp_for()) == 0.0


def test_sequence_norm_row_weight():
    g = CFG.gamma
    lam = CoefficientArray([3], [10], [2.0], 0.5, g)
    sp = sp_for(k=1.0, p=2.0, q=3.0, alpha=0.5)
    y = 2.0 ** (10 * g)
    w = 1 + math.log(y)
    expected = (2.0 ** 3 * w * y ** (0.5 + 1 + 1.5)) ** (1 / 3)
    assert sequence_norm(lam, sp) == pytest.approx(expected, rel=1e-13)


# |c|^q must stay representable, so the magnitude is bounded below
@given(st.complex_numbers(min_magnitude=1e-50, max_magnitude=1e3, allow_nan=False, allow_infinity=False))
@settings(max_examples=25)
def test_sequence_norm_homogeneous(c):
    lam = random_coefficients(CFG, 10, np.random.default_rng(3))
    sp = sp_for(k=1.0, q=3.0)
    assert sequence_norm(lam.scale(c), sp) == pytest.approx(abs(c) * sequence_norm(lam, sp), rel=1e-12)


def test_gamma_mismatch():
    lam = CoefficientArray([0], [0], [1.0], 0.5, CFG.gamma)
    with pytest.raises(DomainError):
        sequence_norm(lam, SequenceSpaceParams(2, 2, 0.0, K0, gamma=0.03))


def test_sample_on_lattice():
    lat = build_lattice(LatticeConfig(0.5, l_range=(-3, 3), j_range=(-2, 2)))
    lam = sample_on_lattice(F3, lat)
    i = np.flatnonzero((lam.l == 0) & (lam.j == 0))[0]
    assert lam.values[i] == pytest.approx(1j / 8)
    assert np.all(sample_on_lattice(F3.scale(0.0), lat).values == 0)
    np.testing.assert_allclose(lam.points, lat.points.ravel())


def test_coefficient_csv():
    lam = CoefficientArray([1, -2], [0, 3], [1 + 2j, -0.5], 0.5, CFG.gamma)
    rows = list(csv.reader(io.StringIO(lam.to_csv())))
    assert rows[0] == ["l", "j", "re", "im"]
    assert rows[1] == ["1", "0", "1.0", "2.0"]


def test_interpolant_matches_profile(interp3):
    prof = SliceProfile(F3, 2)
    ys = 2.0 ** np.random.default_rng(0).uniform(-13, 13, 40)
    np.testing.assert_allclose(interp3(ys), prof(ys), rtol=1e-10)
    with pytest.raises(DomainError):
        interp3(2.0 ** 14)


def test_poisson_row_sums_match_direct(interp3):
    lat = build_lattice(LatticeConfig(0.5, l_range=(-200_000, 200_000), j_range=(-3, 3)))
    np.testing.assert_allclose(row_sums(F3, lat, [-3, 0, 3], 2, "direct"),
                               row_sums(F3, lat, [-3, 0, 3], 2, interpolant=interp3), rtol=1e-12)


@pytest.mark.parametrize("delta", [0.1, 0.5])
@pytest.mark.parametrize("k", [-1.0, 0.0, 1.0])
def test_sampling_two_sided(interp3, delta, k):
    cfg = LatticeConfig(delta)
    r = sampling_check(F3, cfg, sp_for(cfg, k=k), interpolant=interp3)
    assert math.isfinite(r.ratio_upper) and math.isfinite(r.ratio_lower)
    assert r.normalized == pytest.approx(1.0, abs=1e-3)
    assert r.tail_fraction < 0.01 and r.warning == ""


def test_sampling_lower_ratio_improves_with_delta(interp3):
    lower = [sampling_check(F3, LatticeConfig(d), sp_for(LatticeConfig(d)), interpolant=interp3).ratio_lower
             for d in (0.1, 0.3, 0.5)]
    assert lower[0] < lower[1] < lower[2]


def test_sampling_scaling_family():
    r = []
    for c in (0.5, 1.0, 2.0):
        f = F3.dilate(c)
        r.append(sampling_check(f, CFG, sp_for()).normalized)
    assert max(r) / min(r) <= 2


def test_sampling_zero_function():
    r = sampling_check(F3.scale(0.0), CFG, sp_for())
    assert r.lhs == 0 and r.norm_q == 0


def test_truncation_warning():
    # a pole at depth 2^-11 puts mass below the default window
    f = HoloTestFunction.single(-(2.0 ** -11) * 1j, 3)
    with pytest.warns(TruncationWarning):
        r = sampling_check(f, CFG, sp_for(), window=(-8, 8))
    assert r.tail_fraction > 0.01


def test_single_atom_is_kernel():
    sp = sp_for(alpha=1.0)
    lam = CoefficientArray([0], [0], [1.0], 0.5, CFG.gamma)
    z = np.array([0.3 + 0.2j, -1 + 4j])
    np.testing.assert_allclose(synthesize(lam, sp, z), kernel_eval(KernelParams(1.0), z, 1j), rtol=1e-14)
    n = mixed_norm(synthesize(lam, sp), SpaceParams(2, 2, 1.0), K0)
    assert math.isfinite(n.value) and n.value > 0


def test_synthesis_linear():
    rng = np.random.default_rng(5)
    a = random_coefficients(CFG, 8, rng)
    b = a.with_values(rng.standard_normal(8))
    z = np.array([0.1 + 1j, 2 + 0.3j])
    sp = sp_for()
    lhs = synthesize(a + b, sp, z)
    np.testing.assert_allclose(lhs, synthesize(a, sp, z) + synthesize(b, sp, z), rtol=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_round_trip(seed):
    lam = random_coefficients(CFG, 50, np.random.default_rng(seed))
    sp = sp_for()
    r = reconstruct(synthesize(lam, sp), CFG, sp, support=lam)
    assert r.residual <= 1e-6


def test_round_trip_fine_lattice():
    cfg = LatticeConfig(0.1)
    lam = random_coefficients(cfg, 50, np.random.default_rng(11), min_separation=0.05)
    sp = sp_for(cfg)
    assert reconstruct(synthesize(lam, sp), cfg, sp, support=lam).residual <= 1e-6


def test_reconstruct_family_member():
    cfg = LatticeConfig(0.1)
    r = reconstruct(F4, cfg, sp_for(cfg))
    assert r.residual <= 0.05
    assert r.holdout_residual <= 0.05


def test_reconstruct_zero():
    r = reconstruct(F4.scale(0.0), CFG, sp_for())
    assert np.all(r.coeffs.values == 0) and r.residual == 0


def test_synthesis_bound_stable_across_draws():
    sp = sp_for()
    ratios = []
    for seed in range(3):
        lam = random_coefficients(CFG, 10, np.random.default_rng(seed))
        n = mixed_norm(synthesize(lam, sp), SpaceParams(2, 2, 0.0), K0).value
        ratios.append(n / sequence_norm(lam, sp))
    assert max(ratios) / min(ratios) < 10


def test_indicator_measure_multiplicity_four():
    lat = build_lattice(CFG)
    y = lat.y_of(0)
    r = y / (2 * math.sqrt(2))
    v = y + 0.3 * r
    rho = math.sqrt(r * r - (y - v) ** 2)
    for u in (0.0, 0.37, 1.3):
        assert indicator_measure(lat, 0, y, u, v) == pytest.approx(8 * rho, rel=1e-12)
    assert indicator_measure(lat, 0, y, 0.0, 2 * y) == 0.0


def test_script_I(interp3):
    sp = sp_for()
    nq = mixed_norm(F3, SpaceParams(2, 2, 0.0), K0).qth_power
    a = script_I(F3, CFG, sp, interpolant=interp3)
    assert math.isfinite(a) and a > 0
    assert script_I(F3.scale(2.0), CFG, sp) == pytest.approx(4 * a, rel=1e-9)
    assert script_I(F3.scale(0.0), CFG, sp) == 0.0
    small = script_I(F3, CFG, sp, window=(-10, 10), interpolant=interp3)
    assert small / nq == pytest.approx(a / nq, rel=0.01)


def test_script_I_resolution():
    sp = sp_for()
    f = test_family()[1]
    a = script_I(f, CFG, sp, window=(-8, 8))
    b = script_I(f, CFG, sp, window=(-8, 8), n_y=16, n_v=32)
    assert a == pytest.approx(b, rel=1e-6)


def test_derivative_characterisation():
    r, inv = derivative_char_check(F3, SpaceParams(2, 2, 0.0), K0)
    assert r * inv == pytest.approx(1.0)
    # ||y F'|| / ||F|| is dilation invariant at k = 0
    r2, _ = derivative_char_check(F3.dilate(2.0), SpaceParams(2, 2, 0.0), K0)
    assert r2 == pytest.approx(r, rel=1e-7)
    with pytest.raises(DomainError):
        derivative_char_check(F3.scale(0.0), SpaceParams(2, 2, 0.0), K0)


def test_slice_average():
    res = slice_average_check(F3, 0.5, 2, 2)
    assert math.isfinite(res["worst_ratio"])
    res2 = slice_average_check(F3.scale(2.0), 0.5, 2, 2)
    assert res2["worst_ratio"] == pytest.approx(res["worst_ratio"], rel=1e-12)
    assert slice_average_check(F3.scale(0.0), 0.5, 2, 2)["worst_ratio"] == 0.0
    with pytest.raises(DomainError):
        slice_average_check(F3, 1.5, 2, 2)
