import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halfplane.hilbert import (
    DiscreteOperator,
    HalfLineFunction,
    apply_adjoint,
    apply_hilbert,
    near_critical,
    norm_estimate,
    schur_verify,
    sharp_norm,
    threshold_classify,
    weighted_pairing,
    witness,
)
from halfplane.quadrature import PanelScheme, SpaceParams
from halfplane.weights import BUILTIN_GROWTH, DomainError, WeightSpec, builtin_specs, weight_eval

IDENT = BUILTIN_GROWTH["identity"]
K0 = WeightSpec(1, 1, 0.0, IDENT)
CHI = HalfLineFunction.indicator(1.0, 2.0)


def test_apply_hilbert_examples():
    assert apply_hilbert(CHI, 0.0, 1.0) == pytest.approx(math.log(1.5), rel=1e-12)
    assert apply_hilbert(HalfLineFunction.zero(), 0.5, 2.0) == 0.0
    with pytest.raises(DomainError):
        apply_hilbert(CHI, -1.0, 1.0)


@pytest.mark.parametrize("beta", [-0.5, 0.0, 1.0, 3.0])
def test_indicator_image_comparable_to_envelope(beta):
    xs = 2.0 ** np.arange(-10, 11)
    r = apply_hilbert(CHI, beta, xs) * (xs + 1) ** (1 + beta)
    assert r.max() / r.min() <= 2.0 ** (1 + beta) * 1.01


def test_divergent_envelope_is_flagged():
    # y^-1.5 near 0 against y^beta with beta = 0 is not integrable
    assert apply_hilbert(HalfLineFunction.power(-1.5, -3.0), 0.0, 1.0) == math.inf


@given(st.floats(-0.9, 2.0), st.floats(-6, 6))
@settings(max_examples=25, deadline=None)
def test_positivity(beta, e):
    f = HalfLineFunction.power(0.5, -2.0)
    assert apply_hilbert(f, beta, 2.0 ** e) > 0


@given(st.floats(-0.9, 2.0), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=20, deadline=None)
def test_homogeneity(beta, ec, ex):
    # H(f(c.))(x) = (Hf)(cx) for the degree -1 kernel
    c, x = 2.0 ** ec, 2.0 ** ex
    f = HalfLineFunction.power(0.5, -2.0)
    assert apply_hilbert(f.dilate(c), beta, x) == pytest.approx(apply_hilbert(f, beta, c * x), rel=1e-8)


@pytest.mark.parametrize("spec", [K0, WeightSpec(1, 1, -1.0, IDENT), WeightSpec(1, 0, 2.0, BUILTIN_GROWTH["tlog"])],
                         ids=str)
@pytest.mark.parametrize("alpha,beta", [(0.0, 0.0), (0.5, 1.0), (-0.5, 0.3)])
def test_adjoint_consistency(spec, alpha, beta):
    params = SpaceParams(2, 2, alpha, beta)
    f = HalfLineFunction.bump(0.5, 2.0)
    g = HalfLineFunction.bump(1.0, 4.0)
    lhs = weighted_pairing(lambda y: apply_hilbert(f, beta, y), g, params, spec, (1.0, 4.0))
    rhs = weighted_pairing(f, lambda y: apply_adjoint(g, params, spec, y), params, spec, (0.5, 2.0))
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_adjoint_self_adjoint_case():
    f = HalfLineFunction.bump(1.0, 3.0)
    xs = 2.0 ** np.arange(-4, 5)
    params = SpaceParams(2, 2, 0.7, 0.7)
    np.testing.assert_allclose(apply_adjoint(f, params, K0, xs), apply_hilbert(f, 0.7, xs), rtol=1e-12)


def test_adjoint_of_indicator_matches_envelope():
    spec = WeightSpec(1, 1, -1.0, IDENT)
    params = SpaceParams(2, 2, 0.0, 0.5)
    xs = 2.0 ** np.arange(-8, 9)
    env = weight_eval(spec.with_k(1.0), xs) * xs ** 0.5 * (xs + 1) ** -1.5
    r = apply_adjoint(CHI, params, spec, xs) / env
    assert r.max() / r.min() <= 10


def test_schur_k0_is_beta_value():
    res = schur_verify(SpaceParams(2, 2, 0.0, 0.0), K0)
    np.testing.assert_allclose(res.ratio1, math.pi, rtol=1e-9)
    np.testing.assert_allclose(res.ratio2, math.pi, rtol=1e-9)


def test_schur_log_weight_finite():
    res = schur_verify(SpaceParams(2, 2, 0.0, 0.0), WeightSpec(1, 1, -1.0, IDENT))
    assert res.finite and res.sup2 < 10


def test_schur_violating_parameters():
    res = schur_verify(SpaceParams(2, 2, 1.5, 0.0), K0)
    assert not res.finite


def test_schur_p1_unsupported():
    with pytest.raises(DomainError):
        schur_verify(SpaceParams(1, 1, 0.0, 0.0), K0)


def test_sharp_norm_formula():
    assert sharp_norm(2, 0.0) == pytest.approx(math.pi)
    assert sharp_norm(2, 1.0) == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("beta,target", [(0.0, math.pi), (1.0, math.pi / 2)])
def test_norm_estimate_sharp(beta, target):
    est = norm_estimate(SpaceParams(2, 2, 0.0, beta), K0)
    assert est.converged
    assert 0.98 * target <= est.value <= target


def test_norm_estimate_log_weight_stable():
    est = norm_estimate(SpaceParams(2, 2, 0.0, 0.0), WeightSpec(1, 1, -1.0, IDENT))
    assert est.converged and math.isfinite(est.value)
    tr = est.trend
    assert all(b >= a * (1 - 1e-9) for a, b in zip(tr, tr[1:]))
    assert tr[-1] / tr[-2] < 1.05


def test_norm_estimate_p_not_two_is_lower_bound():
    est = norm_estimate(SpaceParams(3, 3, 0.0, 0.0), K0)
    assert est.value <= sharp_norm(3, 0.0) * (1 + 1e-9)
    assert est.value >= 0.9 * sharp_norm(3, 0.0)


def test_norm_estimate_p1_exact_column_sum():
    est = norm_estimate(SpaceParams(1, 1, 0.0, 0.5), K0)
    assert est.value <= sharp_norm(1, 0.5) * (1 + 1e-6)
    assert est.value >= 0.9 * sharp_norm(1, 0.5)


def test_discrete_operator_nonnegative():
    op = DiscreteOperator.build(SpaceParams(2, 2, 0.0, 0.0), K0, PanelScheme(-8, 8, 4, 1))
    assert np.all(op.matrix >= 0) and np.all(np.isfinite(op.matrix))


def test_unbounded_trend_grows():
    est = norm_estimate(SpaceParams(2, 2, 0.0, -0.75), K0, PanelScheme(-12, 12, 8, 2), trend_shrink=(4,))
    assert est.trend[-1] / est.trend[-2] >= 1.5


def test_threshold_examples():
    v = {r.beta: r.verdict for r in threshold_classify(2, 0.0, K0, [0.0, -0.6])}
    assert v == {0.0: "bounded", -0.6: "unbounded"}
    v = {r.beta: r.verdict for r in threshold_classify(1, 0.0, K0, [0.5, -0.5])}
    assert v == {0.5: "bounded", -0.5: "unbounded"}
    # p = 1, beta = alpha sits on the threshold; the witness still reads unbounded
    (r,) = threshold_classify(1, 0.0, K0, [0.0])
    assert r.verdict == "near-critical" and r.witness_verdict == "unbounded"


def test_threshold_signals_agree():
    for r in threshold_classify(2, 0.0, K0, [-0.9, -0.75, 0.0, 1.0]):
        assert r.signals_agree in (True, None)


@pytest.mark.parametrize("p,alpha", [(2, 0.0), (1.5, 1.0), (3, -0.5), (1, 0.5)])
def test_classification_weight_invariant(p, alpha):
    betas = [-0.9, -0.5, -0.2, 0.0, 0.4, 1.0, 2.5]
    ref = [r.verdict for r in threshold_classify(p, alpha, K0, betas, trend=False)]
    for spec in builtin_specs(ks=(-1.0, 1.0)):
        got = [r.verdict for r in threshold_classify(p, alpha, spec, betas, trend=False)]
        assert got == ref
    for r in threshold_classify(p, alpha, K0, betas, trend=False):
        if r.verdict != "near-critical":
            assert (r.verdict == "bounded") == r.predicate


def test_near_critical_band():
    assert near_critical(2, 0.0, -0.49)
    assert not near_critical(2, 0.0, -0.4)


def test_witness_record():
    rec = witness(2, 0.0, -0.6, K0).to_record()
    assert rec["witness_verdict"] == "unbounded"
