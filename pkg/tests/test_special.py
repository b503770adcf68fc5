import math

import pytest
from hypothesis import given, strategies as st

from halfplane.special import beta, gamma, log_beta, log_gamma


@given(st.floats(0.05, 150.0))
def test_log_gamma_matches_stdlib(x):
    assert log_gamma(x) == pytest.approx(math.lgamma(x), rel=1e-13, abs=1e-13)


@pytest.mark.parametrize("n", range(1, 12))
def test_gamma_factorial(n):
    assert gamma(n) == pytest.approx(math.factorial(n - 1), rel=1e-13)


@pytest.mark.parametrize("k", range(0, 8))
def test_gamma_half_integers(k):
    # Gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!)
    exact = math.factorial(2 * k) * math.sqrt(math.pi) / (4 ** k * math.factorial(k))
    assert gamma(k + 0.5) == pytest.approx(exact, rel=1e-13)


def test_beta_special_values():
    assert beta(0.5, 0.5) == pytest.approx(math.pi, rel=1e-14)
    assert beta(1.5, 0.5) == pytest.approx(math.pi / 2, rel=1e-14)
    assert beta(1.0, 3.0) == pytest.approx(1 / 3, rel=1e-14)


@given(st.floats(0.1, 30.0), st.floats(0.1, 30.0))
def test_beta_symmetric_and_log_consistent(a, b):
    assert beta(a, b) == pytest.approx(beta(b, a), rel=1e-13)
    assert log_beta(a, b) == pytest.approx(math.log(beta(a, b)), rel=1e-12, abs=1e-12)
