import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgspde.symbols import ModelParams, beta_shift, branch_sqrt, discriminant_root, lambda_pm, probe_base_bounds

LOG_GRID = np.logspace(-3, 3, 1000)


def test_params_validation_lists_every_problem():
    with pytest.raises(ValueError) as err:
        ModelParams(eps=0.0, alpha=-1 + 1j, n=0)
    msg = str(err.value)
    assert "eps" in msg and "alpha" in msg and "n must" in msg
    assert ModelParams().replace(eps=0.5).eps == 0.5


def test_branch_sqrt_examples():
    assert branch_sqrt(1) == 1
    assert branch_sqrt(-1) == pytest.approx(1j)
    assert branch_sqrt(complex(-1.0, -0.0)) == pytest.approx(1j)
    r = branch_sqrt(-1 + 2j)
    assert r == pytest.approx(0.786151 + 1.272020j, abs=1e-6)
    assert abs(r * r - (-1 + 2j)) < 1e-12
    # real part solves a^4 + a^2 - 1 = 0
    assert r.real ** 4 + r.real ** 2 - 1 == pytest.approx(0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-1e6, 1e6), y=st.floats(-1e6, 1e6))
def test_branch_sqrt_squares_back(x, y):
    z = complex(x, y)
    w = branch_sqrt(z)
    assert abs(w * w - z) <= 1e-12 * max(abs(z), 1e-300)
    assert w.real >= 0
    if w.real == 0:
        assert w.imag >= 0


def test_lambda_examples():
    lp, lm = lambda_pm(ModelParams(eps=1, alpha=2), (0, 0))
    assert lp == pytest.approx(-2 + math.sqrt(3), abs=1e-12)
    assert lm == pytest.approx(-2 - math.sqrt(3), abs=1e-12)
    lp, lm = lambda_pm(ModelParams(eps=1, alpha=1 + 1j), (0, 0))
    assert lp == pytest.approx(-0.213849 + 0.272020j, abs=1e-6)
    assert lm == pytest.approx(-1.786151 - 2.272020j, abs=1e-6)
    # Vieta: sum -2 alpha, product <k>^2 = 1
    assert lp + lm == pytest.approx(-2 - 2j, abs=1e-13)
    assert lp * lm == pytest.approx(1, abs=1e-13)


@settings(max_examples=100, deadline=None)
@given(eps=st.floats(1e-3, 1), a1=st.floats(0.05, 5), a2=st.floats(-5, 5), k1=st.integers(-16, 16),
       k2=st.integers(-16, 16))
def test_lambda_residual(eps, a1, a2, k1, k2):
    alpha = complex(a1, a2)
    lp, lm = lambda_pm(ModelParams(eps=eps, alpha=alpha), (k1, k2))
    b2 = 1 + k1 * k1 + k2 * k2
    for lam in (lp, lm):
        res = eps * eps * lam * lam + 2 * alpha * lam + b2
        scale = eps * eps * abs(lam) ** 2 + 2 * abs(alpha * lam) + b2
        assert abs(res) <= 1e-10 * scale
    assert lp.real < 0 and lm.real < 0


def test_lambda_small_eps_expansion():
    alpha = 1 + 1j
    eps = 1e-3
    for k in [(0, 0), (1, 0), (2, 1), (3, 3)]:
        b2 = 1 + k[0] ** 2 + k[1] ** 2
        lp, _ = lambda_pm(ModelParams(eps=eps, alpha=alpha), k)
        assert abs(lp + b2 / (2 * alpha)) <= 8 * eps ** 2 * b2 ** 2 / abs(alpha) ** 3


def test_lambda_vectorized():
    lp, lm = lambda_pm(ModelParams(eps=0.5, alpha=1 + 1j), np.array([[0, 0], [1, 0]]))
    assert lp.shape == (2,)
    assert lp[0] == lambda_pm(ModelParams(eps=0.5, alpha=1 + 1j), (0, 0))[0]


def test_discriminant_lower_bound_on_lattice():
    for alpha in (1 + 1j, 2 + 1j, 1 + 3j, 0.3 - 2j):
        for eps in (1, 0.5, 1 / 64):
            r = discriminant_root(eps, alpha, 1 + np.arange(0, 300, dtype=float))
            assert np.all(np.abs(r) >= math.sqrt(2 * abs(alpha.real * alpha.imag)) * (1 - 1e-12))


def test_beta_examples():
    assert beta_shift(ModelParams(eps=1, alpha=2)) == pytest.approx(2 - math.sqrt(3), abs=1e-12)
    b = beta_shift(ModelParams(eps=1, alpha=1 + 1j))
    assert b == pytest.approx(0.213849 - 0.272020j, abs=1e-6)
    assert b == pytest.approx((1 + 1j) - branch_sqrt(-1 + 2j), abs=1e-14)
    assert b.real >= 0
    small = beta_shift(ModelParams(eps=1e-4, alpha=1 + 1j))
    assert abs(small - 1 / (2 * (1 + 1j))) < 1e-7


@pytest.mark.parametrize("alpha", [1 + 1j, 2 + 1j, 1 - 1j, 0.5 + 0.1j])
def test_probe_all_items_pass(alpha):
    rep = probe_base_bounds(alpha, LOG_GRID)
    assert [e["item"] for e in rep] == ["1", "1m", "2", "3", "4", "5h", "5g"]
    assert all(e["pass"] for e in rep), rep


def test_probe_remainder_items_pointwise():
    alpha = 1 + 1j
    s = LOG_GRID
    r = branch_sqrt(alpha * alpha - s)
    low = s < abs(alpha) ** 2 / 2
    h = r[low] - alpha + s[low] / (2 * alpha)
    assert np.all(np.abs(h) <= 8 * s[low] ** 2 / abs(alpha) ** 3)
    assert np.all(np.diff(r.real) < 0)


def test_probe_real_alpha_reports_inapplicable_items():
    rep = {e["item"]: e for e in probe_base_bounds(2.0, LOG_GRID)}
    assert rep["2"]["pass"] is None and rep["3"]["pass"] is None
    # past the branch point the root is imaginary: Re r = 0 is constant
    assert rep["1"]["pass"] is False
    assert rep["1m"]["pass"] is False


def test_probe_rejects_bad_input():
    with pytest.raises(ValueError):
        probe_base_bounds(-1 + 1j, LOG_GRID)
    with pytest.raises(ValueError):
        probe_base_bounds(1 + 1j, [0.0, 1.0])
