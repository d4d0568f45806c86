import math

import numpy as np
import pytest

from nuvbox.errors import InconsistentDirac
from nuvbox.gaussian import VARIANCE_FLOOR, GaussianMsg, GaussianVecMsg, multiply, scale_factor


def test_multiply_equal_variances():
    out = multiply(GaussianMsg(-1.0, 1.0), GaussianMsg(1.0, 1.0))
    assert out.mean == pytest.approx(0.0, abs=1e-15)
    assert out.variance == pytest.approx(0.5, rel=1e-14)


def test_multiply_flat_is_identity():
    m = GaussianMsg(0.7, 2.3)
    out = multiply(m, GaussianMsg.flat())
    assert out == m
    out = multiply(GaussianMsg.flat(), m)
    assert out == m


def test_multiply_unequal_variances():
    out = multiply(GaussianMsg(-1.0, 1.5), GaussianMsg(1.0, 0.5))
    assert out.mean == pytest.approx(0.5, rel=1e-13)
    assert out.variance == pytest.approx(0.375, rel=1e-13)


def test_multiply_dirac_conflict():
    with pytest.raises(InconsistentDirac):
        multiply(GaussianMsg(0.0, 0.0), GaussianMsg(1.0, 0.0))
    out = multiply(GaussianMsg(2.0, 0.0), GaussianMsg(2.0, 0.0))
    assert out.mean == 2.0 and out.variance == 0.0


def test_multiply_commutative_bitwise():
    rng = np.random.default_rng(7)
    for _ in range(200):
        m1 = GaussianMsg(rng.normal(), rng.uniform(1e-6, 10.0))
        m2 = GaussianMsg(rng.normal(), rng.uniform(1e-6, 10.0))
        a, b = multiply(m1, m2), multiply(m2, m1)
        assert a.mean == b.mean and a.variance == b.variance


def test_product_mean_is_convex_combination():
    rng = np.random.default_rng(8)
    for _ in range(200):
        m1 = GaussianMsg(rng.normal(scale=3), rng.uniform(1e-9, 5.0))
        m2 = GaussianMsg(rng.normal(scale=3), rng.uniform(1e-9, 5.0))
        out = multiply(m1, m2)
        lo, hi = min(m1.mean, m2.mean), max(m1.mean, m2.mean)
        assert lo - 1e-12 <= out.mean <= hi + 1e-12
        assert out.variance <= min(m1.variance, m2.variance) + 1e-15


def test_precision_moment_roundtrip():
    rng = np.random.default_rng(9)
    for _ in range(100):
        m = GaussianMsg(rng.normal(), rng.uniform(VARIANCE_FLOOR, 100.0))
        back = GaussianMsg.from_precision(m.precision, m.weighted_mean)
        assert back.mean == pytest.approx(m.mean, rel=1e-12, abs=1e-12)
        assert back.variance == pytest.approx(m.variance, rel=1e-12)


def test_scale_factor_values():
    # equal means, total variance 1/(2 pi): density at zero is exactly 1
    v = 1.0 / (4.0 * math.pi)
    assert scale_factor(GaussianMsg(0.3, v), GaussianMsg(0.3, v)) == pytest.approx(1.0, rel=1e-12)
    # means -1 and 1, unit variances: N(0; -2, 2), frozen from scipy.stats.norm
    assert scale_factor(GaussianMsg(-1.0, 1.0), GaussianMsg(1.0, 1.0)) == pytest.approx(
        0.10377687435514871, rel=1e-12
    )
    assert scale_factor(GaussianMsg(0.0, 1.0), GaussianMsg(0.0, 1.0)) == pytest.approx(
        1.0 / math.sqrt(4.0 * math.pi), rel=1e-12
    )


def test_scale_factor_requires_positive_variance():
    with pytest.raises(ValueError):
        scale_factor(GaussianMsg(0.0, 0.0), GaussianMsg(1.0, 0.0))


def test_msg_validation():
    with pytest.raises(ValueError):
        GaussianMsg(0.0, -1.0)
    with pytest.raises(ValueError):
        GaussianMsg(math.nan, 1.0)


def test_vec_msg_validation():
    GaussianVecMsg(np.zeros(2), np.eye(2))
    with pytest.raises(ValueError):
        GaussianVecMsg(np.zeros(2), np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(ValueError):
        GaussianVecMsg(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))  # negative eigenvalue
    with pytest.raises(ValueError):
        GaussianVecMsg(np.zeros(3), np.eye(2))
