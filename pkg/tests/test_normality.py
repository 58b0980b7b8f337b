import numpy as np
import pytest
from scipy import stats

from hostcd.normality import shapiro_wilk_w, sw_coefficients


def test_three_point_sample_is_perfectly_normal():
    # exact n=3 weights (-1/sqrt2, 0, 1/sqrt2): numerator 2, denominator 2
    a = sw_coefficients(3)
    np.testing.assert_allclose(a, [-np.sqrt(0.5), 0, np.sqrt(0.5)])
    assert shapiro_wilk_w([-1.0, 0.0, 1.0]).w == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 11, 50, 501, 5000])
def test_coefficients_antisymmetric_unit(n):
    a = sw_coefficients(n)
    np.testing.assert_allclose(a + a[::-1], 0, atol=1e-12)
    assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(a) >= 0)


@pytest.mark.parametrize("c,b", [(3.0, 1.0), (-2.0, 5.0), (1e-3, -7.0), (-1e4, 0.0)])
def test_affine_invariance(c, b):
    u = np.random.default_rng(1).standard_normal(200)
    assert shapiro_wilk_w(c * u + b).w == pytest.approx(shapiro_wilk_w(u).w, rel=1e-12)


def test_permutation_invariance():
    u = np.random.default_rng(2).exponential(size=300)
    v = np.random.default_rng(3).permutation(u)
    assert shapiro_wilk_w(u).w == shapiro_wilk_w(v).w


def test_agrees_with_reference_implementation():
    rng = np.random.default_rng(20)
    x = rng.standard_normal(20)
    # scipy's swilk (a Fortran port of the same approximation) as oracle
    assert shapiro_wilk_w(x).w == pytest.approx(stats.shapiro(x).statistic, abs=1e-3)


def test_errors():
    with pytest.raises(ValueError):
        shapiro_wilk_w([1.0, 2.0])
    with pytest.raises(ValueError):
        shapiro_wilk_w(np.ones(10))
    with pytest.raises(ValueError):
        shapiro_wilk_w([0.0, 1.0, np.nan])


def test_large_samples_are_subsampled_deterministically():
    x = np.random.default_rng(4).standard_normal(8000)
    a = shapiro_wilk_w(x, seed=5)
    assert a.n == 5000
    assert a == shapiro_wilk_w(x, seed=5)


def test_normal_beats_uniform():
    rng = np.random.default_rng(6)
    wn = [shapiro_wilk_w(rng.standard_normal(500)).w for _ in range(200)]
    wu = [shapiro_wilk_w(rng.uniform(size=500)).w for _ in range(200)]
    assert np.median(wn) > np.median(wu)
