import numpy as np
import pytest

from partstickers.errors import ValidationError
from partstickers.evaluation import FeatureSet, fid, fid_from_moments


def test_identical_sets_give_zero():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(200, 8))
    assert abs(fid(FeatureSet(x), FeatureSet(x.copy()))) < 1e-6


def test_univariate_fixture_exact():
    # N(0,1) vs N(1,4): (0-1)^2 + 1 + 4 - 2*sqrt(1*4) = 2
    assert fid_from_moments([0.0], [[1.0]], [1.0], [[4.0]]) == pytest.approx(2.0, abs=1e-12)


def test_pure_translation():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(500, 5))
    shift = np.array([1.0, -2.0, 0.5, 0.0, 3.0])
    val = fid(FeatureSet(x), FeatureSet(x + shift))
    assert val == pytest.approx(float(shift @ shift), abs=1e-8)


def test_moment_level_translation_and_scale():
    d = 4
    mu = np.zeros(d)
    s1 = np.eye(d)
    s2 = 4.0 * np.eye(d)
    # per-dim: 1 + 4 - 2*2 = 1
    assert fid_from_moments(mu, s1, mu, s2) == pytest.approx(float(d), abs=1e-10)


def test_symmetry():
    rng = np.random.default_rng(2)
    a = FeatureSet(rng.normal(size=(100, 6)))
    b = FeatureSet(rng.normal(loc=0.5, scale=1.5, size=(120, 6)))
    assert fid(a, b) == pytest.approx(fid(b, a), abs=1e-9)


def test_nonnegative_on_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(5):
        a = FeatureSet(rng.normal(size=(60, 10)))
        b = FeatureSet(rng.normal(size=(60, 10)))
        assert fid(a, b) >= -1e-10


def test_correlated_gaussians_closed_form():
    # 2-D with known covariances sharing eigenvectors: Tr terms are exact
    r = np.array([[2.0, 1.0], [1.0, 2.0]])
    g = np.array([[3.0, 1.0], [1.0, 3.0]])
    # common eigvecs -> cross term = sum sqrt(lambda_i mu_i)
    expected = (2 + 1) + (3 + 1) + (2 - 1) + (3 - 1)  # traces
    expected -= 2 * (np.sqrt(3 * 4) + np.sqrt(1 * 2))
    assert fid_from_moments([0, 0], r, [0, 0], g) == pytest.approx(expected, abs=1e-10)


def test_validation_errors():
    with pytest.raises(ValidationError):
        FeatureSet(np.zeros(5))
    with pytest.raises(ValidationError):
        FeatureSet(np.array([[np.nan, 1.0]]))
    with pytest.raises(ValidationError):
        FeatureSet(np.zeros((1, 3))).moments()
    with pytest.raises(ValidationError):
        fid(FeatureSet(np.zeros((5, 3))), FeatureSet(np.zeros((5, 4))))
    with pytest.raises(ValidationError):
        fid_from_moments([0.0, 0.0], np.eye(2), [0.0], np.eye(1))
