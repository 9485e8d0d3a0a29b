import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partstickers.errors import ValidationError
from partstickers.evaluation import ssim


def _random_image(seed, h=32, w=32):
    return np.random.default_rng(seed).integers(0, 256, size=(h, w)).astype(np.float64)


def test_identical_images_score_exactly_one():
    img = _random_image(0)
    assert ssim(img, img) == 1.0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_self_similarity_property(seed):
    img = _random_image(seed, 24, 40)
    assert ssim(img, img) == 1.0


def test_symmetry():
    a, b = _random_image(1), _random_image(2)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_range_and_unrelated_images():
    a, b = _random_image(3), _random_image(4)
    val = ssim(a, b)
    assert -1.0 <= val <= 1.0
    assert val < 0.5


def test_constant_offset_luminance_penalty():
    a = np.full((32, 32), 100.0)
    b = np.full((32, 32), 150.0)
    # flat images: variance terms vanish, only the luminance factor remains
    c1 = (0.01 * 255) ** 2
    expected = (2 * 100 * 150 + c1) / (100**2 + 150**2 + c1)
    assert ssim(a, b) == pytest.approx(expected, rel=1e-10)


def test_inverted_image_scores_low():
    img = _random_image(5)
    assert ssim(img, 255.0 - img) < 0.0


def test_noise_monotonicity():
    img = _random_image(6)
    rng = np.random.default_rng(7)
    noise = rng.normal(0, 1, img.shape)
    scores = [ssim(img, np.clip(img + s * noise, 0, 255)) for s in (5, 20, 60)]
    assert scores[0] > scores[1] > scores[2]


def test_matches_skimage_style_reference():
    # independent dense reference: same Gaussian window, reflect padding
    from scipy.ndimage import gaussian_filter

    a, b = _random_image(8), _random_image(9)

    def blur(x):
        return gaussian_filter(x, sigma=1.5, mode="reflect", truncate=3.5)

    mu_a, mu_b = blur(a), blur(b)
    va = blur(a * a) - mu_a**2
    vb = blur(b * b) - mu_b**2
    cov = blur(a * b) - mu_a * mu_b
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    ref = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (va + vb + c2)
    )
    assert ssim(a, b) == pytest.approx(float(ref[5:-5, 5:-5].mean()), abs=1e-3)


def test_shape_validation():
    with pytest.raises(ValidationError):
        ssim(np.zeros((8, 8)), np.zeros((8, 9)))
    with pytest.raises(ValidationError):
        ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))
