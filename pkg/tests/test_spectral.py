"""Transform and frequency-band mask tests.

The transform is checked against a from-scratch O(N^4) double-summation
implementation of the orthonormal type-II cosine transform; band masks are
checked against brute-force enumeration of the anti-diagonal ordering.
"""

import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fba2d import build_mask, dct2, idct2, sample_masked_direction


def naive_dct2_channel(block):
    """Direct double-summation orthonormal type-II DCT of one 2-D channel."""
    height, width = block.shape
    out = np.zeros((height, width))
    for u in range(height):
        for v in range(width):
            acc = 0.0
            for i in range(height):
                for j in range(width):
                    acc += (
                        block[i, j]
                        * math.cos(math.pi * (2 * i + 1) * u / (2 * height))
                        * math.cos(math.pi * (2 * j + 1) * v / (2 * width))
                    )
            su = math.sqrt(1.0 / height) if u == 0 else math.sqrt(2.0 / height)
            sv = math.sqrt(1.0 / width) if v == 0 else math.sqrt(2.0 / width)
            out[u, v] = su * sv * acc
    return out


def brute_low_band(height, width, count):
    """First ``count`` positions by ascending i+j, ties by smaller row index."""
    positions = sorted(
        ((i, j) for i in range(height) for j in range(width)),
        key=lambda p: (p[0] + p[1], p[0]),
    )
    return set(positions[:count])


def brute_high_band(height, width, count):
    """First ``count`` positions by descending i+j, ties by larger row index."""
    positions = sorted(
        ((i, j) for i in range(height) for j in range(width)),
        key=lambda p: (-(p[0] + p[1]), -p[0]),
    )
    return set(positions[:count])


def mask_positions(band):
    return set(zip(*np.nonzero(band)))


# --------------------------------------------------------------- transform


def test_transform_matches_naive_double_loop_on_random_8x8():
    rng = np.random.default_rng(1)
    for _ in range(3):
        image = rng.uniform(0.0, 1.0, (8, 8, 1))
        fast = dct2(image)[:, :, 0]
        slow = naive_dct2_channel(image[:, :, 0])
        npt.assert_allclose(fast, slow, rtol=0.0, atol=1e-9)


def test_transform_matches_naive_double_loop_on_corner_impulse():
    image = np.zeros((8, 8, 1))
    image[0, 0, 0] = 1.0
    fast = dct2(image)[:, :, 0]
    slow = naive_dct2_channel(image[:, :, 0])
    npt.assert_allclose(fast, slow, rtol=0.0, atol=1e-9)


def test_constant_image_transforms_to_pure_dc():
    value = 0.37
    image = np.full((16, 16, 3), value)
    spectrum = dct2(image)
    for channel in range(3):
        assert spectrum[0, 0, channel] == pytest.approx(value * 16.0, abs=1e-9)
    off_dc = spectrum.copy()
    off_dc[0, 0, :] = 0.0
    assert np.max(np.abs(off_dc)) <= 1e-9


def test_zero_spectrum_decodes_to_zero_image():
    assert np.all(idct2(np.zeros((8, 8, 1))) == 0.0)


def test_dc_only_spectrum_decodes_to_constant_image():
    spectrum = np.zeros((8, 16, 1))
    spectrum[0, 0, 0] = 3.0
    image = idct2(spectrum)
    npt.assert_allclose(image, 3.0 / math.sqrt(8 * 16), rtol=0.0, atol=1e-12)


def test_image_roundtrip_is_identity():
    rng = np.random.default_rng(2)
    for _ in range(10):
        image = rng.uniform(0.0, 1.0, (64, 64, 3))
        assert np.max(np.abs(idct2(dct2(image)) - image)) <= 1e-6


def test_spectrum_roundtrip_is_identity():
    rng = np.random.default_rng(3)
    spectrum = rng.normal(0.0, 5.0, (32, 16, 2))
    assert np.max(np.abs(dct2(idct2(spectrum)) - spectrum)) <= 1e-6


def test_transform_preserves_energy():
    rng = np.random.default_rng(4)
    for shape in ((32, 32, 1), (64, 64, 3), (16, 48, 1)):
        for _ in range(5):
            image = rng.uniform(0.0, 1.0, shape)
            image_norm = np.linalg.norm(image)
            spectrum_norm = np.linalg.norm(dct2(image))
            assert abs(spectrum_norm - image_norm) <= 1e-6 * image_norm


def test_transform_is_linear():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(24, 24, 1))
    y = rng.normal(size=(24, 24, 1))
    a, b = 2.5, -1.3
    combined = dct2(a * x + b * y)
    separate = a * dct2(x) + b * dct2(y)
    assert np.max(np.abs(combined - separate)) <= 1e-9


def test_transform_promotes_2d_input_to_single_channel():
    image = np.random.default_rng(6).uniform(0.0, 1.0, (8, 8))
    assert dct2(image).shape == (8, 8, 1)


# -------------------------------------------------------------------- masks


def test_low_band_on_8x8_matches_brute_enumeration():
    mask = build_mask((8, 8), 0.1, 0.0)
    expected = brute_low_band(8, 8, 7)  # ceil(0.1 * 64) = 7
    assert mask_positions(mask.low_band) == expected
    assert mask.count == 7
    assert not mask.high_band.any()
    # The seventh position starts the i+j = 3 anti-diagonal at the smallest row.
    assert expected == {(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0), (0, 3)}


def test_both_bands_on_64x64_are_disjoint_with_exact_counts():
    mask = build_mask((64, 64), 0.1, 0.1)
    assert int(mask.low_band.sum()) == 410  # ceil(0.1 * 4096)
    assert int(mask.high_band.sum()) == 410
    assert mask.count == 820
    assert not (mask.low_band & mask.high_band).any()
    assert mask_positions(mask.low_band) == brute_low_band(64, 64, 410)
    assert mask_positions(mask.high_band) == brute_high_band(64, 64, 410)


def test_full_low_fraction_selects_every_position():
    mask = build_mask((8, 8), 1.0, 0.0)
    assert mask.count == 64
    assert mask.selected.all()


def test_high_band_tie_breaking_prefers_larger_row():
    mask = build_mask((3, 3), 0.0, 2.0 / 9.0)
    # Descending order: (2,2) alone on i+j=4, then the i+j=3 tie goes to (2,1).
    assert mask_positions(mask.high_band) == {(2, 2), (2, 1)}


def test_mask_rejects_invalid_fractions():
    with pytest.raises(ValueError):
        build_mask((8, 8), -0.1, 0.0)
    with pytest.raises(ValueError):
        build_mask((8, 8), 0.0, 1.2)
    with pytest.raises(ValueError):
        build_mask((8, 8), 0.7, 0.4)


def test_mask_truncates_high_band_when_ceilings_collide():
    mask = build_mask((3, 3), 0.5, 0.5)
    assert int(mask.low_band.sum()) == 5  # ceil(4.5)
    assert int(mask.high_band.sum()) == 4  # truncated from ceil(4.5)
    assert not (mask.low_band & mask.high_band).any()
    assert mask.selected.all()


@settings(max_examples=60, deadline=None)
@given(
    height=st.integers(min_value=8, max_value=48),
    width=st.integers(min_value=8, max_value=48),
    low=st.floats(min_value=0.0, max_value=1.0),
    high=st.floats(min_value=0.0, max_value=1.0),
)
def test_mask_bands_always_disjoint_and_sized_by_ceiling(height, width, low, high):
    if low + high > 1.0:
        return
    mask = build_mask((height, width), low, high)
    total = height * width
    n_low = int(np.ceil(low * total))
    n_high = min(int(np.ceil(high * total)), total - n_low)
    assert int(mask.low_band.sum()) == n_low
    assert int(mask.high_band.sum()) == n_high
    assert not (mask.low_band & mask.high_band).any()
    assert np.array_equal(mask.selected, mask.low_band | mask.high_band)
    assert mask_positions(mask.low_band) == brute_low_band(height, width, n_low)
    assert mask_positions(mask.high_band) == brute_high_band(height, width, n_high)


@settings(max_examples=40, deadline=None)
@given(
    height=st.integers(min_value=32, max_value=64),
    width=st.integers(min_value=32, max_value=64),
    low=st.floats(min_value=0.0, max_value=0.6),
    high=st.floats(min_value=0.0, max_value=0.4),
)
def test_mask_selected_share_tracks_requested_fractions(height, width, low, high):
    mask = build_mask((height, width), low, high)
    share = mask.count / (height * width)
    assert abs(share - (low + high)) <= 0.02


# ---------------------------------------------------------------- sampling


def test_sampled_direction_is_unit_norm_and_zero_off_mask():
    rng = np.random.default_rng(7)
    mask = build_mask((16, 16), 0.2, 0.1)
    for channels in (1, 3):
        direction = sample_masked_direction(mask, channels, rng)
        assert direction.shape == (16, 16, channels)
        assert np.linalg.norm(direction) == pytest.approx(1.0, abs=1e-12)
        assert np.all(direction[~mask.selected, :] == 0.0)


def test_sampled_direction_is_deterministic_for_a_fixed_seed():
    mask = build_mask((16, 16), 0.1, 0.1)
    first = sample_masked_direction(mask, 3, np.random.default_rng(123))
    second = sample_masked_direction(mask, 3, np.random.default_rng(123))
    assert np.array_equal(first, second)


def test_single_position_mask_yields_unit_vector_on_that_position():
    mask = build_mask((8, 8), 1.0 / 64.0, 0.0)  # exactly the corner position
    direction = sample_masked_direction(mask, 1, np.random.default_rng(8))
    assert abs(abs(direction[0, 0, 0]) - 1.0) <= 1e-12
    zeroed = direction.copy()
    zeroed[0, 0, 0] = 0.0
    assert np.all(zeroed == 0.0)


def test_empty_mask_is_rejected():
    mask = build_mask((8, 8), 0.0, 0.0)
    with pytest.raises(ValueError):
        sample_masked_direction(mask, 1, np.random.default_rng(9))


def test_nonpositive_channel_count_is_rejected():
    mask = build_mask((8, 8), 0.5, 0.0)
    with pytest.raises(ValueError):
        sample_masked_direction(mask, 0, np.random.default_rng(10))
