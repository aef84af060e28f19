import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from docback.color import (BLACK, WHITE, Srgb, contrast_ratio, contrast_ratio_array,
                           relative_luminance, relative_luminance_array, srgb_to_linear,
                           srgb_to_linear_array)

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_linear_fixed_points():
    assert srgb_to_linear(0.0) == 0.0
    assert srgb_to_linear(1.0) == 1.0


def test_linear_branch_boundary():
    assert srgb_to_linear(0.04045) == pytest.approx(0.0031308, abs=1e-7)
    assert srgb_to_linear(0.04045) == 0.04045 / 12.92


def test_linear_clamps_out_of_range():
    assert srgb_to_linear(-0.5) == 0.0
    assert srgb_to_linear(1.7) == 1.0
    with pytest.raises(ValueError):
        srgb_to_linear(float("nan"))


@pytest.mark.parametrize("color, expected", [
    (WHITE, 1.0),
    (BLACK, 0.0),
    (Srgb(0, 1, 0), 0.7152),
    (Srgb(1, 0, 0), 0.2126),
    (Srgb(0, 0, 1), 0.0722),
])
def test_relative_luminance(color, expected):
    assert relative_luminance(color) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("l1, l2, expected", [
    (1.0, 0.0, 21.0),
    (0.5, 0.05, 5.5),
    (0.3, 0.3, 1.0),
])
def test_contrast_ratio(l1, l2, expected):
    assert contrast_ratio(l1, l2) == pytest.approx(expected, abs=1e-9)


@given(unit, unit)
def test_contrast_symmetric_and_bounded(a, b):
    cr = contrast_ratio(a, b)
    assert cr == contrast_ratio(b, a)
    assert 1.0 <= cr <= 21.0


@given(unit, unit)
def test_linear_monotone(a, b):
    lo, hi = sorted((a, b))
    assert srgb_to_linear(lo) <= srgb_to_linear(hi)


@given(unit, unit, unit, unit)
def test_luminance_monotone_per_channel(r, g, b, bump):
    base = relative_luminance(Srgb(r, g, b))
    assert relative_luminance(Srgb(min(1, r + bump), g, b)) >= base
    assert relative_luminance(Srgb(r, min(1, g + bump), b)) >= base
    assert relative_luminance(Srgb(r, g, min(1, b + bump))) >= base


def test_array_versions_match_scalar():
    rng = np.random.default_rng(3)
    rgb = rng.random((50, 3))
    lum = relative_luminance_array(rgb)
    for row, l in zip(rgb, lum):
        assert l == pytest.approx(relative_luminance(Srgb(*row)), abs=1e-12)
    c = rng.random(200)
    assert np.allclose(srgb_to_linear_array(c), [srgb_to_linear(v) for v in c], atol=1e-15)
    a, b = rng.random(20), rng.random(20)
    assert np.allclose(contrast_ratio_array(a, b), [contrast_ratio(x, y) for x, y in zip(a, b)])


def test_hex_round_trip():
    c = Srgb.from_hex("#3366cc")
    assert c.to_hex() == "#3366cc"
    assert Srgb.from_hex("fff") == WHITE
    with pytest.raises(ValueError):
        Srgb.from_hex("#12345")


def test_srgb_clamps():
    c = Srgb(-1, 0.5, 3)
    assert c.as_tuple() == (0.0, 0.5, 1.0)
    assert not math.isnan(relative_luminance(c))
