import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agegaze import io
from agegaze.maps import (OVERLAY_ALPHA, build_center_map, build_fixation_map, build_saliency_map,
                          combine_group_maps, gaussian_smooth, jet, max_normalize, render_heat_overlay,
                          saliency_from_fixations, sigma_for_width)


def direct_smooth(fixmap, sigma):
    # oracle: place a truncated, renormalized Gaussian at every nonzero cell
    h, w = fixmap.shape
    out = np.zeros((h, w))
    radius = int(np.ceil(4 * sigma))
    ys, xs = np.arange(h), np.arange(w)
    for y, x in zip(*np.nonzero(fixmap)):
        gy = np.exp(-0.5 * ((ys - y) / sigma) ** 2) * (np.abs(ys - y) <= radius)
        gx = np.exp(-0.5 * ((xs - x) / sigma) ** 2) * (np.abs(xs - x) <= radius)
        out += fixmap[y, x] * np.outer(gy / gy.sum(), gx / gx.sum())
    return out


def test_empty_fixation_map():
    assert not build_fixation_map([], 8, 8).any()


def test_unit_impulse():
    m = build_fixation_map([(3, 2)], 8, 8)
    assert m[2, 3] == 1 and m.sum() == 1


def test_coincident_counts():
    m = build_fixation_map([(1, 1), (1, 1), (2, 3), (4, 4), (0, 7)], 8, 8)
    assert m.max() == 2 and m.sum() == 5


def test_out_of_bounds_fixation():
    with pytest.raises(ValueError):
        build_fixation_map([(8, 0)], 8, 8)


def test_duration_weights():
    m = build_fixation_map([(1, 1), (1, 1)], 4, 4, weights=[100.0, 50.0])
    assert m[1, 1] == 150.0


def test_impulse_symmetric():
    f = np.zeros((33, 33))
    f[16, 16] = 1
    s = build_saliency_map(f, 3.0)
    assert np.unravel_index(s.argmax(), s.shape) == (16, 16)
    assert np.allclose(s, s.T) and np.allclose(s, s[::-1]) and np.allclose(s, s[:, ::-1])


def test_interior_mass_and_direct_oracle(rng):
    f = np.zeros((40, 50))
    for _ in range(6):
        f[rng.integers(15, 25), rng.integers(15, 35)] += 1
    out = gaussian_smooth(f, 2.5)
    assert abs(out.sum() - f.sum()) < 1e-9
    assert np.allclose(out, direct_smooth(f, 2.5), atol=1e-12)


def test_border_mass_and_dense_path(rng):
    f = rng.random((30, 20))
    f[0, 0] = 5.0
    out = gaussian_smooth(f, 4.0)
    assert abs(out.sum() - f.sum()) / f.sum() < 1e-9
    assert np.allclose(out, direct_smooth(f, 4.0), atol=1e-12)


def test_zero_map_and_bad_sigma():
    assert not build_saliency_map(np.zeros((5, 5)), 2.0).any()
    with pytest.raises(ValueError):
        build_saliency_map(np.ones((5, 5)), 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(-6, 6), st.integers(-6, 6))
def test_shift_equivariance(dx, dy):
    f = np.zeros((60, 60))
    f[30, 28] = 1
    f[26, 33] = 2
    g = np.roll(np.roll(f, dy, axis=0), dx, axis=1)
    a = gaussian_smooth(f, 2.0)
    b = gaussian_smooth(g, 2.0)
    assert np.allclose(np.roll(np.roll(a, dy, axis=0), dx, axis=1), b, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_max_normalize_properties(seed):
    v = np.random.default_rng(seed).random((6, 7)) * 3
    n = max_normalize(v)
    assert n.max() == 1.0
    assert np.array_equal(n == n.max(), v == v.max())


def test_sigma_scaling():
    assert sigma_for_width(1280) == 37.0
    assert sigma_for_width(320) == pytest.approx(9.25)


def test_combine_identical_and_argmax(rng):
    m = max_normalize(rng.random((10, 12)))
    assert np.allclose(combine_group_maps(m, m, m), m)
    imp = np.zeros((10, 12))
    imp[4, 7] = 1
    z = np.zeros_like(imp)
    out = combine_group_maps(z, imp, z)
    assert np.unravel_index(out.argmax(), out.shape) == (4, 7)


def test_combine_oracle_and_permutation(rng):
    a, b, c = (rng.random((9, 9)) for _ in range(3))
    mean = (a + b + c) / 3
    assert np.allclose(combine_group_maps(a, b, c), mean / mean.max(), atol=1e-12)
    assert np.allclose(combine_group_maps(a, b, c), combine_group_maps(c, a, b), atol=1e-15)
    with pytest.raises(ValueError):
        combine_group_maps(a, b, np.zeros((3, 3)))


def test_center_map_cases(rng):
    m = rng.random((8, 8))
    assert np.allclose(build_center_map([m]), m / m.max())
    assert np.allclose(build_center_map([m] * 5), m / m.max())
    with pytest.raises(ValueError):
        build_center_map([])
    p = np.zeros((20, 40))
    q = np.zeros((20, 40))
    p[10, 8] = 1
    q[10, 30] = 1
    p, q = gaussian_smooth(p, 2), gaussian_smooth(q, 2)
    raw = (p + q) / 2
    assert raw[10, 8] == pytest.approx(p[10, 8] / 2, rel=1e-6)
    out = build_center_map([p, q])
    assert out[10, 8] == pytest.approx(1.0) and out[10, 30] == pytest.approx(1.0)


def test_overlay_formula(rng):
    img = rng.integers(0, 256, (6, 5, 3)).astype(np.uint8)
    assert np.array_equal(render_heat_overlay(img, np.zeros((6, 5))), img)
    sat = render_heat_overlay(img.astype(float) / 255, np.ones((6, 5)))
    expected = (1 - OVERLAY_ALPHA) * img / 255 + OVERLAY_ALPHA * jet(np.ones((6, 5)))
    assert np.allclose(sat, expected)
    sal = np.full((6, 5), 0.5)
    sal[0, 0] = 1.0
    out = render_heat_overlay(img.astype(float) / 255, sal)
    # mid value: weight alpha * 0.5, jet(0.5) = (0.5, 1, 0.5) after clipping
    want = (1 - 0.25) * img[1, 1] / 255 + 0.25 * np.array([0.5, 1.0, 0.5])
    assert np.allclose(out[1, 1], want)
    with pytest.raises(ValueError):
        render_heat_overlay(img, np.zeros((5, 5)))


def test_saliency_from_fixations_peak():
    s = saliency_from_fixations([(5, 5), (5, 5), (20, 10)], 30, 20, 2.0)
    assert s.max() == 1.0 and np.unravel_index(s.argmax(), s.shape) == (5, 5)


def test_map16_roundtrip(tmp_path, rng):
    v = max_normalize(rng.random((7, 9)))
    io.write_map16(tmp_path / "m.png", v)
    back = io.read_map16(tmp_path / "m.png")
    assert np.allclose(back, np.round(v * 65535) / 65535)


def test_depth_and_mask_io(tmp_path, rng):
    d = rng.random((6, 8))
    io.write_depth(tmp_path / "d.png", d)
    assert np.allclose(io.read_depth(tmp_path / "d.png"), d, atol=1 / 65535)
    m = rng.integers(0, 3, (6, 8)).astype(np.uint8)
    io.write_mask(tmp_path / "m.pgm", m)
    assert np.array_equal(io.read_mask(tmp_path / "m.pgm"), m)
