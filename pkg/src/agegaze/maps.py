"""Human fixation maps, Gaussian-smoothed saliency maps, center maps and heat overlays.

Maps are plain ``(height, width)`` float arrays. Fixation maps hold raw
landing counts; saliency maps are max-normalized to [0, 1].
"""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

# 1 degree of visual angle at 65 cm on a 40 cm / 1280 px wide display
DEFAULT_SIGMA_PX = 37.0
REFERENCE_WIDTH_PX = 1280
OVERLAY_ALPHA = 0.5


def sigma_for_width(width: int, sigma_px: float = DEFAULT_SIGMA_PX) -> float:
    """Scale the 1-degree kernel width to an image of ``width`` pixels."""
    return sigma_px * width / REFERENCE_WIDTH_PX


def _points_xy(points) -> np.ndarray:
    pts = []
    for p in points:
        if hasattr(p, "x"):
            pts.append((p.x, p.y))
        else:
            pts.append((p[0], p[1]))
    return np.asarray(pts, dtype=int).reshape(-1, 2)


def build_fixation_map(fixations, width: int, height: int, weights=None) -> np.ndarray:
    """Count fixation landings per pixel.

    ``fixations`` may be FixationRecords or ``(x, y)`` pairs. ``weights``
    (e.g. durations) replaces the unit count per landing.
    """
    pts = _points_xy(fixations)
    fixmap = np.zeros((height, width), dtype=np.float64)
    if len(pts) == 0:
        return fixmap
    xs, ys = pts[:, 0], pts[:, 1]
    if xs.min() < 0 or ys.min() < 0 or xs.max() >= width or ys.max() >= height:
        raise ValueError(f"fixation outside {width}x{height} map")
    w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=np.float64)
    np.add.at(fixmap, (ys, xs), w)
    return fixmap


@lru_cache(maxsize=64)
def _smoothing_matrix(n: int, sigma: float) -> np.ndarray:
    # column j spreads a unit impulse at j over the n pixels; truncating at
    # 4 sigma and renormalizing each column keeps mass exactly and makes
    # interior columns identical shifts of one another
    radius = int(np.ceil(4.0 * sigma))
    d = np.arange(n)[:, None] - np.arange(n)[None, :]
    k = np.exp(-0.5 * (d / sigma) ** 2)
    k[np.abs(d) > radius] = 0.0
    k /= k.sum(axis=0, keepdims=True)
    k.setflags(write=False)
    return k


def gaussian_smooth(fixmap: np.ndarray, sigma_px: float) -> np.ndarray:
    """Mass-preserving Gaussian blur with border-renormalized kernels."""
    if not sigma_px > 0:
        raise ValueError(f"sigma_px must be positive, got {sigma_px}")
    fixmap = np.asarray(fixmap, dtype=np.float64)
    h, w = fixmap.shape
    ky = _smoothing_matrix(h, float(sigma_px))
    kx = _smoothing_matrix(w, float(sigma_px))
    rows = np.flatnonzero(fixmap.any(axis=1))
    cols = np.flatnonzero(fixmap.any(axis=0))
    if len(rows) < h // 2 or len(cols) < w // 2:
        # sparse counts: only the kernel columns of occupied rows/cols matter
        return ky[:, rows] @ fixmap[np.ix_(rows, cols)] @ kx[:, cols].T
    return ky @ fixmap @ kx.T


def max_normalize(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    top = values.max() if values.size else 0.0
    if top <= 0:
        return np.zeros_like(values)
    return values / top


def build_saliency_map(fixmap: np.ndarray, sigma_px: float = DEFAULT_SIGMA_PX) -> np.ndarray:
    """Smooth a fixation-count map and scale its peak to 1."""
    smoothed = gaussian_smooth(fixmap, sigma_px)
    if not np.any(smoothed > 0):
        log.warning("saliency map built from an empty fixation map")
        return np.zeros_like(smoothed)
    return max_normalize(smoothed)


def saliency_from_fixations(fixations, width: int, height: int,
                            sigma_px: float = DEFAULT_SIGMA_PX, weights=None) -> np.ndarray:
    return build_saliency_map(build_fixation_map(fixations, width, height, weights), sigma_px)


def _same_shape(maps: Sequence[np.ndarray]) -> None:
    shapes = {np.shape(m) for m in maps}
    if len(shapes) != 1:
        raise ValueError(f"map dimensions differ: {sorted(shapes)}")


def combine_group_maps(children: np.ndarray, adults: np.ndarray, elderly: np.ndarray) -> np.ndarray:
    """Equal-weight mean of the three group saliency maps, peak-normalized."""
    _same_shape([children, adults, elderly])
    mean = (np.asarray(children, float) + np.asarray(adults, float) + np.asarray(elderly, float)) / 3.0
    return max_normalize(mean)


def build_center_map(group_saliency_maps: Sequence[np.ndarray]) -> np.ndarray:
    """Average of one group's saliency maps over all images, peak-normalized."""
    maps = list(group_saliency_maps)
    if not maps:
        raise ValueError("center map needs at least one saliency map")
    _same_shape(maps)
    return max_normalize(np.mean(np.stack(maps).astype(np.float64), axis=0))


def jet(values: np.ndarray) -> np.ndarray:
    """Piecewise-linear jet colormap, ``(..., 3)`` floats in [0, 1]."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)[..., None]
    centers = np.array([3.0, 2.0, 1.0])
    return np.clip(1.5 - np.abs(4.0 * v - centers), 0.0, 1.0)


def render_heat_overlay(image: np.ndarray, saliency: np.ndarray, alpha: float = OVERLAY_ALPHA) -> np.ndarray:
    """Blend a jet-colored saliency map over an RGB image.

    Per pixel with map value ``m`` the output is
    ``(1 - alpha*m) * image + alpha*m * jet(m)``, so zero-saliency pixels are
    untouched and saturated ones carry the colormap at weight ``alpha``.
    """
    image = np.asarray(image)
    saliency = np.asarray(saliency, dtype=np.float64)
    if image.shape[:2] != saliency.shape:
        raise ValueError(f"image {image.shape[:2]} and map {saliency.shape} differ in size")
    as_uint8 = image.dtype == np.uint8
    rgb = image.astype(np.float64) / 255.0 if as_uint8 else image.astype(np.float64)
    m = np.clip(saliency, 0.0, 1.0)[..., None]
    out = (1.0 - alpha * m) * rgb + alpha * m * jet(saliency)
    if as_uint8:
        return np.clip(np.round(out * 255.0), 0, 255).astype(np.uint8)
    return out
