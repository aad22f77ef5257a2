"""Per-pixel feature channels at three spatial scales and their assembly
into age-specific feature tensors.

Scale 1 is the finest band-pass level, scale 3 the coarsest. Channels that
are not tied to a pyramid level (center prior, horizon, depth, external
maps) are scale-free and always enter the tensor.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .data import GROUPS, AgeGroup
from .maps import max_normalize

log = logging.getLogger(__name__)

WORKING_SIZE = 320
SCALES = (1, 2, 3)


class FeatureConfigError(ValueError):
    pass


@dataclass
class FeatureChannel:
    name: str
    family: str
    values: np.ndarray = field(repr=False)
    scale: int | None = None
    degenerate: bool = False
    info: dict = field(default_factory=dict, repr=False)


@dataclass
class FeatureChannelSet:
    channels: list[FeatureChannel]
    absent: list[str] = field(default_factory=list)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.channels]

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels[0].values.shape

    def manifest(self) -> dict:
        return {
            "channels": [{"name": c.name, "family": c.family, "scale": c.scale} for c in self.channels],
            "families": sorted({c.family for c in self.channels}),
            "absent": list(self.absent),
        }

    def __getitem__(self, name: str) -> FeatureChannel:
        for c in self.channels:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class ScaleSelection:
    scales: Mapping[AgeGroup, frozenset]

    def __post_init__(self):
        for g, s in self.scales.items():
            if not s or not set(s) <= set(SCALES):
                raise FeatureConfigError(f"{g.value}: scales must be a nonempty subset of {SCALES}")

    @classmethod
    def default(cls) -> "ScaleSelection":
        return cls({
            AgeGroup.CHILDREN: frozenset({3}),
            AgeGroup.ADULTS: frozenset({1, 2, 3}),
            AgeGroup.ELDERLY: frozenset({2, 3}),
        })

    @classmethod
    def uniform(cls, scales: Iterable[int] = SCALES) -> "ScaleSelection":
        return cls({g: frozenset(scales) for g in GROUPS})

    def override(self, group: AgeGroup, scales: Iterable[int]) -> "ScaleSelection":
        new = dict(self.scales)
        new[group] = frozenset(scales)
        return ScaleSelection(new)

    def __getitem__(self, group: AgeGroup) -> frozenset:
        return self.scales[group]


@dataclass
class FeatureTensor:
    values: np.ndarray          # (channels, height, width)
    names: tuple[str, ...]
    group: AgeGroup | None = None

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    def pixels(self) -> np.ndarray:
        """Row per pixel (row-major), column per channel."""
        return self.values.reshape(self.n_channels, -1).T

    @property
    def manifest_hash(self) -> str:
        return manifest_hash(self.names)


def manifest_hash(names: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()[:16]


def to_float_rgb(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an RGB raster, got shape {image.shape}")
    if image.dtype == np.uint8:
        return image.astype(np.float64) / 255.0
    return image.astype(np.float64)


def to_gray(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim == 2:
        return image.astype(np.float64)
    return to_float_rgb(image).mean(axis=2)


def _level_to_scale(level: int, n_levels: int) -> int:
    return 1 + (level * len(SCALES)) // n_levels


# -- oriented band-pass energy ----------------------------------------------

@lru_cache(maxsize=8)
def _oriented_filters(shape: tuple[int, int], n_orientations: int, n_levels: int) -> np.ndarray:
    h, w = shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    radius = np.hypot(fx, fy)
    angle = np.arctan2(fy, fx)
    safe_r = np.where(radius > 0, radius, 1.0)
    bank = np.zeros((n_levels, n_orientations, h, w))
    for level in range(n_levels):
        peak = 0.25 / 2 ** level
        octave = np.log2(safe_r / peak)
        radial = np.where((np.abs(octave) < 1.0) & (radius > 0), np.cos(0.5 * np.pi * octave), 0.0)
        for k in range(n_orientations):
            # a stripe at edge angle theta has its spectrum along theta + 90 deg
            direction = np.pi * k / n_orientations + np.pi / 2
            angular = np.abs(np.cos(angle - direction)) ** (n_orientations - 1)
            bank[level, k] = radial * angular
    bank.setflags(write=False)
    return bank


def pyramid_orientation_energy(image: np.ndarray, n_orientations: int = 4,
                               n_levels: int = 3) -> list[FeatureChannel]:
    """Local energy of an undecimated oriented band-pass decomposition.

    Level ``j`` passes one octave around ``0.25 / 2**j`` cycles per pixel
    and each orientation uses a ``|cos|^(K-1)`` angular window, as in a
    steerable pyramid. Band energies are smoothed in proportion to their
    wavelength, peak-normalized, and numbered 1.. level-major; with 3
    levels the four bands of level ``j`` form scale ``j + 1``.
    """
    if n_orientations < 2 or n_levels < 3:
        raise ValueError("need at least 2 orientations and 3 levels")
    gray = to_gray(image)
    h, w = gray.shape
    min_size = 2 ** (n_levels + 2)
    if min(h, w) < min_size:
        raise ValueError(f"image {w}x{h} is smaller than the coarsest filter support ({min_size} px)")
    pad = min(h, w) // 4
    padded = np.pad(gray - gray.mean(), pad, mode="symmetric")
    spectrum = np.fft.fft2(padded)
    bank = _oriented_filters(padded.shape, n_orientations, n_levels)
    channels = []
    band = 0
    for level in range(n_levels):
        for k in range(n_orientations):
            band += 1
            response = np.real(np.fft.ifft2(spectrum * bank[level, k]))[pad:pad + h, pad:pad + w]
            energy = _clean(ndimage.gaussian_filter(response ** 2, sigma=2.0 ** (level + 1), mode="nearest"))
            deg = int(round(180.0 * k / n_orientations))
            channels.append(FeatureChannel(
                name=f"orient{deg}_l{level + 1}",
                family="orientation-energy",
                values=max_normalize(energy),
                scale=_level_to_scale(level, n_levels),
                # peak keeps raw energies comparable across bands
                info={"band": band, "level": level + 1, "orientation_deg": deg,
                      "peak_energy": float(energy.max())},
            ))
    return channels


def _clean(values: np.ndarray) -> np.ndarray:
    # round-off residue of a structureless image must stay zero rather than
    # be blown up to 1 by peak normalization
    return values if values.max(initial=0.0) > 1e-20 else np.zeros_like(values)


# -- intensity / color contrast ---------------------------------------------

def intensity_color_channels(image: np.ndarray, scales: Sequence[int] = SCALES) -> list[FeatureChannel]:
    """Center-surround contrast of intensity and two color-opponent signals.

    Intensity is the RGB mean; opponents are ``R - G`` and ``B - (R + G)/2``.
    At scale ``s`` the center is a Gaussian blur of width ``2**s`` and the
    surround one of width ``2**(s + 2)``; the rectified difference is
    peak-normalized.
    """
    rgb = to_float_rgb(image)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    signals = {
        "int": ("intensity", (r + g + b) / 3.0),
        "rg": ("color", r - g),
        "by": ("color", b - (r + g) / 2.0),
    }
    channels = []
    for s in scales:
        for key, (family, sig) in signals.items():
            center = ndimage.gaussian_filter(sig, 2.0 ** s, mode="nearest")
            surround = ndimage.gaussian_filter(sig, 2.0 ** (s + 2), mode="nearest")
            cs = np.abs(center - surround)
            cs[cs < 1e-12] = 0.0
            channels.append(FeatureChannel(f"{key}_cs_s{s}", family, max_normalize(cs), scale=s))
    return channels


# -- scale-free channels -----------------------------------------------------

def horizon_channel(image: np.ndarray, width_frac: float = 0.05) -> FeatureChannel:
    """Horizontal band around the row with the strongest horizontal edges.

    Edge energy of row ``y`` is the summed squared difference to row
    ``y - 1``. The band is a Gaussian profile over rows (std ``width_frac``
    of the height) whose un-normalized form is kept in ``info['profile']``.
    """
    gray = to_gray(image)
    h, w = gray.shape
    if h < 16:
        raise ValueError("horizon estimation needs at least 16 rows")
    energy = np.zeros(h)
    energy[1:] = np.sum(np.diff(gray, axis=0) ** 2, axis=1)
    if energy.max() <= 1e-12 * max(1.0, float(np.sum(gray ** 2))):
        return FeatureChannel("horizon", "horizon", np.zeros((h, w)), degenerate=True,
                              info={"row": None, "profile": np.zeros(h)})
    row = int(np.argmax(energy))
    sigma = width_frac * h
    ys = np.arange(h)
    profile = np.exp(-0.5 * ((ys - row) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))
    values = np.repeat(profile[:, None], w, axis=1)
    return FeatureChannel("horizon", "horizon", max_normalize(values),
                          info={"row": row, "profile": profile})


def center_prior_channel(width: int, height: int) -> FeatureChannel:
    """Isotropic Gaussian on the image center, std ``min(w, h) / 4``."""
    if width <= 0 or height <= 0:
        raise ValueError("dimensions must be positive")
    sigma = min(width, height) / 4.0
    ys, xs = np.indices((height, width), dtype=np.float64)
    r2 = (xs - (width - 1) / 2.0) ** 2 + (ys - (height - 1) / 2.0) ** 2
    return FeatureChannel("center_prior", "center-prior",
                          max_normalize(np.exp(-r2 / (2 * sigma ** 2))), info={"sigma": sigma})


def depth_channels(depth: np.ndarray | None, scales: Sequence[int] = (2,)) -> list[FeatureChannel]:
    """Near-ness (``1 - depth``) and far-ness (``depth``) maps per smoothing scale.

    ``depth`` is in [0, 1] with 0 the nearest surface. Returns an empty list
    when no depth map is available.
    """
    if depth is None:
        return []
    depth = np.clip(np.asarray(depth, dtype=np.float64), 0.0, 1.0)
    channels = []
    for s in scales:
        for name, raw in (("near", 1.0 - depth), ("far", depth)):
            sm = ndimage.gaussian_filter(raw, 2.0 ** s, mode="nearest")
            channels.append(FeatureChannel(f"depth_{name}_s{s}", "depth", max_normalize(sm),
                                           info={"smoothing_scale": s}))
    return channels


def load_external_channels(directory, image_id: str, names: Sequence[str]) -> list[FeatureChannel]:
    """Read ``<image_id>.<name>.png`` maps (16-bit grayscale) as external channels."""
    from .io import read_map16

    channels = []
    for name in names:
        path = Path(directory) / f"{image_id}.{name}.png"
        if not path.exists():
            raise FileNotFoundError(f"external channel {name!r} missing for {image_id}: {path}")
        channels.append(FeatureChannel(f"ext_{name}", "external", max_normalize(read_map16(path))))
    return channels


# -- extraction and assembly -------------------------------------------------

def _resize(values: np.ndarray, width: int, height: int) -> np.ndarray:
    if values.shape == (height, width):
        return values
    im = Image.fromarray(values.astype(np.float32), mode="F")
    return np.asarray(im.resize((width, height), Image.BILINEAR), dtype=np.float64)


def working_shape(width: int, height: int, working_size: int = WORKING_SIZE) -> tuple[int, int]:
    scale = min(1.0, working_size / max(width, height))
    return max(1, int(round(width * scale))), max(1, int(round(height * scale)))


def extract_channels(image: np.ndarray, depth: np.ndarray | None = None,
                     externals: Sequence[FeatureChannel] = (), working_size: int = WORKING_SIZE,
                     n_orientations: int = 4, n_levels: int = 3,
                     depth_scales: Sequence[int] = (2,)) -> FeatureChannelSet:
    """Compute every channel at working resolution and upsample to full size."""
    rgb = to_float_rgb(image)
    h, w = rgb.shape[:2]
    ww, wh = working_shape(w, h, working_size)
    if (ww, wh) != (w, h):
        small = np.stack([_resize(rgb[..., c], ww, wh) for c in range(3)], axis=2)
        small_depth = None if depth is None else _resize(np.asarray(depth, float), ww, wh)
    else:
        small, small_depth = rgb, depth
    channels = pyramid_orientation_energy(small, n_orientations, n_levels)
    channels += intensity_color_channels(small)
    channels.append(center_prior_channel(ww, wh))
    channels.append(horizon_channel(small))
    channels += depth_channels(small_depth, depth_scales)
    absent = [] if depth is not None else ["depth"]
    for ch in channels:
        ch.values = max_normalize(np.clip(_resize(ch.values, w, h), 0.0, None))
    for ch in externals:
        if ch.values.shape != (h, w):
            raise ValueError(f"external channel {ch.name} has shape {ch.values.shape}, expected {(h, w)}")
    channels += list(externals)
    return FeatureChannelSet(channels, absent)


def intensity_contrast_baseline(channels: FeatureChannelSet) -> np.ndarray:
    """Itti-style conspicuity sum: each of intensity, color and orientation
    is averaged over its channels, peak-normalized, and the three are summed."""
    total = np.zeros(channels.shape)
    for family in ("intensity", "color", "orientation-energy"):
        members = [c.values for c in channels.channels if c.family == family]
        if members:
            total += max_normalize(np.mean(members, axis=0))
    return max_normalize(total)


def assemble_features(channels: FeatureChannelSet, selection: ScaleSelection, group: AgeGroup,
                      exclude_families: Iterable[str] = ()) -> FeatureTensor:
    """Stack the channels the group's scale selection admits.

    Scale-tagged channels pass when their scale is selected; scale-free ones
    always pass unless their family is excluded. Channel order follows the
    channel set.
    """
    excluded = set(exclude_families)
    keep = [c for c in channels.channels
            if c.family not in excluded and (c.scale is None or c.scale in selection[group])]
    if not keep:
        raise FeatureConfigError(f"no channels left for {group.value}")
    values = np.stack([c.values for c in keep]).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise FeatureConfigError("non-finite feature values")
    return FeatureTensor(values, tuple(c.name for c in keep), group)
