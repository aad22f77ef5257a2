"""Synthetic stimuli and observers with planted age-style viewing biases.

Each stimulus is a textured background carrying a few Gaussian blobs. Every
blob sits on a near or far depth plane and gets a hidden interest weight
that is not visible in the pixels; the attention surface is the
interest-weighted blob mixture. Observers sample fixations from that
surface reshaped by three knobs: a center pull, a near/far preference
and an exploration temperature.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .data import CATEGORIES, GROUPS, AgeGroup, FixationRecord, GazeDataset, ImageInfo, StimulusCategory
from .io import MASK_BACKGROUND, MASK_FOREGROUND, write_depth, write_mask, write_rgb

NEAR_DEPTH, FAR_DEPTH = 0.05, 0.95
SURFACE_FLOOR = 0.02
MASK_RADIUS = 2.5          # in blob sigmas
CENTER_SIGMA_FRAC = 0.125  # planted central Gaussian, fraction of the short side


@dataclass(frozen=True)
class ObserverProfile:
    """Generative viewing knobs for one observer.

    ``center_strength`` in [0, 1] raises a central Gaussian to that power;
    ``foreground_pref`` in [-1, 1] weights near (positive) or far (negative)
    surfaces; ``explorativeness_temp`` > 0 flattens (large) or sharpens
    (small) the attention surface.
    """

    center_strength: float = 0.0
    foreground_pref: float = 0.0
    explorativeness_temp: float = 1.0
    n_fixations: int = 15
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.center_strength <= 1.0:
            raise ValueError("center_strength must be in [0, 1]")
        if not -1.0 <= self.foreground_pref <= 1.0:
            raise ValueError("foreground_pref must be in [-1, 1]")
        if not self.explorativeness_temp > 0:
            raise ValueError("explorativeness_temp must be positive")
        if self.n_fixations < 1:
            raise ValueError("n_fixations must be at least 1")


DEFAULT_PROFILES = {
    AgeGroup.CHILDREN: ObserverProfile(center_strength=0.6, foreground_pref=0.6, explorativeness_temp=0.6),
    AgeGroup.ADULTS: ObserverProfile(center_strength=0.1, foreground_pref=0.0, explorativeness_temp=1.6),
    AgeGroup.ELDERLY: ObserverProfile(center_strength=0.3, foreground_pref=-0.6, explorativeness_temp=1.0),
}
DEFAULT_GROUP_SIZES = {AgeGroup.CHILDREN: 18, AgeGroup.ADULTS: 23, AgeGroup.ELDERLY: 17}


@dataclass(frozen=True)
class Blob:
    x: float
    y: float
    sigma: float
    color: tuple[float, float, float]
    contrast: float
    interest: float
    near: bool


@dataclass
class Stimulus:
    image: np.ndarray = field(repr=False)       # (h, w, 3) uint8
    depth: np.ndarray = field(repr=False)       # [0, 1], 0 nearest
    mask: np.ndarray = field(repr=False)        # 0 / 1 (F) / 2 (B)
    surface: np.ndarray = field(repr=False)     # sums to 1
    blobs: tuple[Blob, ...] = ()
    category: StimulusCategory = StimulusCategory.NATURALS


def _rng(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng([seed] + [zlib.crc32(str(k).encode("utf-8")) for k in keys])


def _blob_profile(blob: Blob, width: int, height: int) -> np.ndarray:
    ys, xs = np.indices((height, width), dtype=np.float64)
    return np.exp(-((xs - blob.x) ** 2 + (ys - blob.y) ** 2) / (2 * blob.sigma ** 2))


def _smooth_noise(rng, width, height, sigma) -> np.ndarray:
    n = ndimage.gaussian_filter(rng.standard_normal((height, width)), sigma, mode="wrap")
    n -= n.min()
    return n / max(n.max(), 1e-12)


def _pink_noise(rng, width, height) -> np.ndarray:
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    f = np.hypot(fx, fy)
    f[0, 0] = 1.0
    spec = (rng.standard_normal((height, width)) + 1j * rng.standard_normal((height, width))) / f
    spec[0, 0] = 0.0
    n = np.real(np.fft.ifft2(spec))
    n -= n.min()
    return n / max(n.max(), 1e-12)


def _background(rng, width, height, category: StimulusCategory) -> np.ndarray:
    if category == StimulusCategory.NATURALS:
        base = _smooth_noise(rng, width, height, max(width, height) / 12)
        tint = np.array([0.35, 0.5, 0.3])
        return 0.25 + 0.35 * base[..., None] * tint / tint.max()
    if category == StimulusCategory.MANMADE:
        img = np.empty((height, width, 3))
        horizon = int(rng.uniform(0.35, 0.6) * height)
        img[:horizon] = (0.55, 0.6, 0.7)
        img[horizon:] = (0.4, 0.38, 0.36)
        for _ in range(rng.integers(2, 5)):
            x0 = int(rng.uniform(0, width * 0.9))
            bw = int(rng.uniform(0.05, 0.15) * width)
            top = int(rng.uniform(0.1, 0.9) * horizon)
            shade = rng.uniform(0.3, 0.6)
            img[top:horizon, x0:x0 + bw] = shade
        return img
    noise = np.stack([_pink_noise(rng, width, height) for _ in range(3)], axis=2)
    return 0.2 + 0.4 * noise


def generate_stimulus(width: int, height: int, n_blobs: int, seed: int,
                      category: StimulusCategory = StimulusCategory.NATURALS,
                      placement: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)) -> Stimulus:
    """Random scene with ``n_blobs`` blobs on near/far depth planes.

    Blob centers are drawn inside ``placement`` = (x0, y0, x1, y1), given as
    fractions of the canvas.
    """
    if n_blobs < 1:
        raise ValueError("n_blobs must be at least 1")
    rng = _rng(seed, "stimulus", category.value)
    short = min(width, height)
    sigmas = rng.uniform(0.04, 0.07, size=n_blobs) * short
    radii = MASK_RADIUS * sigmas
    if 2 * radii.max() >= short:
        raise ValueError(f"blobs do not fit a {width}x{height} canvas")
    x0, y0, x1, y1 = placement
    placed = []
    for r in radii:
        lo_x, hi_x = max(r, x0 * (width - 1)), min(width - 1 - r, x1 * (width - 1))
        lo_y, hi_y = max(r, y0 * (height - 1)), min(height - 1 - r, y1 * (height - 1))
        if lo_x > hi_x or lo_y > hi_y:
            raise ValueError(f"blobs do not fit the placement box on a {width}x{height} canvas")
        for _ in range(2000):
            x = rng.uniform(lo_x, hi_x)
            y = rng.uniform(lo_y, hi_y)
            if all(math.hypot(x - px, y - py) >= r + pr for px, py, pr in placed):
                placed.append((x, y, r))
                break
        else:
            raise ValueError(f"{n_blobs} blobs do not fit a {width}x{height} canvas")
    near = rng.random(n_blobs) < 0.5
    if n_blobs >= 2 and (near.all() or not near.any()):
        near[rng.integers(n_blobs)] = not near[0]
    blobs = []
    for (x, y, _), s, nr in zip(placed, sigmas, near):
        hue = rng.random(3)
        color = tuple(float(c) for c in hue / max(hue.max(), 1e-6))
        blobs.append(Blob(x, y, float(s), color, float(rng.uniform(0.6, 1.0)),
                          float(rng.uniform(0.2, 1.0)), bool(nr)))

    img = _background(rng, width, height, category)
    ys = np.arange(height, dtype=np.float64)
    # ground plane: top of the frame is farthest
    depth = np.repeat((1.0 - 0.4 * ys / max(height - 1, 1))[:, None], width, axis=1)
    mask = np.zeros((height, width), dtype=np.uint8)
    yy, xx = np.indices((height, width), dtype=np.float64)
    for b in blobs:
        g = _blob_profile(b, width, height)
        a = (b.contrast * g)[..., None]
        img = img * (1 - a) + a * np.asarray(b.color)
        disc = (xx - b.x) ** 2 + (yy - b.y) ** 2 <= (MASK_RADIUS * b.sigma) ** 2
        depth[disc] = NEAR_DEPTH if b.near else FAR_DEPTH
        mask[disc] = MASK_FOREGROUND if b.near else MASK_BACKGROUND
    image = np.clip(np.round(np.clip(img, 0, 1) * 255), 0, 255).astype(np.uint8)
    stim = Stimulus(image, depth, mask, np.zeros((height, width)), tuple(blobs), category)
    stim.surface = attention_surface(stim)
    return stim


def attention_surface(stimulus: Stimulus, weights: Sequence[float] | None = None,
                      floor: float = SURFACE_FLOOR) -> np.ndarray:
    """Interest-weighted blob mixture plus a uniform floor, summing to 1."""
    h, w = stimulus.depth.shape
    weights = [b.interest for b in stimulus.blobs] if weights is None else list(weights)
    mix = np.zeros((h, w))
    for b, wt in zip(stimulus.blobs, weights):
        g = _blob_profile(b, w, h)
        mix += wt * g / g.sum()
    total = mix.sum()
    if total > 0:
        mix /= total
    surface = (1 - floor) * mix + floor / mix.size
    return surface / surface.sum()


def fixation_density(profile: ObserverProfile, surface: np.ndarray, depth: np.ndarray) -> np.ndarray:
    h, w = surface.shape
    top = surface.max()
    if not top > 0:
        raise ValueError("sampling density is zero everywhere")
    s = surface / top
    density = np.ones_like(s) if math.isinf(profile.explorativeness_temp) else s ** (1.0 / profile.explorativeness_temp)
    if profile.center_strength > 0:
        sigma = CENTER_SIGMA_FRAC * min(w, h)
        ys, xs = np.indices((h, w), dtype=np.float64)
        r2 = (xs - (w - 1) / 2) ** 2 + (ys - (h - 1) / 2) ** 2
        density = density * np.exp(-r2 / (2 * sigma ** 2)) ** profile.center_strength
    beta = profile.foreground_pref
    if beta > 0:
        density = density * (1.0 - depth) ** beta
    elif beta < 0:
        density = density * depth ** (-beta)
    return density


def sample_fixations(profile: ObserverProfile, surface: np.ndarray, depth: np.ndarray,
                     width: int, height: int, observer_id: str = "obs", group: AgeGroup = AgeGroup.ADULTS,
                     image_id: str = "img") -> list[FixationRecord]:
    """Draw ``profile.n_fixations`` landings from the profile-shaped surface."""
    surface = np.asarray(surface, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if surface.shape != (height, width) or depth.shape != (height, width):
        raise ValueError("surface and depth must match the image size")
    return _draw(profile, fixation_density(profile, surface, depth), observer_id, group, image_id)


def _draw(profile: ObserverProfile, density: np.ndarray, observer_id: str, group: AgeGroup,
          image_id: str) -> list[FixationRecord]:
    width = density.shape[1]
    density = density.ravel()
    total = density.sum()
    if not total > 0 or not np.isfinite(total):
        raise ValueError("sampling density is zero everywhere")
    rng = _rng(profile.seed, observer_id, image_id)
    idx = rng.choice(density.size, size=profile.n_fixations, p=density / total)
    durations = rng.gamma(4.0, 60.0, size=profile.n_fixations)
    return [
        FixationRecord(observer_id=observer_id, group=group, image_id=image_id,
                       x=int(i % width), y=int(i // width), index=k, duration_ms=round(float(d), 3))
        for k, (i, d) in enumerate(zip(idx, durations))
    ]


@dataclass
class SyntheticCohort:
    dataset: GazeDataset
    stimuli: dict[str, Stimulus] = field(repr=False)
    group_surfaces: dict[str, dict[AgeGroup, np.ndarray]] = field(repr=False)
    profiles: dict[AgeGroup, ObserverProfile] = field(default_factory=dict)
    seed: int = 0


def generate_cohort(n_images: int = 64, width: int = 320, height: int = 240,
                    group_sizes: Mapping[AgeGroup, int] | None = None,
                    profiles: Mapping[AgeGroup, ObserverProfile] | None = None,
                    seed: int = 0, n_blobs: tuple[int, int] = (3, 6),
                    group_focus: float | None = 0.5,
                    categories: Sequence[StimulusCategory] = CATEGORIES,
                    placement: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)) -> SyntheticCohort:
    """Stimuli and fixations for three age groups.

    With ``group_focus`` set, each group re-weights the blobs of every image
    by its own Gamma(``group_focus``) factors, so groups attend to different
    objects (smaller values make groups more distinct). ``None`` gives all
    groups the same surface. Categories are assigned round-robin;
    ``placement`` restricts blob centers as in :func:`generate_stimulus`.
    """
    group_sizes = dict(DEFAULT_GROUP_SIZES if group_sizes is None else group_sizes)
    profiles = dict(DEFAULT_PROFILES if profiles is None else profiles)
    images, stimuli, surfaces = [], {}, {}
    for k in range(n_images):
        image_id = f"img{k:03d}"
        cat = categories[k % len(categories)]
        nb = int(_rng(seed, "nblobs", image_id).integers(n_blobs[0], n_blobs[1] + 1))
        stim = generate_stimulus(width, height, nb, zlib.crc32(f"{seed}/{image_id}".encode()), cat,
                                 placement)
        stimuli[image_id] = stim
        images.append(ImageInfo(image_id, cat, width, height))
        surfaces[image_id] = {}
        for g in GROUPS:
            if group_focus is None:
                surfaces[image_id][g] = stim.surface
            else:
                factors = _rng(seed, "focus", image_id, g.value).gamma(group_focus, size=len(stim.blobs))
                weights = [b.interest * f for b, f in zip(stim.blobs, factors)]
                surfaces[image_id][g] = attention_surface(stim, weights)
    # members of a group differ only in their sampling seed, so each
    # (image, group) density is computed once
    densities = {i.image_id: {g: fixation_density(profiles[g], surfaces[i.image_id][g],
                                                  stimuli[i.image_id].depth)
                              for g in GROUPS if group_sizes.get(g, 0)} for i in images}
    observers, fixations = [], []
    for g in GROUPS:
        for n in range(group_sizes.get(g, 0)):
            obs = f"{g.value[0]}{n:02d}"
            observers.append((obs, g))
            base = profiles[g]
            prof = ObserverProfile(base.center_strength, base.foreground_pref, base.explorativeness_temp,
                                   base.n_fixations, seed=zlib.crc32(f"{seed}/{obs}".encode()))
            for info in images:
                fixations += _draw(prof, densities[info.image_id][g], obs, g, info.image_id)
    ds = GazeDataset(images=images, fixations=fixations, observers=observers)
    return SyntheticCohort(ds, stimuli, surfaces, profiles, seed)


def write_cohort(cohort: SyntheticCohort, out_dir) -> GazeDataset:
    """Write rasters, fixation CSV and manifest; returns the dataset with file paths."""
    from .data import save_manifest

    out = Path(out_dir)
    for sub in ("images", "depth", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    images = []
    for info in cohort.dataset.images:
        stim = cohort.stimuli[info.image_id]
        ip = out / "images" / f"{info.image_id}.png"
        dp = out / "depth" / f"{info.image_id}.png"
        mp = out / "masks" / f"{info.image_id}.pgm"
        write_rgb(ip, stim.image)
        write_depth(dp, stim.depth)
        write_mask(mp, stim.mask)
        images.append(ImageInfo(info.image_id, info.category, info.width, info.height, ip, dp, mp))
    ds = GazeDataset(images=images, fixations=cohort.dataset.fixations, observers=cohort.dataset.observers)
    save_manifest(out / "manifest.json", ds)
    return ds
