"""Age-group gaze measures: depth bias, explorativeness, inter-individual
similarity, center bias and the split-half upper performance limit."""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import ndimage

from .data import GROUPS, AgeGroup, GazeDataset, StimulusCategory
from .io import MASK_BACKGROUND, MASK_FOREGROUND
from .maps import (DEFAULT_SIGMA_PX, build_center_map, combine_group_maps,
                   saliency_from_fixations)
from .roc import MapRanker, UndefinedScoreError, auc_score

log = logging.getLogger(__name__)

FOREGROUND, BACKGROUND, UNLABELED = "F", "B", "U"
DEFAULT_THRESHOLDS = (5.0, 10.0)


def _rng_for(seed: int, key: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(key.encode("utf-8"))])


def group_saliency_map(dataset: GazeDataset, image_id: str, group: AgeGroup,
                       sigma_px: float = DEFAULT_SIGMA_PX, drop_first: bool = False) -> np.ndarray:
    info = dataset.image(image_id)
    fix = dataset.fixations_for(image_id, group=group, drop_first=drop_first)
    return saliency_from_fixations(fix, info.width, info.height, sigma_px)


# -- explorativeness ---------------------------------------------------------

def quantize(values: np.ndarray, n_bins: int = 256) -> np.ndarray:
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.minimum((v * n_bins).astype(np.int64), n_bins - 1)


def explorativeness_entropy(saliency: np.ndarray, n_bins: int = 256) -> float:
    """First-order entropy of a map's intensity histogram, in bits.

    Computed as ``sum_l h(l) * log2(L / h(l))`` over occupied bins, where
    ``h`` counts pixels per bin and ``L`` is the pixel count. The sum is not
    divided by ``L``, so it grows with image size.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    saliency = np.asarray(saliency)
    if saliency.size == 0:
        raise ValueError("empty map")
    h = np.bincount(quantize(saliency, n_bins).ravel(), minlength=n_bins)
    h = h[h > 0].astype(np.float64)
    return float(np.sum(h * np.log2(saliency.size / h)))


# -- depth bias --------------------------------------------------------------

@dataclass
class SalientRegionSet:
    """Connected components of the top-``t_pct`` pixels, each labeled F/B/U."""

    labels: np.ndarray                # 0 = not selected, k = region k (1-based)
    region_labels: list[str]
    t_pct: float
    degenerate: bool = False

    def mask_for(self, label: str) -> np.ndarray:
        ids = [k + 1 for k, lab in enumerate(self.region_labels) if lab == label]
        return np.isin(self.labels, ids)

    @property
    def selected(self) -> np.ndarray:
        return self.labels > 0


def threshold_salient_regions(combined: np.ndarray, t_pct: float, mask: np.ndarray) -> SalientRegionSet:
    """Keep the top ``t_pct`` percent of pixels and label each 8-connected
    component with the majority foreground/background tag under ``mask``.

    Exactly ``round(L * t_pct / 100)`` pixels are kept; value ties are broken
    in row-major scan order. A component whose labeled pixels split evenly,
    or which covers no labeled pixel, stays unlabeled.
    """
    if not 0 < t_pct < 100:
        raise ValueError(f"t_pct must be in (0, 100), got {t_pct}")
    combined = np.asarray(combined, dtype=np.float64)
    mask = np.asarray(mask)
    if combined.shape != mask.shape:
        raise ValueError(f"mask {mask.shape} does not match map {combined.shape}")
    flat = combined.ravel()
    k = max(1, int(round(flat.size * t_pct / 100.0)))
    order = np.argsort(-flat, kind="stable")
    chosen = np.zeros(flat.size, dtype=bool)
    chosen[order[:k]] = True
    chosen = chosen.reshape(combined.shape)
    degenerate = bool(flat.max() == flat.min())
    if degenerate:
        log.warning("constant map: salient regions follow scan order")
    labels, n = ndimage.label(chosen, structure=np.ones((3, 3), dtype=int))
    region_labels = []
    if n:
        idx = np.arange(1, n + 1)
        n_fg = ndimage.sum(mask == MASK_FOREGROUND, labels, idx)
        n_bg = ndimage.sum(mask == MASK_BACKGROUND, labels, idx)
        for f, b in zip(np.atleast_1d(n_fg), np.atleast_1d(n_bg)):
            region_labels.append(FOREGROUND if f > b else BACKGROUND if b > f else UNLABELED)
    return SalientRegionSet(labels, region_labels, float(t_pct), degenerate)


def landing_shares(fixations, regions: SalientRegionSet) -> tuple[float, float] | None:
    """(foreground %, background %) of fixation landings; None without fixations."""
    pts = [(f.x, f.y) if hasattr(f, "x") else tuple(f) for f in fixations]
    if not pts:
        return None
    pts = np.asarray(pts, dtype=int)
    fg = regions.mask_for(FOREGROUND)[pts[:, 1], pts[:, 0]]
    bg = regions.mask_for(BACKGROUND)[pts[:, 1], pts[:, 0]]
    return 100.0 * fg.mean(), 100.0 * bg.mean()


@dataclass
class DepthBiasResult:
    # threshold -> group -> (mean foreground %, mean background %)
    summary: dict[float, dict[AgeGroup, tuple[float, float]]]
    # threshold -> group -> image_id -> (fg %, bg %)
    per_image: dict[float, dict[AgeGroup, dict[str, tuple[float, float]]]]

    def foreground(self, t: float, group: AgeGroup) -> float:
        return self.summary[t][group][0]

    def background(self, t: float, group: AgeGroup) -> float:
        return self.summary[t][group][1]


def depth_bias(dataset: GazeDataset, regions: Mapping[float, Mapping[str, SalientRegionSet]],
               drop_first: bool = False) -> DepthBiasResult:
    """Average share of each group's fixations on foreground and background regions.

    ``regions`` maps a threshold to per-image region sets. Images where a
    group has no fixations are left out of that group's average.
    """
    summary, per_image = {}, {}
    for t, by_image in regions.items():
        per_image[t] = {g: {} for g in GROUPS}
        for image_id, region_set in by_image.items():
            for g in GROUPS:
                shares = landing_shares(dataset.fixations_for(image_id, g, drop_first=drop_first),
                                        region_set)
                if shares is None:
                    log.info("no %s fixations on %s; skipped for depth bias", g.value, image_id)
                    continue
                per_image[t][g][image_id] = shares
        summary[t] = {}
        for g in GROUPS:
            vals = list(per_image[t][g].values())
            if vals:
                arr = np.asarray(vals)
                summary[t][g] = (float(arr[:, 0].mean()), float(arr[:, 1].mean()))
            else:
                summary[t][g] = (float("nan"), float("nan"))
    return DepthBiasResult(summary, per_image)


def depth_bias_analysis(dataset: GazeDataset, masks: Mapping[str, np.ndarray],
                        thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                        sigma_px: float = DEFAULT_SIGMA_PX,
                        drop_first: bool = False) -> tuple[DepthBiasResult, dict]:
    """Full depth-bias procedure over the images that carry a region mask:
    combine the three group maps, threshold at each ``t``, label, count."""
    regions = {float(t): {} for t in thresholds}
    for image_id, mask in masks.items():
        group_maps = [group_saliency_map(dataset, image_id, g, sigma_px, drop_first) for g in GROUPS]
        combined = combine_group_maps(*group_maps)
        for t in regions:
            regions[t][image_id] = threshold_salient_regions(combined, t, mask)
    return depth_bias(dataset, regions, drop_first), regions


# -- inter-individual similarity --------------------------------------------

@dataclass
class SimilarityMatrix:
    """Mean AUC of source-group individual maps predicting target-group fixations."""

    values: np.ndarray                      # [source, target], GROUPS order
    per_observer: dict[tuple[AgeGroup, AgeGroup], dict[str, float]] = field(default_factory=dict)
    category: StimulusCategory | None = None

    def __getitem__(self, key: tuple[AgeGroup, AgeGroup]) -> float:
        s, t = key
        return float(self.values[GROUPS.index(s), GROUPS.index(t)])


def _similarity_scores(dataset: GazeDataset, image_ids: Sequence[str],
                       pairs: Iterable[tuple[AgeGroup, AgeGroup]], sigma_px: float,
                       drop_first: bool) -> dict[tuple[AgeGroup, AgeGroup], dict[str, float]]:
    pairs = list(pairs)
    sources = sorted({s for s, _ in pairs}, key=GROUPS.index)
    # per (pair, observer) running list of per-image AUCs
    acc = {p: {} for p in pairs}
    for image_id in image_ids:
        info = dataset.image(image_id)
        fix = dataset.fixations_for(image_id, drop_first=drop_first)
        by_obs = {}
        for rec in fix:
            by_obs.setdefault(rec.observer_id, []).append(rec)
        for s in sources:
            targets = [t for (ss, t) in pairs if ss == s]
            for obs in dataset.observers_in(s):
                own = by_obs.get(obs)
                if not own:
                    continue
                ranker = MapRanker(saliency_from_fixations(own, info.width, info.height, sigma_px))
                for t in targets:
                    pool = [r for r in fix if r.group == t and r.observer_id != obs]
                    if not pool:
                        log.info("empty %s target pool for %s on %s", t.value, obs, image_id)
                        continue
                    try:
                        a = ranker.score(pool).value
                    except UndefinedScoreError:
                        continue
                    acc[(s, t)].setdefault(obs, []).append(a)
    return {p: {obs: float(np.mean(v)) for obs, v in by.items()} for p, by in acc.items()}


def inter_individual_similarity(dataset: GazeDataset, source_group: AgeGroup, target_group: AgeGroup,
                                image_ids: Sequence[str] | None = None,
                                sigma_px: float = DEFAULT_SIGMA_PX,
                                drop_first: bool = False) -> tuple[float, dict[str, float]]:
    """Mean over source observers of their image-averaged AUC.

    Each source observer's individual saliency map on an image is scored
    against the pooled fixations of the target group with that observer
    removed. Returns the group mean and the per-observer scores.
    """
    if not dataset.observers_in(source_group) or not dataset.observers_in(target_group):
        raise ValueError("source and target groups must both have observers")
    ids = dataset.image_ids if image_ids is None else list(image_ids)
    scores = _similarity_scores(dataset, ids, [(source_group, target_group)], sigma_px, drop_first)
    per_obs = scores[(source_group, target_group)]
    if not per_obs:
        raise UndefinedScoreError(
            f"no {source_group.value}->{target_group.value} score: every target pool was empty")
    return float(np.mean(list(per_obs.values()))), per_obs


def similarity_matrix(dataset: GazeDataset, image_ids: Sequence[str] | None = None,
                      sigma_px: float = DEFAULT_SIGMA_PX, drop_first: bool = False,
                      category: StimulusCategory | None = None) -> SimilarityMatrix:
    """All nine source/target pairs in one pass (each individual map is built once)."""
    if image_ids is None:
        image_ids = dataset.by_category(category) if category is not None else dataset.image_ids
    pairs = [(s, t) for s in GROUPS for t in GROUPS]
    scores = _similarity_scores(dataset, list(image_ids), pairs, sigma_px, drop_first)
    values = np.full((3, 3), np.nan)
    for (s, t), per_obs in scores.items():
        if per_obs:
            values[GROUPS.index(s), GROUPS.index(t)] = np.mean(list(per_obs.values()))
    return SimilarityMatrix(values, scores, category)


# -- center bias -------------------------------------------------------------

class UndefinedCentroidError(ValueError):
    pass


def map_centroid(values: np.ndarray) -> tuple[float, float]:
    """Intensity-weighted mean pixel position as (x, y)."""
    values = np.asarray(values, dtype=np.float64)
    total = values.sum()
    if not total > 0:
        raise UndefinedCentroidError("centroid of an all-zero map is undefined")
    ys, xs = np.indices(values.shape)
    return float((xs * values).sum() / total), float((ys * values).sum() / total)


def centroid_distance(center_map: np.ndarray) -> float:
    h, w = np.shape(center_map)
    cx, cy = map_centroid(center_map)
    return float(np.hypot(cx - (w - 1) / 2.0, cy - (h - 1) / 2.0))


@dataclass
class CenterBiasResult:
    centroid_distance_px: dict[AgeGroup, float]
    center_auc: dict[AgeGroup, float]
    center_maps: dict[AgeGroup, np.ndarray] = field(repr=False, default_factory=dict)


def center_bias(dataset: GazeDataset, group: AgeGroup, image_ids: Sequence[str] | None = None,
                sigma_px: float = DEFAULT_SIGMA_PX, drop_first: bool = False,
                maps: Mapping[str, np.ndarray] | None = None) -> tuple[float, float, np.ndarray]:
    """Centroid distance and leave-one-image-out center-map AUC for one group.

    Returns ``(distance_px, mean_auc, center_map)``. ``mean_auc`` is NaN when
    fewer than two images have fixations from the group. Precomputed group
    saliency maps can be passed in ``maps``.
    """
    ids = dataset.image_ids if image_ids is None else list(image_ids)
    if maps is None:
        maps = {i: group_saliency_map(dataset, i, group, sigma_px, drop_first) for i in ids}
    ids = [i for i in ids if np.any(maps[i] > 0)]
    if not ids:
        raise UndefinedCentroidError(f"no {group.value} fixations: center map is empty")
    stack = np.stack([maps[i] for i in ids])
    center = build_center_map(list(stack))
    distance = centroid_distance(center)
    aucs = []
    if len(ids) > 1:
        total = stack.sum(axis=0)
        for k, image_id in enumerate(ids):
            loo = (total - stack[k]) / (len(ids) - 1)
            if not np.any(loo > 0):
                continue
            fix = dataset.fixations_for(image_id, group, drop_first=drop_first)
            aucs.append(auc_score(loo, fix).value)
    mean_auc = float(np.mean(aucs)) if aucs else float("nan")
    return distance, mean_auc, center


def center_bias_all(dataset: GazeDataset, image_ids: Sequence[str] | None = None,
                    sigma_px: float = DEFAULT_SIGMA_PX, drop_first: bool = False) -> CenterBiasResult:
    dist, aucs, maps = {}, {}, {}
    for g in GROUPS:
        if not dataset.observers_in(g):
            continue
        dist[g], aucs[g], maps[g] = center_bias(dataset, g, image_ids, sigma_px, drop_first)
    return CenterBiasResult(dist, aucs, maps)


# -- upper performance limit -------------------------------------------------

@dataclass
class UplResult:
    # group -> category -> mean split-half AUC
    values: dict[AgeGroup, dict[StimulusCategory, float]]
    per_image: dict[AgeGroup, dict[str, float]]
    n_repetitions: int


def upper_performance_limit(dataset: GazeDataset, group: AgeGroup, image_id: str,
                            n_reps: int = 50, seed: int = 0,
                            sigma_px: float = DEFAULT_SIGMA_PX, drop_first: bool = False,
                            observer_order: Sequence[str] | None = None) -> float:
    """Split-half AUC for one image: a map from a random half of the group's
    observers predicts the pooled fixations of the other half, averaged over
    ``n_reps`` random splits."""
    info = dataset.image(image_id)
    observers = list(observer_order) if observer_order is not None else dataset.observers_in(group)
    if len(observers) < 2:
        raise ValueError(f"{group.value}: split-half needs at least two observers")
    fix = dataset.fixations_for(image_id, group, drop_first=drop_first)
    by_obs = {o: [] for o in observers}
    for rec in fix:
        if rec.observer_id in by_obs:
            by_obs[rec.observer_id].append(rec)
    rng = _rng_for(seed, f"{group.value}/{image_id}")
    half = len(observers) // 2
    scores = []
    for _ in range(n_reps):
        perm = rng.permutation(len(observers))
        first = [r for j in perm[:half] for r in by_obs[observers[j]]]
        second = [r for j in perm[half:] for r in by_obs[observers[j]]]
        if not first or not second:
            continue
        sal = saliency_from_fixations(first, info.width, info.height, sigma_px)
        scores.append(auc_score(sal, second).value)
    if not scores:
        raise UndefinedScoreError(f"{group.value} on {image_id}: no split had fixations on both halves")
    return float(np.mean(scores))


def upl_table(dataset: GazeDataset, image_ids: Sequence[str] | None = None, n_reps: int = 50,
              seed: int = 0, sigma_px: float = DEFAULT_SIGMA_PX,
              drop_first: bool = False) -> UplResult:
    ids = dataset.image_ids if image_ids is None else list(image_ids)
    values, per_image = {}, {}
    for g in GROUPS:
        if len(dataset.observers_in(g)) < 2:
            continue
        per_image[g] = {}
        for image_id in ids:
            try:
                per_image[g][image_id] = upper_performance_limit(
                    dataset, g, image_id, n_reps, seed, sigma_px, drop_first)
            except UndefinedScoreError as exc:
                log.info("%s", exc)
        values[g] = {}
        for cat in sorted({dataset.image(i).category for i in per_image[g]}, key=lambda c: c.value):
            vals = [v for i, v in per_image[g].items() if dataset.image(i).category == cat]
            values[g][cat] = float(np.mean(vals))
    return UplResult(values, per_image, n_reps)
