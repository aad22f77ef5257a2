"""Per-age-group linear saliency model: pixel sampling, max-margin training,
prediction and center-prior blending."""

from __future__ import annotations

import json
import logging
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .data import AgeGroup
from .features import FeatureChannelSet, FeatureTensor, ScaleSelection, assemble_features, manifest_hash
from .maps import max_normalize

log = logging.getLogger(__name__)

TOP_FRACTION = 0.05
BOTTOM_FRACTION = 0.20
DEFAULT_ALPHA = {AgeGroup.CHILDREN: 0.3, AgeGroup.ELDERLY: 0.2, AgeGroup.ADULTS: 0.1}


class ModelMismatchError(ValueError):
    pass


@dataclass
class TrainingSamples:
    features: np.ndarray                 # (n, channels)
    labels: np.ndarray                   # (n,) of +1 / -1
    pixels: np.ndarray                   # (n, 2) as (x, y)
    image_ids: list[str] = field(default_factory=list)
    group: AgeGroup | None = None

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def concatenate(cls, parts: Sequence["TrainingSamples"]) -> "TrainingSamples":
        parts = [p for p in parts if len(p)]
        if not parts:
            raise ValueError("no training samples")
        return cls(
            np.concatenate([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.pixels for p in parts]),
            [i for p in parts for i in p.image_ids],
            parts[0].group,
        )


def _rng(seed: int, *keys: str) -> np.random.Generator:
    return np.random.default_rng([seed] + [zlib.crc32(k.encode("utf-8")) for k in keys])


def sample_pixels(saliency: np.ndarray, features: FeatureTensor, n_pos: int = 10, n_neg: int = 10,
                  seed: int = 0, image_id: str = "", top: float = TOP_FRACTION,
                  bottom: float = BOTTOM_FRACTION) -> TrainingSamples:
    """Draw positives from the top ``top`` fraction of a human saliency map
    and negatives from its bottom ``bottom`` fraction, uniformly and seeded.

    Cut-offs are the values of the ``ceil(top * L)``-th largest and
    ``ceil(bottom * L)``-th smallest pixels; every pixel tied with a cut-off
    is a candidate. Positives must lie strictly above the negative cut-off.
    """
    if n_pos < 1 or n_neg < 1:
        raise ValueError("sample counts must be at least 1")
    sal = np.asarray(saliency, dtype=np.float64)
    if sal.shape != features.shape:
        raise ValueError(f"saliency map {sal.shape} and features {features.shape} differ")
    flat = sal.ravel()
    ordered = np.sort(flat)
    n = flat.size
    hi_cut = ordered[n - int(np.ceil(top * n))]
    lo_cut = ordered[int(np.ceil(bottom * n)) - 1]
    pos_cand = np.flatnonzero((flat >= hi_cut) & (flat > lo_cut))
    neg_cand = np.flatnonzero(flat <= lo_cut)
    rng = _rng(seed, image_id, features.group.value if features.group else "")
    picked = []
    for cand, k, kind in ((pos_cand, n_pos, "positive"), (neg_cand, n_neg, "negative")):
        if len(cand) < k:
            log.info("%s: only %d %s candidates for %d requested", image_id or "map", len(cand), kind, k)
        picked.append(np.sort(rng.choice(cand, size=min(k, len(cand)), replace=False)))
    idx = np.concatenate(picked)
    labels = np.concatenate([np.ones(len(picked[0])), -np.ones(len(picked[1]))])
    h, w = sal.shape
    pixels = np.stack([idx % w, idx // w], axis=1)
    return TrainingSamples(features.pixels()[idx].copy(), labels, pixels,
                           [image_id] * len(idx), features.group)


@dataclass
class TrainConfig:
    lam: float = 1e-3
    epochs: int = 200
    step: float = 1.0
    backtrack: float = 0.5


@dataclass
class AgeModel:
    group: AgeGroup
    weights: np.ndarray
    bias: float
    channel_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    scales: tuple[int, ...] = (1, 2, 3)
    alpha: float = 0.0
    exclude_families: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def manifest_hash(self) -> str:
        return manifest_hash(self.channel_names)

    def to_json(self) -> dict:
        return {
            "group": self.group.value,
            "manifest_hash": self.manifest_hash,
            "channels": list(self.channel_names),
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "alpha": float(self.alpha),
            "scales": list(self.scales),
            "exclude_families": list(self.exclude_families),
            "standardization": {"mean": [float(v) for v in self.mean],
                                "std": [float(v) for v in self.std]},
            "diagnostics": {k: v for k, v in self.diagnostics.items() if k != "losses"},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "AgeModel":
        model = cls(
            group=AgeGroup.parse(doc["group"]),
            weights=np.asarray(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
            channel_names=tuple(doc["channels"]),
            mean=np.asarray(doc["standardization"]["mean"], dtype=np.float64),
            std=np.asarray(doc["standardization"]["std"], dtype=np.float64),
            scales=tuple(doc.get("scales", (1, 2, 3))),
            alpha=float(doc.get("alpha", 0.0)),
            exclude_families=tuple(doc.get("exclude_families", ())),
            diagnostics=dict(doc.get("diagnostics", {})),
        )
        if doc.get("manifest_hash") and doc["manifest_hash"] != model.manifest_hash:
            raise ModelMismatchError("model file: manifest hash does not match its channel list")
        return model

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "AgeModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _objective(w, b, x, y, lam):
    margin = 1.0 - y * (x @ w + b)
    active = margin > 0
    loss = 0.5 * lam * w @ w + np.mean(np.where(active, margin, 0.0) ** 2)
    coef = -2.0 * y * np.where(active, margin, 0.0) / len(y)
    return loss, lam * w + x.T @ coef, coef.sum()


def fit_linear_svm(x: np.ndarray, y: np.ndarray, config: TrainConfig = TrainConfig()):
    """L2-regularized squared-hinge linear classifier.

    Minimizes ``lam/2 |w|^2 + mean(max(0, 1 - y (w.x + b))^2)`` by full-batch
    gradient descent with backtracking, so the objective never increases
    from one epoch to the next. Returns ``(w, b, losses)`` where
    ``losses[0]`` is the objective at the zero start point.
    """
    w = np.zeros(x.shape[1])
    b = 0.0
    loss, gw, gb = _objective(w, b, x, y, config.lam)
    losses = [loss]
    step = config.step
    for _ in range(config.epochs):
        g2 = gw @ gw + gb * gb
        if g2 < 1e-30:
            losses.append(loss)
            continue
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            new_loss, new_gw, new_gb = _objective(w_new, b_new, x, y, config.lam)
            if new_loss <= loss - 0.5 * step * g2 or step < 1e-12:
                break
            step *= config.backtrack
        if new_loss <= loss:
            w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
        losses.append(loss)
        step = min(step * 2.0, config.step * 64)
    return w, b, losses


def train(samples: TrainingSamples, config: TrainConfig = TrainConfig(), seed: int = 0,
          group: AgeGroup | None = None, channel_names: Sequence[str] = (),
          scales: Iterable[int] = (1, 2, 3), alpha: float = 0.0,
          exclude_families: Iterable[str] = ()) -> AgeModel:
    """Fit one group's weights and bias on standardized features.

    The optimizer is deterministic full-batch descent; ``seed`` only enters
    through the sample draw upstream and is recorded in the diagnostics.
    """
    x = np.asarray(samples.features, dtype=np.float64)
    y = np.asarray(samples.labels, dtype=np.float64)
    if len(y) < 2 or not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training needs samples of both labels")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature values in training samples")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std < 1e-12] = 1.0
    z = (x - mean) / std
    w, b, losses = fit_linear_svm(z, y, config)
    accuracy = float(np.mean(np.sign(z @ w + b) == y))
    group = group if group is not None else samples.group
    names = tuple(channel_names) if channel_names else tuple(f"f{i}" for i in range(x.shape[1]))
    if len(names) != x.shape[1]:
        raise ValueError("channel name count does not match feature width")
    return AgeModel(
        group=group, weights=w, bias=float(b), channel_names=names, mean=mean, std=std,
        scales=tuple(sorted(scales)), alpha=float(alpha), exclude_families=tuple(exclude_families),
        diagnostics={"final_loss": float(losses[-1]), "accuracy": accuracy, "n_samples": int(len(y)),
                     "epochs": config.epochs, "lam": config.lam, "seed": seed, "losses": losses},
    )


def _check(model: AgeModel, features: FeatureTensor) -> None:
    if features.n_channels != len(model.weights) or tuple(features.names) != model.channel_names:
        raise ModelMismatchError(
            f"model expects {len(model.weights)} channels ({model.manifest_hash}), "
            f"tensor has {features.n_channels} ({features.manifest_hash})")


def predict_raw(model: AgeModel, features: FeatureTensor) -> np.ndarray:
    """Linear score ``w . f + b`` per pixel on standardized features."""
    _check(model, features)
    z = (features.values - model.mean[:, None, None]) / model.std[:, None, None]
    return np.tensordot(model.weights, z, axes=1) + model.bias


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        log.warning("degenerate prediction: constant score map")
        return np.zeros_like(values, dtype=np.float64)
    return (values - lo) / (hi - lo)


def predict(model: AgeModel, features: FeatureTensor) -> np.ndarray:
    return minmax_normalize(predict_raw(model, features))


def blend_center(prediction: np.ndarray, center: np.ndarray, alpha: float) -> np.ndarray:
    """``(1 - alpha) * prediction + alpha * center``, peak-normalized."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    prediction = np.asarray(prediction, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    if prediction.shape != center.shape:
        raise ValueError("prediction and center map differ in size")
    return max_normalize((1.0 - alpha) * prediction + alpha * center)


def train_age_model(group: AgeGroup, items: Iterable[tuple[str, FeatureChannelSet, np.ndarray]],
                    selection: ScaleSelection, config: TrainConfig = TrainConfig(), seed: int = 0,
                    n_pos: int = 10, n_neg: int = 10, alpha: float | None = None,
                    exclude_families: Iterable[str] = ()) -> AgeModel:
    """Sample every ``(image_id, channels, group saliency map)`` item and fit.

    Items whose saliency map is empty are skipped.
    """
    exclude_families = tuple(exclude_families)
    parts, names = [], None
    for image_id, channels, saliency in items:
        if not np.any(saliency > 0):
            log.info("%s: empty %s saliency map, skipped", image_id, group.value)
            continue
        tensor = assemble_features(channels, selection, group, exclude_families)
        names = tensor.names
        parts.append(sample_pixels(saliency, tensor, n_pos, n_neg, seed, image_id))
    samples = TrainingSamples.concatenate(parts)
    alpha = DEFAULT_ALPHA[group] if alpha is None else alpha
    return train(samples, config, seed, group, names, selection[group], alpha, exclude_families)


def predict_saliency(model: AgeModel, channels: FeatureChannelSet, selection: ScaleSelection | None = None,
                     center: np.ndarray | None = None) -> np.ndarray:
    """Age-adapted saliency map for one image: linear prediction blended with
    the center prior at the model's ``alpha``."""
    if selection is None:
        selection = ScaleSelection.uniform().override(model.group, model.scales)
    tensor = assemble_features(channels, selection, model.group, model.exclude_families)
    sal = predict(model, tensor)
    if center is None:
        center = channels["center_prior"].values
    return blend_center(sal, center, model.alpha)
