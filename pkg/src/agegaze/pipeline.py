"""End-to-end stages: synth -> ingest -> maps -> metrics -> train -> predict -> eval -> report.

Every stage reads its inputs from, and writes its outputs under, the run's
output directory, so stages can be run one at a time from the command line
or chained with :func:`run_all`.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import io
from .data import (CATEGORIES, GROUPS, AgeGroup, GazeDataset, StimulusCategory, load_manifest,
                   split_train_test)
from .features import (FeatureChannelSet, ScaleSelection, center_prior_channel, extract_channels,
                       intensity_contrast_baseline, load_external_channels)
from .learner import DEFAULT_ALPHA, AgeModel, TrainConfig, predict_saliency, train_age_model
from .maps import DEFAULT_SIGMA_PX, build_center_map, combine_group_maps, render_heat_overlay, sigma_for_width
from .metrics import (DEFAULT_THRESHOLDS, center_bias, depth_bias_analysis, explorativeness_entropy,
                      group_saliency_map, similarity_matrix, upl_table, upper_performance_limit)
from .roc import UndefinedScoreError, auc_score

log = logging.getLogger(__name__)

WORKERS_ENV = "AGEGAZE_WORKERS"


class PipelineError(RuntimeError):
    pass


@dataclass
class RunConfig:
    out: str = "run"
    manifest: str | None = None
    sigma_px: float | None = None
    entropy_bins: int = 256
    t1: float = DEFAULT_THRESHOLDS[0]
    t2: float = DEFAULT_THRESHOLDS[1]
    upl_reps: int = 50
    n_train: int | None = None
    n_pos: int = 10
    n_neg: int = 10
    lam: float = 1e-3
    epochs: int = 200
    use_depth: bool = True
    drop_first: bool = False
    scales: dict = field(default_factory=dict)
    alpha: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=lambda: {"synth": 0, "split": 0, "train": 0, "upl": 0})
    working_size: int = 320
    external_dir: str | None = None
    external_channels: list = field(default_factory=list)
    synth: dict = field(default_factory=lambda: {
        "n_images": 64, "width": 320, "height": 240,
        "group_sizes": {"children": 18, "adults": 23, "elderly": 17}, "group_focus": 0.5,
    })

    def __post_init__(self):
        if not self.t1 < self.t2:
            raise ValueError(f"t1 ({self.t1}) must be below t2 ({self.t2})")
        self.seeds = {"synth": 0, "split": 0, "train": 0, "upl": 0, **self.seeds}

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc)
        base = Path(path).parent
        if cfg.manifest and not Path(cfg.manifest).is_absolute():
            cfg.manifest = str(base / cfg.manifest)
        if cfg.external_dir and not Path(cfg.external_dir).is_absolute():
            cfg.external_dir = str(base / cfg.external_dir)
        return cfg

    def with_seed(self, seed: int) -> "RunConfig":
        doc = asdict(self)
        doc["seeds"] = {k: int(seed) for k in self.seeds}
        return RunConfig(**doc)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def manifest_path(self) -> Path:
        return Path(self.manifest) if self.manifest else self.out_dir / "data" / "manifest.json"

    @property
    def thresholds(self) -> tuple[float, float]:
        return (float(self.t1), float(self.t2))

    def sigma_for(self, width: int) -> float:
        return float(self.sigma_px) if self.sigma_px else sigma_for_width(width, DEFAULT_SIGMA_PX)

    def selection(self) -> ScaleSelection:
        sel = ScaleSelection.default()
        for g, s in self.scales.items():
            sel = sel.override(AgeGroup.parse(g), s)
        return sel

    def alpha_for(self, group: AgeGroup) -> float:
        return float(self.alpha.get(group.value, DEFAULT_ALPHA[group]))

    def train_config(self) -> TrainConfig:
        return TrainConfig(lam=self.lam, epochs=self.epochs)


# -- helpers -----------------------------------------------------------------

def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _pmap(fn: Callable, items: Sequence) -> list:
    """Ordered map, fanned out over a process pool when workers > 1."""
    n = _workers()
    if n <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if not np.isfinite(v) else f"{float(v):.6f}"
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _filter_groups(group: AgeGroup | None) -> tuple[AgeGroup, ...]:
    return GROUPS if group is None else (group,)


def load_dataset(cfg: RunConfig) -> GazeDataset:
    path = cfg.manifest_path
    if not path.exists():
        raise PipelineError(f"dataset manifest not found: {path} (run `synth` or set `manifest`)")
    return load_manifest(path)


def load_split(cfg: RunConfig, ds: GazeDataset) -> tuple[list[str], list[str]]:
    path = cfg.out_dir / "ingest" / "split.json"
    if not path.exists():
        raise PipelineError(f"no train/test split at {path}; run `ingest` first")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return list(doc["train"]), list(doc["test"])


def _channels_for(args) -> FeatureChannelSet:
    info, working_size, external_dir, external_names = args
    image = io.read_rgb(info.image_path)
    depth = io.read_depth(info.depth_path) if info.depth_path and Path(info.depth_path).exists() else None
    ext = load_external_channels(external_dir, info.image_id, external_names) if external_names else ()
    return extract_channels(image, depth, ext, working_size=working_size)


def compute_channels(cfg: RunConfig, ds: GazeDataset, image_ids: Sequence[str]) -> dict[str, FeatureChannelSet]:
    jobs = [(ds.image(i), cfg.working_size, cfg.external_dir, tuple(cfg.external_channels)) for i in image_ids]
    for info, *_ in jobs:
        if info.image_path is None:
            raise PipelineError(f"image {info.image_id} has no raster path")
    return dict(zip(image_ids, _pmap(_channels_for, jobs)))


# -- stages ------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> Path:
    from .synth import DEFAULT_PROFILES, ObserverProfile, generate_cohort, write_cohort

    s = dict(cfg.synth)
    sizes = {AgeGroup.parse(k): int(v) for k, v in s.get("group_sizes", {}).items()} or None
    profiles = dict(DEFAULT_PROFILES)
    for k, v in s.get("profiles", {}).items():
        profiles[AgeGroup.parse(k)] = ObserverProfile(**v)
    cohort = generate_cohort(n_images=int(s.get("n_images", 64)), width=int(s.get("width", 320)),
                             height=int(s.get("height", 240)), group_sizes=sizes, profiles=profiles,
                             seed=int(cfg.seeds["synth"]), n_blobs=tuple(s.get("n_blobs", (3, 6))),
                             group_focus=s.get("group_focus", 0.5),
                             placement=tuple(s.get("placement", (0.0, 0.0, 1.0, 1.0))))
    out = cfg.out_dir / "data"
    write_cohort(cohort, out)
    return out / "manifest.json"


def cmd_ingest(cfg: RunConfig) -> dict:
    ds = load_dataset(cfg)
    n = len(ds.images)
    if n < 2:
        raise PipelineError("need at least two images to form a train/test split")
    n_train = cfg.n_train if cfg.n_train is not None else int(round(n * 120 / 192))
    train, test = split_train_test(ds, n_train, int(cfg.seeds["split"]))
    summary = {
        "n_images": n,
        "n_fixations": len(ds.fixations),
        "observers": {g.value: len(ds.observers_in(g)) for g in GROUPS},
        "categories": {c.value: len(ds.by_category(c)) for c in CATEGORIES},
        "with_depth": sum(1 for i in ds.images if i.depth_path),
        "with_mask": sum(1 for i in ds.images if i.mask_path),
    }
    _write_json(cfg.out_dir / "ingest" / "summary.json", summary)
    _write_json(cfg.out_dir / "ingest" / "split.json", {"train": train.image_ids, "test": test.image_ids})
    return summary


def cmd_maps(cfg: RunConfig, group: AgeGroup | None = None) -> Path:
    ds = load_dataset(cfg)
    out = cfg.out_dir / "maps"
    out.mkdir(parents=True, exist_ok=True)
    per_group = {g: [] for g in GROUPS}
    present = _groups_with_observers(ds, None)
    for info in ds.images:
        sig = cfg.sigma_for(info.width)
        maps = {g: group_saliency_map(ds, info.image_id, g, sig, cfg.drop_first) if g in present
                else np.zeros((info.height, info.width)) for g in GROUPS}
        for g in _filter_groups(group):
            if g not in present:
                continue
            io.write_map16(out / f"{info.image_id}.{g.value}.png", maps[g])
            per_group[g].append(maps[g])
        if group is None:
            io.write_map16(out / f"{info.image_id}.combined.png", combine_group_maps(*maps.values()))
    shapes = {(i.height, i.width) for i in ds.images}
    if len(shapes) == 1:
        for g in _filter_groups(group):
            nonzero = [m for m in per_group[g] if np.any(m > 0)]
            if nonzero:
                io.write_map16(out / f"center.{g.value}.png", build_center_map(nonzero))
    return out


def cmd_metrics(cfg: RunConfig, group: AgeGroup | None = None,
                category: StimulusCategory | None = None) -> Path:
    ds = load_dataset(cfg)
    out = cfg.out_dir / "metrics"
    out.mkdir(parents=True, exist_ok=True)
    cats = CATEGORIES if category is None else (category,)
    groups = _filter_groups(group)
    long_rows = []
    expl_rows = []
    for cat in cats:
        ids = ds.by_category(cat)
        if not ids:
            continue
        sig = cfg.sigma_for(ds.image(ids[0]).width)
        for g in groups:
            if not ds.observers_in(g):
                continue
            maps = {i: group_saliency_map(ds, i, g, sig, cfg.drop_first) for i in ids}
            ent = []
            for i in ids:
                if np.any(maps[i] > 0):
                    e = explorativeness_entropy(maps[i], cfg.entropy_bins)
                    ent.append(e)
                    expl_rows.append((i, cat.value, g.value, e))
            if ent:
                long_rows.append(("explorativeness", g.value, cat.value, float(np.mean(ent))))
            try:
                dist, cauc, _ = center_bias(ds, g, ids, sig, cfg.drop_first, maps=maps)
                long_rows.append(("center_distance_px", g.value, cat.value, dist))
                long_rows.append(("center_auc", g.value, cat.value, cauc))
            except ValueError as exc:
                log.info("center bias %s/%s: %s", g.value, cat.value, exc)
        masks = {i: io.read_mask(ds.image(i).mask_path) for i in ids
                 if ds.image(i).mask_path and Path(ds.image(i).mask_path).exists()}
        if masks:
            result, _ = depth_bias_analysis(ds, masks, cfg.thresholds, sig, cfg.drop_first)
            for t in cfg.thresholds:
                for g in groups:
                    fg, bg = result.summary[t][g]
                    long_rows.append((f"depth_fg_t{t:g}", g.value, cat.value, fg))
                    long_rows.append((f"depth_bg_t{t:g}", g.value, cat.value, bg))
        sim = similarity_matrix(ds, ids, sig, cfg.drop_first, cat)
        write_csv(out / f"similarity_{cat.value}.csv", ["source"] + [g.value for g in GROUPS],
                  [[s.value] + list(sim.values[k]) for k, s in enumerate(GROUPS)])
        for k, s in enumerate(GROUPS):
            for j, t in enumerate(GROUPS):
                long_rows.append((f"similarity_to_{t.value}", s.value, cat.value, sim.values[k, j]))
        upl = upl_table(ds, ids, cfg.upl_reps, int(cfg.seeds["upl"]), sig, cfg.drop_first)
        for g in groups:
            if g in upl.values and cat in upl.values[g]:
                long_rows.append(("upl", g.value, cat.value, upl.values[g][cat]))
    write_csv(out / "metrics_long.csv", ["metric", "group", "category", "value"], long_rows)
    write_csv(out / "explorativeness_per_image.csv", ["image_id", "category", "group", "entropy_bits"],
              expl_rows)
    return out


def _train_items(cfg: RunConfig, ds: GazeDataset, ids: Sequence[str], channels, group: AgeGroup):
    for i in ids:
        sig = cfg.sigma_for(ds.image(i).width)
        yield i, channels[i], group_saliency_map(ds, i, group, sig, cfg.drop_first)


def cmd_train(cfg: RunConfig, group: AgeGroup | None = None) -> dict[AgeGroup, AgeModel]:
    ds = load_dataset(cfg)
    train_ids, _ = load_split(cfg, ds)
    channels = compute_channels(cfg, ds, train_ids)
    exclude = () if cfg.use_depth else ("depth",)
    sel = cfg.selection()
    out = cfg.out_dir / "models"
    out.mkdir(parents=True, exist_ok=True)
    models = {}
    for g in _filter_groups(group):
        if not ds.observers_in(g):
            log.warning("no %s observers; no model trained", g.value)
            continue
        model = train_age_model(g, _train_items(cfg, ds, train_ids, channels, g), sel, cfg.train_config(),
                                int(cfg.seeds["train"]), cfg.n_pos, cfg.n_neg, cfg.alpha_for(g), exclude)
        model.save(out / f"{g.value}.json")
        models[g] = model
    return models


def load_models(cfg: RunConfig, groups: Iterable[AgeGroup]) -> dict[AgeGroup, AgeModel]:
    models = {}
    for g in groups:
        path = cfg.out_dir / "models" / f"{g.value}.json"
        if not path.exists():
            raise PipelineError(f"missing model for {g.value}: {path} (run `train --group {g.value}`)")
        models[g] = AgeModel.load(path)
    return models


def _groups_with_observers(ds: GazeDataset, group: AgeGroup | None) -> list[AgeGroup]:
    return [g for g in _filter_groups(group) if ds.observers_in(g)]


def cmd_predict(cfg: RunConfig, group: AgeGroup | None = None) -> Path:
    ds = load_dataset(cfg)
    _, test_ids = load_split(cfg, ds)
    models = load_models(cfg, _groups_with_observers(ds, group))
    channels = compute_channels(cfg, ds, test_ids)
    out = cfg.out_dir / "predictions"
    out.mkdir(parents=True, exist_ok=True)
    for i in test_ids:
        for g, model in models.items():
            io.write_map16(out / f"{i}.{g.value}.png", predict_saliency(model, channels[i]))
    return out


def cmd_eval(cfg: RunConfig, group: AgeGroup | None = None,
             category: StimulusCategory | None = None) -> Path:
    """Model comparison on the test split: intensity-contrast and
    center-prior baselines, the age-adapted model and the split-half UPL."""
    ds = load_dataset(cfg)
    _, test_ids = load_split(cfg, ds)
    if category is not None:
        test_ids = [i for i in test_ids if ds.image(i).category == category]
    if not test_ids:
        raise PipelineError("test split is empty; nothing to evaluate")
    groups = _groups_with_observers(ds, group)
    models = load_models(cfg, groups)
    channels = compute_channels(cfg, ds, test_ids)
    per_image = []
    scores = {}
    for i in test_ids:
        info = ds.image(i)
        baselines = {
            "intensity_contrast": intensity_contrast_baseline(channels[i]),
            "center_prior": center_prior_channel(info.width, info.height).values,
        }
        for g in groups:
            fix = ds.fixations_for(i, g, drop_first=cfg.drop_first)
            if not fix:
                continue
            row = {name: auc_score(m, fix).value for name, m in baselines.items()}
            row["age_adapted"] = auc_score(predict_saliency(models[g], channels[i]), fix).value
            if len(ds.observers_in(g)) >= 2:
                try:
                    row["upl"] = upper_performance_limit(ds, g, i, cfg.upl_reps, int(cfg.seeds["upl"]),
                                                         cfg.sigma_for(info.width), cfg.drop_first)
                except UndefinedScoreError:
                    row["upl"] = float("nan")
            else:
                row["upl"] = float("nan")
            scores.setdefault((info.category, g), []).append(row)
            per_image.append([i, info.category.value, g.value, row["intensity_contrast"],
                              row["center_prior"], row["age_adapted"], row["upl"]])
    cols = ["intensity_contrast", "center_prior", "age_adapted", "upl"]
    table = []
    for cat in CATEGORIES:
        for g in groups:
            rows = scores.get((cat, g))
            if not rows:
                continue
            table.append([cat.value, g.value] + [float(np.nanmean([r[c] for r in rows])) for c in cols])
    out = cfg.out_dir / "eval"
    write_csv(out / "comparison.csv", ["category", "group"] + cols, table)
    write_csv(out / "per_image.csv", ["image_id", "category", "group"] + cols, per_image)
    return out


def cmd_report(cfg: RunConfig) -> Path:
    """Bundle overlays, metric tables and a run manifest under ``report/``."""
    ds = load_dataset(cfg)
    needed = [
        cfg.out_dir / "metrics" / "metrics_long.csv",
        cfg.out_dir / "eval" / "comparison.csv",
        cfg.out_dir / "ingest" / "split.json",
    ] + [cfg.out_dir / "metrics" / f"similarity_{c.value}.csv" for c in CATEGORIES if ds.by_category(c)]
    missing = [str(p) for p in needed if not p.exists()]
    missing += [f"image raster for {i.image_id}" for i in ds.images
                if not i.image_path or not Path(i.image_path).exists()]
    if missing:
        raise PipelineError("report inputs missing:\n  " + "\n  ".join(missing))
    out = cfg.out_dir / "report"
    (out / "overlays").mkdir(parents=True, exist_ok=True)
    for p in needed[:2] + needed[3:]:
        shutil.copyfile(p, out / p.name)
    shutil.copyfile(cfg.out_dir / "eval" / "per_image.csv", out / "eval_per_image.csv")
    _, test_ids = load_split(cfg, ds)
    for i in test_ids:
        info = ds.image(i)
        image = io.read_rgb(info.image_path)
        sig = cfg.sigma_for(info.width)
        for g in _groups_with_observers(ds, None):
            sal = group_saliency_map(ds, i, g, sig, cfg.drop_first)
            io.write_rgb(out / "overlays" / f"{i}.{g.value}.png", render_heat_overlay(image, sal))
    manifest = {
        "config": asdict(cfg),
        "dataset": str(cfg.manifest_path),
        "n_images": len(ds.images),
        "test_images": test_ids,
        "files": sorted(p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file()),
    }
    _write_json(out / "run_manifest.json", manifest)
    return out


def run_all(cfg: RunConfig, synthesize: bool = True) -> Path:
    if synthesize and not cfg.manifest:
        cmd_synth(cfg)
    cmd_ingest(cfg)
    cmd_maps(cfg)
    cmd_metrics(cfg)
    cmd_train(cfg)
    cmd_predict(cfg)
    cmd_eval(cfg)
    return cmd_report(cfg)
