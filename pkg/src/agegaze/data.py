"""Fixation logs, stimulus metadata and dataset partitioning.

Fixations arrive already detected (one row per landing) in a small CSV
format; images, depth maps and region masks are referenced from a JSON
manifest.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

CSV_HEADER = ("observer_id", "group", "image_id", "index", "x", "y", "duration_ms")


class AgeGroup(str, enum.Enum):
    CHILDREN = "children"
    ADULTS = "adults"
    ELDERLY = "elderly"

    @classmethod
    def parse(cls, text: str) -> "AgeGroup":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown age group {text!r}") from None


class StimulusCategory(str, enum.Enum):
    NATURALS = "naturals"
    MANMADE = "manmade"
    FRACTALS = "fractals"

    @classmethod
    def parse(cls, text: str) -> "StimulusCategory":
        key = text.strip().lower().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown stimulus category {text!r}") from None


GROUPS = (AgeGroup.CHILDREN, AgeGroup.ADULTS, AgeGroup.ELDERLY)
CATEGORIES = (StimulusCategory.NATURALS, StimulusCategory.MANMADE, StimulusCategory.FRACTALS)


class GazeDataError(ValueError):
    """Base class for dataset ingestion problems."""


class FixationParseError(GazeDataError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class FixationValidationError(GazeDataError):
    pass


class UnknownReferenceError(GazeDataError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class FixationRecord:
    observer_id: str
    group: AgeGroup
    image_id: str
    x: int
    y: int
    index: int = 0
    duration_ms: float = 0.0


@dataclass(frozen=True)
class ImageInfo:
    image_id: str
    category: StimulusCategory
    width: int
    height: int
    image_path: Path | None = None
    depth_path: Path | None = None
    mask_path: Path | None = None


@dataclass(frozen=True)
class GazeDataset:
    images: tuple[ImageInfo, ...] = ()
    fixations: tuple[FixationRecord, ...] = ()
    observers: tuple[tuple[str, AgeGroup], ...] = ()
    _image_index: dict = field(default=None, init=False, repr=False, compare=False)
    _observer_index: dict = field(default=None, init=False, repr=False, compare=False)
    _by_image: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "fixations", tuple(self.fixations))
        object.__setattr__(self, "observers", tuple(self.observers))
        images = {}
        for info in self.images:
            if info.width <= 0 or info.height <= 0:
                raise FixationValidationError(f"image {info.image_id!r} has non-positive size")
            if info.image_id in images:
                raise FixationValidationError(f"duplicate image id {info.image_id!r}")
            images[info.image_id] = info
        observers = {}
        for obs, group in self.observers:
            if obs in observers and observers[obs] != group:
                raise FixationValidationError(f"observer {obs!r} listed in two groups")
            observers[obs] = group
        object.__setattr__(self, "_image_index", images)
        object.__setattr__(self, "_observer_index", observers)
        seen = set()
        by_image = {i: [] for i in images}
        for rec in self.fixations:
            validate_record(rec, images, observers)
            key = (rec.observer_id, rec.image_id, rec.index)
            if key in seen:
                raise FixationValidationError(f"duplicate fixation {key}")
            seen.add(key)
            by_image[rec.image_id].append(rec)
        object.__setattr__(self, "_by_image", by_image)

    def image(self, image_id: str) -> ImageInfo:
        try:
            return self._image_index[image_id]
        except KeyError:
            raise UnknownReferenceError(f"unknown image_id {image_id!r}") from None

    @property
    def image_ids(self) -> list[str]:
        return [info.image_id for info in self.images]

    def group_of(self, observer_id: str) -> AgeGroup:
        try:
            return self._observer_index[observer_id]
        except KeyError:
            raise UnknownReferenceError(f"unknown observer {observer_id!r}") from None

    def observers_in(self, group: AgeGroup) -> list[str]:
        return [obs for obs, g in self.observers if g == group]

    def fixations_for(self, image_id: str, group: AgeGroup | None = None,
                      observers: Iterable[str] | None = None,
                      drop_first: bool = False) -> list[FixationRecord]:
        """Fixations on one image, optionally restricted to a group or observer set.

        ``drop_first`` removes the ordinal-0 landing of each trial, which on
        most setups sits on the central fixation cross.
        """
        self.image(image_id)
        wanted = None if observers is None else set(observers)
        out = []
        for rec in self._by_image[image_id]:
            if group is not None and rec.group != group:
                continue
            if wanted is not None and rec.observer_id not in wanted:
                continue
            if drop_first and rec.index == 0:
                continue
            out.append(rec)
        return out

    def by_category(self, category: StimulusCategory) -> list[str]:
        return [info.image_id for info in self.images if info.category == category]

    def with_fixations(self, records: Iterable[FixationRecord]) -> "GazeDataset":
        return GazeDataset(images=self.images, fixations=self.fixations + tuple(records),
                           observers=self.observers)

    def subset(self, image_ids: Iterable[str]) -> "GazeDataset":
        keep = set(image_ids)
        for image_id in keep:
            self.image(image_id)
        return GazeDataset(
            images=[i for i in self.images if i.image_id in keep],
            fixations=[f for f in self.fixations if f.image_id in keep],
            observers=self.observers,
        )


def validate_record(rec: FixationRecord, images: dict, observers: dict | None = None) -> None:
    info = images.get(rec.image_id)
    if info is None:
        raise UnknownReferenceError(f"fixation references unknown image_id {rec.image_id!r}")
    if observers is not None:
        known = observers.get(rec.observer_id)
        if known is None:
            raise UnknownReferenceError(f"fixation references unknown observer {rec.observer_id!r}")
        if known != rec.group:
            raise FixationValidationError(
                f"observer {rec.observer_id!r} is {known.value}, record says {rec.group.value}")
    if not (0 <= rec.x < info.width and 0 <= rec.y < info.height):
        raise FixationValidationError(
            f"fixation ({rec.observer_id}, {rec.image_id}, #{rec.index}) at "
            f"({rec.x}, {rec.y}) outside {info.width}x{info.height}")
    if not rec.duration_ms >= 0:
        raise FixationValidationError(
            f"fixation ({rec.observer_id}, {rec.image_id}, #{rec.index}) has negative duration")


def parse_fixation_csv(path, dataset: GazeDataset) -> GazeDataset:
    """Append the fixations stored in ``path`` to ``dataset``.

    Observers not yet known to the dataset are registered with the group
    given on their rows. Row order is preserved.
    """
    records = []
    new_observers = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FixationParseError("missing header", 1) from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise FixationParseError(f"header must be {','.join(CSV_HEADER)}", 1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise FixationParseError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", line)
            obs, group, image_id, index, x, y, dur = (c.strip() for c in row)
            try:
                rec = FixationRecord(
                    observer_id=obs,
                    group=AgeGroup.parse(group),
                    image_id=image_id,
                    index=int(index),
                    x=int(x),
                    y=int(y),
                    duration_ms=float(dur),
                )
            except ValueError as exc:
                raise FixationParseError(str(exc), line) from None
            try:
                validate_record(rec, dataset._image_index)
            except GazeDataError as exc:
                raise type(exc)(f"line {line}: {exc}") from None
            records.append(rec)
            if rec.observer_id not in dataset._observer_index:
                new_observers.setdefault(rec.observer_id, rec.group)
    observers = dataset.observers + tuple(new_observers.items())
    return GazeDataset(images=dataset.images, fixations=dataset.fixations + tuple(records),
                       observers=observers)


def write_fixation_csv(path, records: Iterable[FixationRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([r.observer_id, r.group.value, r.image_id, r.index, r.x, r.y,
                             repr(float(r.duration_ms))])


def load_manifest(path) -> GazeDataset:
    """Read a dataset manifest and, if it names one, its fixation CSV."""
    path = Path(path)
    root = path.parent
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)

    def resolve(p):
        return None if p is None else (root / p)

    images = [
        ImageInfo(
            image_id=str(item["id"]),
            category=StimulusCategory.parse(item["category"]),
            width=int(item["width"]),
            height=int(item["height"]),
            image_path=resolve(item.get("image")),
            depth_path=resolve(item.get("depth")),
            mask_path=resolve(item.get("mask")),
        )
        for item in doc.get("images", [])
    ]
    observers = [(str(o["id"]), AgeGroup.parse(o["group"])) for o in doc.get("observers", [])]
    ds = GazeDataset(images=images, observers=observers)
    if doc.get("fixations"):
        ds = parse_fixation_csv(root / doc["fixations"], ds)
    return ds


def save_manifest(path, dataset: GazeDataset, fixations_file: str | None = "fixations.csv") -> None:
    """Write ``dataset`` as a manifest; raster paths are stored relative to it."""
    path = Path(path)
    root = path.parent

    def rel(p):
        if p is None:
            return None
        p = Path(p)
        try:
            return p.relative_to(root).as_posix()
        except ValueError:
            return str(p)

    doc = {
        "images": [
            {
                "id": i.image_id,
                "category": i.category.value,
                "width": i.width,
                "height": i.height,
                "image": rel(i.image_path),
                "depth": rel(i.depth_path),
                "mask": rel(i.mask_path),
            }
            for i in dataset.images
        ],
        "observers": [{"id": o, "group": g.value} for o, g in dataset.observers],
        "fixations": fixations_file,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    if fixations_file:
        write_fixation_csv(root / fixations_file, dataset.fixations)


def partition_by_group(dataset: GazeDataset, image_id: str) -> dict[AgeGroup, list[FixationRecord]]:
    out = {g: [] for g in GROUPS}
    for rec in dataset.fixations_for(image_id):
        out[rec.group].append(rec)
    return out


def split_train_test(dataset: GazeDataset, n_train: int, seed: int) -> tuple[GazeDataset, GazeDataset]:
    """Stratified random image split: each category keeps its share of the
    training set to within one image (largest-remainder allocation)."""
    n_images = len(dataset.images)
    if not 0 < n_train < n_images:
        raise ValueError(f"n_train must be in (0, {n_images}), got {n_train}")
    rng = np.random.default_rng(seed)
    strata = {}
    for info in dataset.images:
        strata.setdefault(info.category, []).append(info.image_id)
    cats = sorted(strata, key=lambda c: c.value)
    exact = np.array([n_train * len(strata[c]) / n_images for c in cats])
    alloc = np.floor(exact).astype(int)
    short = n_train - alloc.sum()
    # stable order so ties in the remainder resolve the same way every run
    for j in np.argsort(-(exact - alloc), kind="stable")[:short]:
        alloc[j] += 1
    train_ids = set()
    for cat, k in zip(cats, alloc):
        ids = sorted(strata[cat])
        perm = rng.permutation(len(ids))
        train_ids.update(ids[p] for p in perm[:k])
    train = [i for i in dataset.image_ids if i in train_ids]
    test = [i for i in dataset.image_ids if i not in train_ids]
    return dataset.subset(train), dataset.subset(test)


def fixation_points(records: Sequence[FixationRecord]) -> np.ndarray:
    """(n, 2) integer array of (x, y) pixel coordinates."""
    if not records:
        return np.zeros((0, 2), dtype=int)
    return np.array([(r.x, r.y) for r in records], dtype=int)
