"""Dice and IoU evaluation at image, class, and dataset granularity.

The three aggregation orders answer different questions: image-level averages
per-image quality (every image counts equally), class-level averages per-class
quality (every class counts equally), dataset-level pools confusion counts
before taking the ratio (every pixel counts equally). A worst-quantile summary
over per-image scores captures tail behavior.

A class counts as "present" for an image when it occurs in the ground truth or
the prediction; absent classes are skipped rather than scored. Class 0 is
treated as background and excluded from aggregates unless asked for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ShapeMismatchError
from .probmap import BinaryMask, LabelMap


@dataclass(frozen=True)
class ConfusionCounts:
    """Pixel counts for one class: true/false positives and false negatives."""

    tp: int
    fp: int
    fn: int

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def present(self) -> bool:
        return self.tp + self.fp + self.fn > 0


@dataclass(frozen=True)
class ClassScore:
    """Dice/IoU for one class on one image, with its presence flag."""

    dice: float
    iou: float
    present: bool


@dataclass(frozen=True)
class ImageScores:
    """Per-class scores for one image plus the image's present-class means."""

    name: str
    classes: Mapping[int, ClassScore]
    dice: float | None
    iou: float | None


@dataclass(frozen=True)
class MetricReport:
    per_image: tuple[ImageScores, ...]
    image_means: tuple[float, float]
    class_means: tuple[float, float]
    dataset: tuple[float, float]
    quantiles: Mapping[float, tuple[float, float]]
    num_classes: int
    exclude_background: bool

    def to_dict(self) -> dict:
        """JSON-ready form: per_image rows, aggregates, and quantile entries."""
        per_image = [
            {
                "name": img.name,
                "classes": {
                    str(c): {"dice": s.dice, "iou": s.iou, "present": s.present}
                    for c, s in sorted(img.classes.items())
                },
                "dice": img.dice,
                "iou": img.iou,
            }
            for img in self.per_image
        ]
        aggregates = {
            "mdice_image": self.image_means[0],
            "miou_image": self.image_means[1],
            "mdice_class": self.class_means[0],
            "miou_class": self.class_means[1],
            "dice_dataset": self.dataset[0],
            "iou_dataset": self.dataset[1],
        }
        quantiles = {
            str(q): {"dice": dq, "iou": iq} for q, (dq, iq) in sorted(self.quantiles.items())
        }
        return {"per_image": per_image, "aggregates": aggregates, "quantiles": quantiles}


def _labels_of(x) -> np.ndarray:
    if isinstance(x, LabelMap):
        return x.labels
    if isinstance(x, BinaryMask):
        return x.bits.astype(np.int64)
    arr = np.asarray(x)
    if arr.dtype.kind not in "iu":
        raise ValueError(f"label arrays must be integer, got dtype {arr.dtype}")
    return arr.reshape(-1).astype(np.int64)


def _paired_labels(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    a, b = _labels_of(pred), _labels_of(gt)
    if a.size != b.size:
        raise ShapeMismatchError(f"prediction has {a.size} pixels, ground truth has {b.size}")
    return a, b


def confusion(pred, gt, c: int) -> ConfusionCounts:
    """TP/FP/FN pixel counts of class c between a prediction and ground truth."""
    a, b = _paired_labels(pred, gt)
    pa, ga = a == c, b == c
    tp = int(np.count_nonzero(pa & ga))
    return ConfusionCounts(
        tp=tp, fp=int(np.count_nonzero(pa)) - tp, fn=int(np.count_nonzero(ga)) - tp
    )


def pair_confusion(pred, gt, num_classes: int) -> list[ConfusionCounts]:
    """Confusion counts for every class at once via one joint histogram."""
    a, b = _paired_labels(pred, gt)
    m = np.bincount(a * num_classes + b, minlength=num_classes * num_classes)
    m = m.reshape(num_classes, num_classes)
    tp = np.diag(m)
    fp = m.sum(axis=1) - tp
    fn = m.sum(axis=0) - tp
    return [ConfusionCounts(int(tp[c]), int(fp[c]), int(fn[c])) for c in range(num_classes)]


def dice_iou_from_counts(cc: ConfusionCounts) -> tuple[float, float]:
    """(Dice, IoU) from counts; all-zero counts mean both sets were empty: (1, 1)."""
    denom = cc.tp + cc.fp + cc.fn
    if denom == 0:
        return 1.0, 1.0
    return 2.0 * cc.tp / (denom + cc.tp), cc.tp / denom


def _included(num_classes: int, exclude_background: bool) -> range:
    return range(1 if exclude_background else 0, num_classes)


def _image_mean(scores: Mapping[int, ClassScore], which: str) -> float | None:
    vals = [getattr(s, which) for s in scores.values() if s.present]
    return float(np.mean(vals)) if vals else None


def image_level_means(
    images: Sequence[Mapping[int, ClassScore]], exclude_background: bool = True
) -> tuple[float, float]:
    """Average scores over present classes within each image, then over images."""
    dice_means, iou_means = [], []
    for scores in images:
        kept = {c: s for c, s in scores.items() if s.present and (c != 0 or not exclude_background)}
        if kept:
            dice_means.append(float(np.mean([s.dice for s in kept.values()])))
            iou_means.append(float(np.mean([s.iou for s in kept.values()])))
    if not dice_means:
        raise ValueError("every image was skipped: no present classes to average")
    return float(np.mean(dice_means)), float(np.mean(iou_means))


def class_level_means(
    images: Sequence[Mapping[int, ClassScore]], exclude_background: bool = True
) -> tuple[float, float]:
    """Average scores over images where each class is present, then over classes."""
    num_classes = max((max(s) + 1 for s in images if s), default=0)
    dice_cols, iou_cols = [], []
    for c in _included(num_classes, exclude_background):
        dice_vals = [s[c].dice for s in images if c in s and s[c].present]
        if dice_vals:
            dice_cols.append(float(np.mean(dice_vals)))
            iou_cols.append(float(np.mean([s[c].iou for s in images if c in s and s[c].present])))
    if not dice_cols:
        raise ValueError("no class is present in any image")
    return float(np.mean(dice_cols)), float(np.mean(iou_cols))


def dataset_level(
    counts: Sequence[Sequence[ConfusionCounts]], exclude_background: bool = True
) -> tuple[float, float]:
    """Pool confusion counts over all images per class, then average over classes."""
    num_classes = max((len(row) for row in counts), default=0)
    dice_cols, iou_cols = [], []
    for c in _included(num_classes, exclude_background):
        total = ConfusionCounts(0, 0, 0)
        for row in counts:
            if c < len(row):
                total = total + row[c]
        if total.present:
            d, i = dice_iou_from_counts(total)
            dice_cols.append(d)
            iou_cols.append(i)
    if not dice_cols:
        raise ValueError("no class is present in any image")
    return float(np.mean(dice_cols)), float(np.mean(iou_cols))


def worst_quantile(values: Sequence[float], q: float) -> float:
    """Mean of the lowest floor(n·q) values; q must keep at least one value."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"quantile fraction must be in (0, 1], got {q}")
    arr = np.asarray(values, dtype=np.float64)
    k = int(math.floor(arr.size * q + 1e-9))
    if k < 1:
        raise ValueError(f"floor(n*q) = 0 for n={arr.size}, q={q}: nothing to average")
    return float(np.sort(arr, kind="stable")[:k].mean())


def score_pair(pred, gt, num_classes: int) -> dict[int, ClassScore]:
    """Per-class scores (all classes, background included) for one pair."""
    out = {}
    for c, cc in enumerate(pair_confusion(pred, gt, num_classes)):
        d, i = dice_iou_from_counts(cc)
        out[c] = ClassScore(dice=d, iou=i, present=cc.present)
    return out


def _infer_num_classes(pairs) -> int:
    top = 0
    for pred, gt in pairs:
        for x in (pred, gt):
            if isinstance(x, LabelMap):
                top = max(top, x.num_classes - 1)
            else:
                lab = _labels_of(x)
                if lab.size:
                    top = max(top, int(lab.max()))
    return top + 1


def compute_report(
    pairs: Sequence[tuple],
    names: Sequence[str] | None = None,
    num_classes: int | None = None,
    exclude_background: bool = True,
    quantiles: Sequence[float] = (),
) -> MetricReport:
    """Evaluate (prediction, ground truth) pairs at every aggregation level."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one (prediction, ground truth) pair")
    if names is None:
        names = [str(i) for i in range(len(pairs))]
    if num_classes is None:
        num_classes = max(_infer_num_classes(pairs), 2)

    counts_all, scores_all, rows = [], [], []
    for name, (pred, gt) in zip(names, pairs):
        counts = pair_confusion(pred, gt, num_classes)
        scores = {}
        for c in _included(num_classes, exclude_background):
            d, i = dice_iou_from_counts(counts[c])
            scores[c] = ClassScore(dice=d, iou=i, present=counts[c].present)
        counts_all.append(counts)
        scores_all.append(scores)
        rows.append(
            ImageScores(
                name=name,
                classes=scores,
                dice=_image_mean(scores, "dice"),
                iou=_image_mean(scores, "iou"),
            )
        )

    image_means = image_level_means(scores_all, exclude_background)
    class_means = class_level_means(scores_all, exclude_background)
    dataset = dataset_level(counts_all, exclude_background)

    qmap = {}
    if quantiles:
        dice_vals = [r.dice for r in rows if r.dice is not None]
        iou_vals = [r.iou for r in rows if r.iou is not None]
        for q in quantiles:
            qmap[float(q)] = (worst_quantile(dice_vals, q), worst_quantile(iou_vals, q))

    return MetricReport(
        per_image=tuple(rows),
        image_means=image_means,
        class_means=class_means,
        dataset=dataset,
        quantiles=qmap,
        num_classes=num_classes,
        exclude_background=exclude_background,
    )
