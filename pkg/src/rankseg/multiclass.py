"""Non-overlapping multiclass prediction on top of the binary ranking rules.

Each class row gets the binary reciprocal-moment rule independently, which can
select the same pixel for several classes. Pixels selected once are kept as
is; pixels selected more than once are handed to the class with the best
per-pixel score; pixels selected by no class fall back to the
highest-probability class. Every class channel participates, including the
conventional background channel 0 (evaluation may exclude it later).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binary_rules import rankdice_rma, rankiou_rma
from .probmap import LabelMap, MulticlassProbMap

SCORE_KINDS = ("rma-dice", "rma-iou", "prob", "wprob")

# Residual-volume guard: an IoU score denominator at or below this claims the
# pixel outright (the score diverges in the limit).
_IOU_DEN_GUARD = 1e-12


@dataclass(frozen=True)
class OverlapPartition:
    """How the per-class binary selections carve up the pixel set.

    positives  : per class, pixels its binary rule selected
    overlap    : pixels selected by two or more classes
    kept       : per class, selected pixels no other class wants
    unassigned : pixels selected by no class
    """

    positives: tuple[np.ndarray, ...]
    overlap: np.ndarray
    kept: tuple[np.ndarray, ...]
    unassigned: np.ndarray

    @property
    def num_classes(self) -> int:
        return len(self.positives)


@dataclass(frozen=True)
class OverlapScore:
    """Per-(class, pixel) resolution scores for the overlap pixels.

    values[c, k] scores class c on pixel pixels[k]; +inf marks a class whose
    residual volume vanished (it claims the pixel outright).
    """

    kind: str
    pixels: np.ndarray
    values: np.ndarray


def _as_matrix(P) -> tuple[np.ndarray, tuple[int, ...]]:
    """Accept a MulticlassProbMap or a raw (C, d) array; return (matrix, dims)."""
    if isinstance(P, MulticlassProbMap):
        return P.probs, P.dims
    M = np.asarray(P, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"expected a (C, d) probability matrix, got shape {M.shape}")
    return M, (M.shape[1],)


def _kept_indices(kept) -> np.ndarray:
    return np.asarray(sorted(kept) if isinstance(kept, (set, frozenset)) else kept, dtype=np.int64)


def argmax_prob(P) -> LabelMap:
    """Baseline labeling: each pixel to its highest-probability class, ties low."""
    M, dims = _as_matrix(P)
    labels = np.argmax(M, axis=0).astype(np.int64)
    labels.flags.writeable = False
    return LabelMap(labels=labels, dims=dims, num_classes=M.shape[0])


def per_class_positives(P, metric: str = "dice") -> OverlapPartition:
    """Run the binary reciprocal-moment rule per class row and partition pixels."""
    if metric not in ("dice", "iou"):
        raise ValueError(f"metric must be 'dice' or 'iou', got {metric!r}")
    rule = rankdice_rma if metric == "dice" else rankiou_rma
    M, _ = _as_matrix(P)
    C, d = M.shape
    selected = np.zeros((C, d), dtype=bool)
    for c in range(C):
        mask, _curve = rule(M[c])
        selected[c] = mask.bits.astype(bool)
    counts = selected.sum(axis=0)
    positives = tuple(np.flatnonzero(selected[c]) for c in range(C))
    kept = tuple(np.flatnonzero(selected[c] & (counts == 1)) for c in range(C))
    part = OverlapPartition(
        positives=positives,
        overlap=np.flatnonzero(counts >= 2),
        kept=kept,
        unassigned=np.flatnonzero(counts == 0),
    )
    for arr in part.positives + part.kept + (part.overlap, part.unassigned):
        arr.flags.writeable = False
    return part


def rma_score_dice(P, kept, mu_c: float, c: int, j: int) -> float:
    """Gain in the Dice reciprocal-moment objective from adding pixel j to kept."""
    M, _ = _as_matrix(P)
    idx = _kept_indices(kept)
    s = float(M[c, idx].sum()) if idx.size else 0.0
    n = idx.size
    p = float(M[c, j])
    return 2.0 * (p + s) / (n + mu_c + 2.0) - 2.0 * s / (n + mu_c + 1.0)


def rma_score_iou(P, kept, mu_c: float, c: int, j: int) -> float:
    """Gain in the IoU reciprocal-moment objective from adding pixel j to kept."""
    M, _ = _as_matrix(P)
    idx = _kept_indices(kept)
    s = float(M[c, idx].sum()) if idx.size else 0.0
    n = idx.size
    p = float(M[c, j])
    num = p + s
    if num <= 0.0:
        first = 0.0
    elif n + mu_c - num <= _IOU_DEN_GUARD:
        first = float("inf")
    else:
        first = num / (n + mu_c - num)
    second = s / (n + mu_c - s) if s > 0.0 else 0.0
    return first - second


def wprob_score(P, kept, c: int, j: int) -> float:
    """Probability of pixel j under class c, divided by the kept-set size."""
    M, _ = _as_matrix(P)
    n = _kept_indices(kept).size
    p = float(M[c, j])
    return p / n if n else p


def overlap_scores(P, part: OverlapPartition, kind: str) -> OverlapScore:
    """Score every class on every overlap pixel; vectorized over both axes."""
    if kind not in SCORE_KINDS:
        raise ValueError(f"score kind must be one of {SCORE_KINDS}, got {kind!r}")
    M, _ = _as_matrix(P)
    C = M.shape[0]
    J = part.overlap
    Pj = M[:, J]
    if kind == "prob":
        values = Pj.copy()
    elif kind == "wprob":
        n = np.array([k.size for k in part.kept], dtype=np.float64)
        values = Pj / np.where(n == 0.0, 1.0, n)[:, None]
    else:
        mu = M.sum(axis=1)
        n = np.array([k.size for k in part.kept], dtype=np.float64)
        s = np.array([M[c, part.kept[c]].sum() if part.kept[c].size else 0.0 for c in range(C)])
        if kind == "rma-dice":
            values = (
                2.0 * (Pj + s[:, None]) / (n + mu + 2.0)[:, None]
                - (2.0 * s / (n + mu + 1.0))[:, None]
            )
        else:
            num = Pj + s[:, None]
            den = (n + mu)[:, None] - num
            with np.errstate(divide="ignore", invalid="ignore"):
                first = num / den
            first = np.where(num <= 0.0, 0.0, np.where(den <= _IOU_DEN_GUARD, np.inf, first))
            den2 = np.where(s > 0.0, n + mu - s, 1.0)  # s > 0 forces a kept pixel, so den2 ≥ 1
            second = np.where(s > 0.0, s / den2, 0.0)
            values = first - second[:, None]
    values.flags.writeable = False
    return OverlapScore(kind=kind, pixels=J, values=values)


def resolve_overlaps(P, part: OverlapPartition, kind: str = "rma-dice") -> LabelMap:
    """Turn a partition into a total labeling.

    Kept pixels keep their class; overlap pixels go to the argmax score over
    all classes (ties to the lowest class); unassigned pixels go to the
    highest-probability class.
    """
    M, dims = _as_matrix(P)
    C, d = M.shape
    labels = np.zeros(d, dtype=np.int64)
    for c in range(C):
        labels[part.kept[c]] = c
    if part.unassigned.size:
        labels[part.unassigned] = np.argmax(M[:, part.unassigned], axis=0)
    if part.overlap.size:
        sc = overlap_scores(P, part, kind)
        labels[part.overlap] = np.argmax(sc.values, axis=0)
    labels.flags.writeable = False
    return LabelMap(labels=labels, dims=dims, num_classes=C)


def rankseg_rma_multiclass(P, metric: str = "dice", score: str | None = None) -> LabelMap:
    """Full multiclass pipeline: per-class selection, then overlap resolution.

    The default resolution score matches the metric (rma-dice for dice,
    rma-iou for iou).
    """
    if score is None:
        score = "rma-dice" if metric == "dice" else "rma-iou"
    part = per_class_positives(P, metric)
    return resolve_overlaps(P, part, score)
