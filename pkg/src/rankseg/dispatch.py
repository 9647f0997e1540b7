"""Rule-name dispatch shared by the command line and any embedding callers."""

from __future__ import annotations

import numpy as np

from .binary_rules import (
    RULE_CAP_DEFAULT,
    rankdice_ba,
    rankdice_exact,
    rankdice_rma,
    rankiou_exact,
    rankiou_rma,
    threshold_rule,
)
from .multiclass import SCORE_KINDS, argmax_prob, rankseg_rma_multiclass
from .probmap import BinaryMask, BinaryProbMap, LabelMap, MulticlassProbMap

BINARY_RULES = (
    "threshold",
    "rankdice-exact",
    "rankdice-ba",
    "rankdice-rma",
    "rankiou-exact",
    "rankiou-rma",
)
MULTICLASS_RULES = ("argmax", "rankdice-rma", "rankiou-rma")
ALL_RULES = ("argmax",) + BINARY_RULES


def wants_multiclass(ndim: int, rule: str, score: str | None) -> bool:
    """Decide the prediction path from array rank and configuration.

    3-D arrays are always (C, H, W) multiclass. 2-D arrays are (H, W) binary
    unless the rule or an explicit score forces the multiclass reading (C, d).
    """
    if ndim == 3:
        return True
    if rule == "argmax" or score is not None:
        return True
    return False


def predict_binary(
    map_or_probs,
    rule: str,
    threshold: float = 0.5,
    exact_cap: int = RULE_CAP_DEFAULT,
) -> BinaryMask:
    """Run one binary rule by name and return its mask."""
    m = (
        map_or_probs
        if isinstance(map_or_probs, BinaryProbMap)
        else BinaryProbMap.from_array(np.asarray(map_or_probs, dtype=np.float64))
    )
    if rule == "threshold":
        return threshold_rule(m, threshold)
    if rule == "rankdice-exact":
        return rankdice_exact(m, cap=exact_cap)[0]
    if rule == "rankdice-ba":
        return rankdice_ba(m)[0]
    if rule == "rankdice-rma":
        return rankdice_rma(m)[0]
    if rule == "rankiou-exact":
        return rankiou_exact(m, cap=exact_cap)[0]
    if rule == "rankiou-rma":
        return rankiou_rma(m)[0]
    if rule == "argmax":
        raise ValueError("rule 'argmax' needs a multiclass map; use 'threshold' for binary maps")
    raise ValueError(f"unknown rule {rule!r}; binary rules are {BINARY_RULES}")


def predict_multiclass(map_or_P, rule: str, score: str | None = None) -> LabelMap:
    """Run one multiclass rule by name and return its label map."""
    P = (
        map_or_P
        if isinstance(map_or_P, MulticlassProbMap)
        else MulticlassProbMap.from_array(np.asarray(map_or_P, dtype=np.float64))
    )
    if score is not None and score not in SCORE_KINDS:
        raise ValueError(f"score must be one of {SCORE_KINDS}, got {score!r}")
    if rule == "argmax":
        return argmax_prob(P)
    if rule == "rankdice-rma":
        return rankseg_rma_multiclass(P, "dice", score)
    if rule == "rankiou-rma":
        return rankseg_rma_multiclass(P, "iou", score)
    raise ValueError(f"multiclass maps support rules {MULTICLASS_RULES}, got {rule!r}")
