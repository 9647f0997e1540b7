"""Brute-force ground truth for the ranking rules, by outcome enumeration.

Everything here is exponential in the pixel count on purpose: these routines
exist to check the fast rules, not to be fast themselves. Expected metrics
enumerate all 2^d ground-truth outcomes; the optimal-mask search additionally
enumerates all 2^d candidate masks.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .probmap import BinaryMask, BinaryProbMap

# Enumerating outcomes for one mask is O(2^d); searching over masks is O(4^d).
ENUM_CAP = 20
SEARCH_CAP = 15

# Up to this d the (outcome, mask) metric table is cached across calls.
_MATRIX_CACHE_MAX = 12

_CHUNK = 1 << 16

# The mask search forms (outcome chunk × mask chunk) matrices; 4096² float64
# keeps each one near 134 MB.
_SEARCH_CHUNK = 1 << 12


def _as_probs(map_or_probs) -> np.ndarray:
    if isinstance(map_or_probs, BinaryProbMap):
        return map_or_probs.probs
    return BinaryProbMap.from_array(np.asarray(map_or_probs, dtype=np.float64)).probs


def _check_metric(metric: str) -> None:
    if metric not in ("dice", "iou"):
        raise ValueError(f"metric must be 'dice' or 'iou', got {metric!r}")


@lru_cache(maxsize=32)
def _bit_table(d: int) -> np.ndarray:
    """(2^d, d) matrix of all bit patterns; column j is bit j (pixel j)."""
    ks = np.arange(1 << d, dtype=np.uint32)
    bits = ((ks[:, None] >> np.arange(d, dtype=np.uint32)) & 1).astype(np.float64)
    bits.flags.writeable = False
    return bits


def _outcome_probs(p: np.ndarray) -> np.ndarray:
    """Probability of every ground-truth outcome, indexed like _bit_table."""
    bits = _bit_table(p.size)
    pr = np.prod(np.where(bits == 1.0, p, 1.0 - p), axis=1)
    return pr


@lru_cache(maxsize=32)
def _metric_table(d: int, metric: str) -> np.ndarray:
    """(outcome, mask) metric values for all 2^d × 2^d pairs; both-empty = 1."""
    bits = _bit_table(d)
    inter = bits @ bits.T  # inter[y, mask] = |mask ∩ y|
    sizes = bits.sum(axis=1)
    union_base = sizes[:, None] + sizes[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        if metric == "dice":
            table = 2.0 * inter / union_base
        else:
            table = inter / (union_base - inter)
    table[np.isnan(table)] = 1.0  # 0/0 only happens when both sets are empty
    table.flags.writeable = False
    return table


def _metric_chunk(bits_y: np.ndarray, bits_m: np.ndarray, metric: str) -> np.ndarray:
    inter = bits_y @ bits_m.T
    base = bits_y.sum(axis=1)[:, None] + bits_m.sum(axis=1)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        table = 2.0 * inter / base if metric == "dice" else inter / (base - inter)
    table[np.isnan(table)] = 1.0
    return table


def enumerate_expected_metric(map_or_probs, mask, metric: str = "dice") -> float:
    """E[metric(mask, Y)] by summing over every ground-truth outcome."""
    _check_metric(metric)
    p = _as_probs(map_or_probs)
    d = p.size
    if d > ENUM_CAP:
        raise ValueError(f"outcome enumeration is capped at d = {ENUM_CAP}, got {d}")
    mask_bits = mask.bits if isinstance(mask, BinaryMask) else np.asarray(mask).reshape(-1)
    mask_row = mask_bits.astype(np.float64)[None, :]
    total = 0.0
    for start in range(0, 1 << d, _CHUNK):
        stop = min(start + _CHUNK, 1 << d)
        ks = np.arange(start, stop, dtype=np.uint32)
        bits = ((ks[:, None] >> np.arange(d, dtype=np.uint32)) & 1).astype(np.float64)
        pr = np.prod(np.where(bits == 1.0, p, 1.0 - p), axis=1)
        total += float(pr @ _metric_chunk(bits, mask_row, metric)[:, 0])
    return total


def _lex_key(k: int, d: int) -> int:
    """Reorder mask bits so numeric order equals lexicographic tuple order."""
    return int("".join("1" if (k >> j) & 1 else "0" for j in range(d)), 2)


def bayes_optimal_mask(map_or_probs, metric: str = "dice") -> tuple[BinaryMask, float]:
    """Exhaustive search over all 2^d masks for the best expected metric.

    Ties go to the lexicographically smallest bit vector.
    """
    _check_metric(metric)
    m = (
        map_or_probs
        if isinstance(map_or_probs, BinaryProbMap)
        else BinaryProbMap.from_array(np.asarray(map_or_probs, dtype=np.float64))
    )
    p = m.probs
    d = p.size
    if d > SEARCH_CAP:
        raise ValueError(f"mask search is capped at d = {SEARCH_CAP}, got {d}")
    if d <= _MATRIX_CACHE_MAX:
        values = _outcome_probs(p) @ _metric_table(d, metric)
    else:
        values = np.zeros(1 << d)
        shifts = np.arange(d, dtype=np.uint32)
        for start in range(0, 1 << d, _SEARCH_CHUNK):
            ks = np.arange(start, min(start + _SEARCH_CHUNK, 1 << d), dtype=np.uint32)
            bits_y = ((ks[:, None] >> shifts) & 1).astype(np.float64)
            pr = np.prod(np.where(bits_y == 1.0, p, 1.0 - p), axis=1)
            for mstart in range(0, 1 << d, _SEARCH_CHUNK):
                mks = np.arange(mstart, min(mstart + _SEARCH_CHUNK, 1 << d), dtype=np.uint32)
                bits_m = ((mks[:, None] >> shifts) & 1).astype(np.float64)
                values[mstart : mstart + mks.size] += pr @ _metric_chunk(bits_y, bits_m, metric)
    best_value = float(values.max())
    candidates = np.flatnonzero(values == best_value)
    k = int(candidates[0]) if candidates.size == 1 else min(
        (int(c) for c in candidates), key=lambda c: _lex_key(c, d)
    )
    bits = ((k >> np.arange(d)) & 1).astype(np.uint8)
    bits.flags.writeable = False
    return BinaryMask(bits=bits, dims=m.dims), best_value


def verify_ranking_property(map_or_probs, metric: str = "dice") -> bool:
    """Check that some optimal mask consists of the top-|mask| ranked pixels.

    Ranking is by descending probability with ties broken by pixel index, the
    same order the fast rules use. The empty mask is the top-0 set.
    """
    p = _as_probs(map_or_probs)
    mask, value = bayes_optimal_mask(p, metric)
    tau = int(mask.bits.sum())
    order = np.argsort(-p, kind="stable")
    top = np.zeros(p.size, dtype=np.uint8)
    if tau:
        top[order[:tau]] = 1
    if np.array_equal(top, mask.bits):
        return True
    # A tie elsewhere can pick a non-top mask; accept if the top set scores
    # identically (the property is about existence of a top-τ optimum).
    return enumerate_expected_metric(p, top, metric) >= value - 1e-12
