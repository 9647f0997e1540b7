"""Decision rules for binary probability maps.

Every ranking rule shares one shape: sort pixels by probability, score each
candidate volume τ (take the τ highest-probability pixels), and output the
top-τ* mask for the best-scoring volume. The rules differ only in the
objective: the exact expected Dice/IoU of the candidate, or one of two
cheaper approximations (the "blind" one replaces the leave-one-out count
with the full count; the reciprocal-moment one replaces the reciprocal
moment with the reciprocal of the mean).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ExactCapError
from .poisson_binomial import PBDistribution, _leave_one_out_batch, pb_pmf
from .probmap import BinaryMask, BinaryProbMap

# Exact rules do quadratic work; above this many pixels callers must switch
# to the blind or reciprocal-moment approximation.
RULE_CAP_DEFAULT = 4096

_LOO_CHUNK = 1024


@dataclass(frozen=True)
class VolumeCurve:
    """Objective values over candidate volumes for one probability map.

    order    : all pixel indices by descending probability, ties by ascending index
    cumsum   : q_τ = sum of the τ largest probabilities, for τ in {0..d}
    values   : objective value per τ in {0..d} (values[0] is always 0)
    tau_star : smallest maximizer of values
    kind     : which objective produced the curve
    """

    order: np.ndarray
    cumsum: np.ndarray
    values: np.ndarray
    tau_star: int
    kind: str

    @property
    def mean(self) -> float:
        return float(self.cumsum[-1])


def _as_map(map_or_probs) -> BinaryProbMap:
    if isinstance(map_or_probs, BinaryProbMap):
        return map_or_probs
    return BinaryProbMap.from_array(np.asarray(map_or_probs, dtype=np.float64))


def _ranked(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Descending stable sort; returns (order, sorted probs, cumsum, positive count)."""
    order = np.argsort(-probs, kind="stable")
    sp = probs[order]
    q = np.concatenate(([0.0], np.cumsum(sp)))
    t_pos = int(np.count_nonzero(probs))
    return order, sp, q, t_pos


def _finish(
    m: BinaryProbMap, order: np.ndarray, q: np.ndarray, values: np.ndarray, kind: str
) -> tuple[BinaryMask, VolumeCurve]:
    tau_star = int(np.argmax(values))  # first maximum = smallest τ
    bits = np.zeros(m.d, dtype=np.uint8)
    if tau_star:
        bits[order[:tau_star]] = 1
    for arr in (order, q, values, bits):
        arr.flags.writeable = False
    mask = BinaryMask(bits=bits, dims=m.dims)
    curve = VolumeCurve(order=order, cumsum=q, values=values, tau_star=tau_star, kind=kind)
    return mask, curve


def threshold_rule(map_or_probs, t: float) -> BinaryMask:
    """Baseline: foreground wherever p_j ≥ t."""
    m = _as_map(map_or_probs)
    bits = (m.probs >= t).astype(np.uint8)
    bits.flags.writeable = False
    return BinaryMask(bits=bits, dims=m.dims)


def _check_cap(d: int, cap: int, what: str) -> None:
    if d > cap:
        raise ExactCapError(
            f"{what} is quadratic in the pixel count and capped at {cap} pixels "
            f"(got {d}); use the blind or reciprocal-moment rule instead"
        )


def _loo_rows(pmf: np.ndarray, sp: np.ndarray, start: int) -> np.ndarray:
    """Leave-one-out PMFs for a chunk of ranked components, with rebuild fallback."""
    Q, bad = _leave_one_out_batch(pmf, sp[start : start + _LOO_CHUNK])
    for i in np.flatnonzero(bad):
        Q[i] = pb_pmf(np.delete(sp, start + i)).pmf
    return Q


def rankdice_exact(map_or_probs, cap: int = RULE_CAP_DEFAULT) -> tuple[BinaryMask, VolumeCurve]:
    """Expected-Dice-optimal mask by exact evaluation of every candidate volume.

    The objective for volume τ is Σ_{j in top τ} 2 p_j E[(τ+Γ_{-j}+1)^{-1}],
    where Γ_{-j} is the foreground count excluding pixel j. Accumulating the
    probability-weighted leave-one-out PMFs rank by rank makes the whole curve
    cost O(d²).
    """
    m = _as_map(map_or_probs)
    _check_cap(m.d, cap, "the exact Dice rule")
    order, sp, q, t = _ranked(m.probs)
    d = m.d
    values = np.zeros(d + 1)
    if t:
        pos = sp[:t]
        pmf = pb_pmf(pos).pmf if t > 1 else None
        # weighted[l] accumulates Σ_{ranked j so far} p_j · P(Γ_{-j} = l)
        weighted = np.zeros(t)
        recip = 1.0 / np.arange(1.0, d + t + 1.0)  # recip[n] = 1/(n+1)
        for start in range(0, t, _LOO_CHUNK):
            if t > 1:
                rows = _loo_rows(pmf, pos, start)
            else:
                rows = np.ones((1, 1))
            for i in range(start, min(start + _LOO_CHUNK, t)):
                weighted += pos[i] * rows[i - start]
                values[i + 1] = 2.0 * (weighted @ recip[i + 1 : i + 1 + t])
        for tau in range(t + 1, d + 1):  # beyond the positives the curve only decays
            values[tau] = 2.0 * (weighted @ recip[tau : tau + t])
    return _finish(m, order, q, values, "dice-exact")


def rankdice_ba(map_or_probs) -> tuple[BinaryMask, VolumeCurve]:
    """Blind approximation of the Dice rule.

    Replaces the leave-one-out count with the full count Γ, making the
    objective q_τ · S(τ) with S(τ) = Σ_l 2 P(Γ=l)/(τ+l+1). All S(τ) come out
    of a single FFT cross-correlation of the PMF with the reciprocal sequence.
    """
    m = _as_map(map_or_probs)
    order, sp, q, t = _ranked(m.probs)
    d = m.d
    values = np.zeros(d + 1)
    if t:
        pmf = pb_pmf(sp[:t]).pmf
        recip = 1.0 / np.arange(1.0, d + t + 2.0)  # recip[n] = 1/(n+1), n = 0..d+t
        s = 2.0 * signal.correlate(recip, pmf, mode="valid")  # s[τ] = S(τ), τ = 0..d
        values = q * s
        values[0] = 0.0
    return _finish(m, order, q, values, "dice-ba")


def rankdice_rma(map_or_probs) -> tuple[BinaryMask, VolumeCurve]:
    """Reciprocal-moment approximation of the Dice rule: O(d) past the sort.

    Objective 2 q_τ/(τ+μ+1) with μ = Σ p_j; the denominator swaps the
    reciprocal moment for the reciprocal of the mean.
    """
    m = _as_map(map_or_probs)
    order, sp, q, t = _ranked(m.probs)
    d = m.d
    mu = q[-1]
    values = np.zeros(d + 1)
    values[1:] = 2.0 * q[1:] / (np.arange(1.0, d + 1.0) + mu + 1.0)
    return _finish(m, order, q, values, "dice-rma")


def rankiou_exact(map_or_probs, cap: int = RULE_CAP_DEFAULT) -> tuple[BinaryMask, VolumeCurve]:
    """Expected-IoU-optimal mask by exact evaluation of every candidate volume.

    The objective for volume τ is q_τ · E[(τ+Γ_out)^{-1}] with Γ_out the
    foreground count over the pixels outside the candidate. Walking τ from
    the top down grows Γ_out one Bernoulli at a time (O(d²) overall); an
    empty complement contributes E[(τ+0)^{-1}] = 1/τ.
    """
    m = _as_map(map_or_probs)
    _check_cap(m.d, cap, "the exact IoU rule")
    order, sp, q, t = _ranked(m.probs)
    d = m.d
    values = np.zeros(d + 1)
    if t:
        if t < d:
            values[t + 1 :] = q[t] / np.arange(t + 1.0, d + 1.0)
        recip = 1.0 / np.arange(1.0, t + 1.0)  # recip[n] = 1/(n+1), enough for τ+l ≤ t
        g = np.array([1.0])  # PMF of the complement count, initially empty
        for tau in range(t, 0, -1):
            values[tau] = q[tau] * (g @ recip[tau - 1 : tau - 1 + g.size])
            if tau > 1:
                p_in = sp[tau - 1]
                grown = np.empty(g.size + 1)
                grown[0] = g[0] * (1.0 - p_in)
                grown[1:-1] = g[1:] * (1.0 - p_in) + g[:-1] * p_in
                grown[-1] = g[-1] * p_in
                g = grown
    return _finish(m, order, q, values, "iou-exact")


def rankiou_rma(map_or_probs) -> tuple[BinaryMask, VolumeCurve]:
    """Reciprocal-moment approximation of the IoU rule.

    Objective q_τ/(τ + μ − q_τ): the mean count outside the candidate stands
    in for the reciprocal moment of the complement.
    """
    m = _as_map(map_or_probs)
    order, sp, q, t = _ranked(m.probs)
    d = m.d
    mu = q[-1]
    values = np.zeros(d + 1)
    values[1:] = q[1:] / (np.arange(1.0, d + 1.0) + mu - q[1:])
    return _finish(m, order, q, values, "iou-rma")


def _mask_indices(map_: BinaryProbMap, mask: BinaryMask | np.ndarray) -> np.ndarray:
    bits = mask.bits if isinstance(mask, BinaryMask) else np.asarray(mask).reshape(-1)
    if bits.size != map_.d:
        raise ValueError(f"mask has {bits.size} pixels, map has {map_.d}")
    return np.flatnonzero(bits)


def expected_dice(map_or_probs, mask, cap: int = RULE_CAP_DEFAULT) -> float:
    """Exact E[Dice(mask, Y)] under independent Bernoulli pixels.

    Empty mask scores P(Y empty) by the both-empty-scores-1 convention;
    a nonempty mask scores Σ_{j in mask} 2 p_j E[(|mask|+Γ_{-j}+1)^{-1}].
    """
    m = _as_map(map_or_probs)
    idx = _mask_indices(m, mask)
    if m.d > cap and idx.size > cap:
        raise ExactCapError(
            f"exact expected Dice needs d ≤ {cap} or a mask of ≤ {cap} pixels "
            f"(got d={m.d}, |mask|={idx.size})"
        )
    positive = m.probs[m.probs > 0.0]
    dist = pb_pmf(positive)
    if idx.size == 0:
        return float(dist.pmf[0])
    n_sel = idx.size
    p_sel = m.probs[idx]
    p_sel = p_sel[p_sel > 0.0]  # zero-probability pixels contribute nothing
    if p_sel.size == 0:
        return 0.0
    t = positive.size
    if t == 1:
        weighted = p_sel[:1] * np.ones(1)
    else:
        weighted = np.zeros(t)
        for start in range(0, p_sel.size, _LOO_CHUNK):
            chunk = p_sel[start : start + _LOO_CHUNK]
            Q, bad = _leave_one_out_batch(dist.pmf, chunk)
            for i in np.flatnonzero(bad):
                rebuilt = positive.copy()
                # remove one occurrence of this probability value
                rebuilt = np.delete(rebuilt, np.argmax(rebuilt == chunk[i]))
                Q[i] = pb_pmf(rebuilt).pmf
            weighted += chunk @ Q
    recip = 1.0 / (np.arange(t) + n_sel + 1.0)
    return float(2.0 * (weighted @ recip))


def expected_iou(map_or_probs, mask, cap: int = RULE_CAP_DEFAULT) -> float:
    """Exact E[IoU(mask, Y)] under independent Bernoulli pixels.

    Empty mask scores P(Y empty); a nonempty mask scores
    q_mask · E[(|mask|+Γ_out)^{-1}] with Γ_out the count outside the mask.
    """
    m = _as_map(map_or_probs)
    idx = _mask_indices(m, mask)
    if m.d > cap and idx.size > cap:
        raise ExactCapError(
            f"exact expected IoU needs d ≤ {cap} or a mask of ≤ {cap} pixels "
            f"(got d={m.d}, |mask|={idx.size})"
        )
    if idx.size == 0:
        positive = m.probs[m.probs > 0.0]
        return float(pb_pmf(positive).pmf[0])
    selected = np.zeros(m.d, dtype=bool)
    selected[idx] = True
    outside = m.probs[~selected]
    outside = outside[outside > 0.0]
    dist = pb_pmf(outside)
    q_sel = float(m.probs[idx].sum())
    recip = 1.0 / (np.arange(dist.pmf.size) + idx.size)
    return float(q_sel * (dist.pmf @ recip))
