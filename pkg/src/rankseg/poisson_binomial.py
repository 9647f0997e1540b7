"""Sums of independent Bernoulli variables (Poisson-binomial counts).

Everything the ranking rules need about the foreground-count variable
Γ = Σ_j B_j lives here: exact and FFT-based PMFs, removal of a single
component by deconvolution, reciprocal moments E[(Γ+a)^{-1}], their
closed-form sandwich bounds, and an independent quadrature cross-check
through the probability generating function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DeconvolutionError, PmfError

# Negative PMF mass beyond this total is a bug, not rounding noise.
CLIP_BUDGET = 1e-8
# A deconvolved PMF entry below this signals an unstable removal.
LOO_NEG_TOL = 1e-8
# Entries this small may appear pre-clip without tripping validation.
ENTRY_NEG_TOL = 1e-12

_SUM_TOL = 1e-9
_MEAN_TOL = 1e-7
# Work-matrix entries per chunk for the frequency-domain product.
_DFT_CHUNK = 2_000_000
# Below this size the direct quadratic construction beats FFT merging.
_AUTO_DP_MAX = 512


def _as_prob_vector(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if p.size and (p.min() < 0.0 or p.max() > 1.0 or np.isnan(p).any()):
        raise ValueError("component probabilities must lie in [0, 1]")
    return p


@dataclass(frozen=True)
class PBDistribution:
    """PMF of a sum of m independent Bernoulli components on support {0..m}."""

    pmf: np.ndarray
    mean: float

    @property
    def m(self) -> int:
        return self.pmf.size - 1

    def __post_init__(self) -> None:
        pmf = self.pmf
        if pmf.ndim != 1 or pmf.size == 0:
            raise PmfError("pmf must be a nonempty vector")
        if pmf.min() < 0.0:
            raise PmfError(f"pmf has negative entries (min {pmf.min():.3e})")
        total = float(pmf.sum())
        if abs(total - 1.0) > _SUM_TOL:
            raise PmfError(f"pmf sums to {total:.12f}, not 1")
        implied = float(np.arange(pmf.size) @ pmf)
        # Absolute 1e-7 at test scales; proportionally relaxed for huge means
        # where FFT rounding alone exceeds it.
        if abs(implied - self.mean) > max(_MEAN_TOL, self.mean * 1e-10):
            raise PmfError(
                f"declared mean {self.mean:.9g} inconsistent with pmf mean {implied:.9g}"
            )


def _finish_pmf(raw: np.ndarray, mean: float) -> PBDistribution:
    """Clip tiny negative FFT residue, renormalize, and wrap."""
    neg = raw < 0.0
    if neg.any():
        clipped = -float(raw[neg].sum())
        if clipped >= CLIP_BUDGET:
            raise PmfError(
                f"negative PMF mass {clipped:.3e} exceeds the {CLIP_BUDGET:g} cleanup budget"
            )
        raw = np.where(neg, 0.0, raw)
    total = raw.sum()
    if not 0.5 < total < 1.5:
        raise PmfError(f"PMF mass {total:.6f} is not close to 1")
    out = raw / total
    out.flags.writeable = False
    return PBDistribution(pmf=out, mean=mean)


def pb_mean(probs) -> float:
    """Σ p_j with compensated summation (exact to the last rounding)."""
    p = _as_prob_vector(probs)
    return math.fsum(p.tolist())


def pb_pmf_dp(probs) -> PBDistribution:
    """Exact PMF by convolving in one Bernoulli at a time (O(m²))."""
    p = _as_prob_vector(probs)
    m = p.size
    pmf = np.zeros(m + 1)
    pmf[0] = 1.0
    hi = 0
    for pk in p:
        pmf[1 : hi + 2] = pmf[1 : hi + 2] * (1.0 - pk) + pmf[0 : hi + 1] * pk
        pmf[0] *= 1.0 - pk
        hi += 1
    pmf.flags.writeable = False
    return PBDistribution(pmf=pmf, mean=pb_mean(p))


def pb_pmf_dft(probs) -> PBDistribution:
    """PMF through the characteristic function evaluated on the (m+1)-point grid.

    The product Π_j (1 - p_j + p_j e^{iωk}) is accumulated as log-magnitude
    plus phase so it cannot underflow at large m; one inverse FFT turns the
    m+1 grid values into the PMF. Conjugate symmetry halves the work.
    """
    p = _as_prob_vector(probs)
    m = p.size
    n = m + 1
    chi = np.empty(n, dtype=np.complex128)
    chi[0] = 1.0
    kmax = n // 2
    block = max(1, _DFT_CHUNK // max(m, 1))
    for start in range(1, kmax + 1, block):
        kk = np.arange(start, min(start + block, kmax + 1))
        z = 1.0 - p[None, :] * (1.0 - np.exp(2j * np.pi * kk[:, None] / n))
        with np.errstate(divide="ignore"):
            logmag = np.log(np.abs(z)).sum(axis=1)
        phase = np.arctan2(z.imag, z.real).sum(axis=1)
        chi[kk] = np.exp(logmag + 1j * phase)
    chi[kmax + 1 :] = np.conj(chi[1 : n - kmax][::-1])
    raw = np.fft.fft(chi).real / n
    return _finish_pmf(raw, pb_mean(p))


def _pmf_fft_merge(probs: np.ndarray) -> np.ndarray:
    """PMF by pairwise FFT merging of Bernoulli factors, O(m log² m).

    Each level convolves rows pairwise with one batched real FFT; an odd row
    is carried to the next level unchanged.
    """
    m = probs.size
    rows = np.empty((m, 2))
    rows[:, 0] = 1.0 - probs
    rows[:, 1] = probs
    while rows.shape[0] > 1:
        odd = rows[-1] if rows.shape[0] % 2 else None
        pair = rows[: rows.shape[0] - (rows.shape[0] % 2)]
        a, b = pair[0::2], pair[1::2]
        out_len = a.shape[1] + b.shape[1] - 1
        nfft = 1 << (out_len - 1).bit_length()
        fa = np.fft.rfft(a, nfft, axis=1)
        fb = np.fft.rfft(b, nfft, axis=1)
        merged = np.fft.irfft(fa * fb, nfft, axis=1)[:, :out_len]
        if odd is not None:
            padded = np.zeros((merged.shape[0] + 1, out_len))
            padded[:-1] = merged
            padded[-1, : odd.size] = odd
            rows = padded
        else:
            rows = merged
    return rows[0][: m + 1]


def pb_pmf(probs, method: str = "auto") -> PBDistribution:
    """PMF with a selectable backend.

    "dp" is the exact quadratic construction, "dft" the characteristic
    function grid, "fft" pairwise FFT merging (near-linearithmic, the backend
    the large ranking rules rely on), "auto" picks dp for small component
    counts and fft above.
    """
    p = _as_prob_vector(probs)
    if method == "auto":
        method = "dp" if p.size <= _AUTO_DP_MAX else "fft"
    if method == "dp":
        return pb_pmf_dp(p)
    if method == "dft":
        return pb_pmf_dft(p)
    if method == "fft":
        if p.size == 0:
            return pb_pmf_dp(p)
        return _finish_pmf(_pmf_fft_merge(p), pb_mean(p))
    raise ValueError(f"unknown method {method!r}")


def _leave_one_out_batch(pmf: np.ndarray, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deconvolve each probs[i] out of the shared pmf.

    Returns (Q, bad): Q[i] is the PMF of the sum without component i on
    support {0..m-1}, rows renormalized after clipping negativity within
    tolerance; bad[i] marks rows whose negativity exceeded the instability
    threshold (callers rebuild those from scratch).
    """
    m = pmf.size - 1
    if m < 1:
        raise ValueError("cannot remove a component from an empty distribution")
    k = probs.size
    Q = np.empty((k, m))
    is_zero = probs == 0.0
    is_one = probs == 1.0
    fwd = (probs > 0.0) & (probs <= 0.5)
    bwd = (probs > 0.5) & (probs < 1.0)
    if is_zero.any():
        Q[is_zero] = pmf[:m]
    if is_one.any():
        Q[is_one] = pmf[1:]
    if fwd.any():
        pf = probs[fwd, None]
        block = Q[fwd]
        block[:, 0] = pmf[0] / (1.0 - pf[:, 0])
        for l in range(1, m):
            block[:, l] = (pmf[l] - pf[:, 0] * block[:, l - 1]) / (1.0 - pf[:, 0])
        Q[fwd] = block
    if bwd.any():
        pb = probs[bwd, None]
        block = Q[bwd]
        block[:, m - 1] = pmf[m] / pb[:, 0]
        for l in range(m - 1, 0, -1):
            block[:, l - 1] = (pmf[l] - (1.0 - pb[:, 0]) * block[:, l]) / pb[:, 0]
        Q[bwd] = block
    bad = Q.min(axis=1) < -LOO_NEG_TOL
    np.clip(Q, 0.0, None, out=Q)
    good = ~bad
    Q[good] /= Q[good].sum(axis=1, keepdims=True)
    return Q, bad


def pb_leave_one_out(dist: PBDistribution, p_j: float) -> PBDistribution:
    """Distribution of the sum with one component of probability p_j removed.

    Solves the convolution identity for the reduced PMF, iterating upward
    from 0 when p_j ≤ 0.5 and downward from the top otherwise, so the
    division is always by max(p_j, 1-p_j). Raises DeconvolutionError when the
    result goes negative beyond tolerance; callers should then rebuild the
    reduced distribution from the remaining components directly.
    """
    if not 0.0 <= p_j <= 1.0:
        raise ValueError("p_j must lie in [0, 1]")
    Q, bad = _leave_one_out_batch(dist.pmf, np.array([p_j]))
    if bad[0]:
        raise DeconvolutionError(
            f"removing component {p_j:g} produced negative probability mass; "
            "rebuild the reduced distribution from scratch"
        )
    out = Q[0]
    out.flags.writeable = False
    return PBDistribution(pmf=out, mean=max(dist.mean - p_j, 0.0))


def reciprocal_moment(dist: PBDistribution, a: float) -> float:
    """E[(Γ+a)^{-1}] as an exact weighted sum over the support."""
    if a <= 0.0:
        raise ValueError("a must be positive")
    return float(dist.pmf @ (1.0 / (np.arange(dist.pmf.size) + a)))


def reciprocal_moment_bounds(mean: float, m: int, tau: int) -> tuple[float, float]:
    """Closed-form sandwich for E[(Γ+τ)^{-1}].

    Lower bound 1/(μ+τ) is convexity; upper bound 1/((m+1)/m·μ + τ - 1)
    comes from bounding the count by a binomial with the same mean. The upper
    bound is valid for any m at least the number of nonzero components; the
    μ = 0, τ = 1 corner makes it +∞.
    """
    if tau < 1:
        raise ValueError("tau must be ≥ 1")
    if m < 1:
        raise ValueError("m must be ≥ 1")
    if not 0.0 <= mean <= m:
        raise ValueError("mean must lie in [0, m]")
    lower = 1.0 / (mean + tau)
    denom = (m + 1) / m * mean + tau - 1
    upper = math.inf if denom <= 0.0 else 1.0 / denom
    return lower, upper


def pgf_integral_check(probs, a: float) -> float:
    """E[(Γ+a)^{-1}] via ∫₀¹ t^{a-1} Π_j (1-p_j+p_j t) dt by adaptive quadrature.

    An independent route to the reciprocal moment (the integrand is the
    probability generating function); used to cross-check the direct sum.
    """
    if a < 1.0:
        raise ValueError("a must be ≥ 1 so the integrand stays bounded")
    p = _as_prob_vector(probs)

    def integrand(t: float) -> float:
        with np.errstate(divide="ignore"):
            log_terms = np.log(1.0 - p * (1.0 - t))
        g = math.exp(log_terms.sum()) if log_terms.size else 1.0
        return g * t ** (a - 1.0)

    value, abserr = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)
    if abserr > 1e-9:
        raise ArithmeticError(f"quadrature error estimate {abserr:.3e} above 1e-9")
    return value
