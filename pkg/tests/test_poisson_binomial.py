import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankseg.errors import DeconvolutionError, PmfError
from rankseg.poisson_binomial import (
    PBDistribution,
    pb_leave_one_out,
    pb_mean,
    pb_pmf,
    pb_pmf_dft,
    pb_pmf_dp,
    pgf_integral_check,
    reciprocal_moment,
    reciprocal_moment_bounds,
)

prob_lists = st.lists(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=1, max_size=24
)


def tv(a, b):
    return 0.5 * float(np.abs(a - b).sum())


def test_pmf_two_pixels_frozen():
    # (0.7, 0.4): P(0)=0.18, P(1)=0.54, P(2)=0.28
    want = np.array([0.18, 0.54, 0.28])
    assert np.allclose(pb_pmf_dp([0.7, 0.4]).pmf, want, atol=1e-15)
    assert np.allclose(pb_pmf_dft([0.7, 0.4]).pmf, want, atol=1e-12)
    assert np.allclose(pb_pmf([0.7, 0.4]).pmf, want, atol=1e-15)


def test_pmf_fair_coins_and_degenerate():
    assert np.allclose(pb_pmf_dp([0.5, 0.5]).pmf, [0.25, 0.5, 0.25])
    assert np.allclose(pb_pmf_dp([1.0, 0.3]).pmf, [0.0, 0.7, 0.3])
    empty = pb_pmf(np.array([]))
    assert np.array_equal(empty.pmf, [1.0]) and empty.mean == 0.0


def test_pmf_methods_dispatch():
    p = np.full(600, 0.25)  # above the dp auto threshold
    auto = pb_pmf(p)
    assert tv(auto.pmf, pb_pmf_dp(p).pmf) <= 1e-12
    assert tv(pb_pmf(p, method="dft").pmf, auto.pmf) <= 1e-10
    with pytest.raises(ValueError):
        pb_pmf(p, method="magic")


@given(prob_lists)
@settings(max_examples=60, deadline=None)
def test_pmf_routes_agree(probs):
    p = np.array(probs)
    a, b, c = pb_pmf_dp(p), pb_pmf_dft(p), pb_pmf(p, method="fft")
    assert tv(a.pmf, b.pmf) <= 1e-10
    assert tv(a.pmf, c.pmf) <= 1e-10
    assert a.pmf.size == p.size + 1
    assert abs(a.pmf.sum() - 1.0) <= 1e-9


@given(prob_lists)
@settings(max_examples=60, deadline=None)
def test_mean_matches_pmf_first_moment(probs):
    dist = pb_pmf_dp(np.array(probs))
    first = float(np.arange(dist.pmf.size) @ dist.pmf)
    assert abs(dist.mean - first) <= 1e-9
    assert dist.mean == pytest.approx(math.fsum(probs), abs=1e-12)


def test_pb_mean_sums_accurately():
    assert pb_mean(np.full(10**6, 1e-6)) == pytest.approx(1.0, abs=1e-12)


def test_distribution_validation():
    with pytest.raises(PmfError):
        PBDistribution(pmf=np.array([0.5, -0.1, 0.6]), mean=0.5)
    with pytest.raises(PmfError):
        PBDistribution(pmf=np.array([0.4, 0.4]), mean=0.4)
    with pytest.raises(PmfError):
        PBDistribution(pmf=np.array([0.5, 0.5]), mean=0.9)


def test_leave_one_out_small_frozen():
    dist = pb_pmf_dp([0.7, 0.4])
    assert np.allclose(pb_leave_one_out(dist, 0.7).pmf, [0.6, 0.4], atol=1e-12)
    assert np.allclose(pb_leave_one_out(dist, 0.4).pmf, [0.3, 0.7], atol=1e-12)


@given(prob_lists, st.integers(min_value=0, max_value=23))
@settings(max_examples=60, deadline=None)
def test_leave_one_out_matches_rebuild(probs, idx):
    p = np.array(probs)
    idx = idx % p.size
    dist = pb_pmf_dp(p)
    try:
        got = pb_leave_one_out(dist, float(p[idx]))
    except DeconvolutionError:
        return  # numerically refused; callers rebuild from scratch
    want = pb_pmf_dp(np.delete(p, idx))
    assert tv(got.pmf, want.pmf) <= 1e-8


def test_leave_one_out_rejects_impossible_component():
    dist = PBDistribution(pmf=np.array([0.5, 0.0, 0.5]), mean=1.0)
    with pytest.raises(DeconvolutionError):
        pb_leave_one_out(dist, 0.5)


def test_reciprocal_moment_frozen():
    dist = pb_pmf_dp([0.7, 0.4])
    # E[1/(G+1)] = 0.18 + 0.54/2 + 0.28/3
    assert reciprocal_moment(dist, 1.0) == pytest.approx(0.5433333333, abs=1e-10)
    with pytest.raises(ValueError):
        reciprocal_moment(dist, 0.0)


def test_bounds_frozen():
    lo, hi = reciprocal_moment_bounds(1.1, 2, 1)
    assert lo == pytest.approx(1 / 2.1, abs=1e-12)
    assert hi == pytest.approx(1 / 1.65, abs=1e-12)
    lo, hi = reciprocal_moment_bounds(0.0, 3, 1)
    assert lo == 1.0 and hi == math.inf
    with pytest.raises(ValueError):
        reciprocal_moment_bounds(1.0, 2, 0)
    with pytest.raises(ValueError):
        reciprocal_moment_bounds(3.1, 3, 1)


@given(prob_lists, st.integers(min_value=1, max_value=5))
@settings(max_examples=80, deadline=None)
def test_moment_sandwich(probs, tau):
    p = np.array(probs)
    dist = pb_pmf_dp(p)
    moment = reciprocal_moment(dist, float(tau))
    lo, hi = reciprocal_moment_bounds(dist.mean, p.size, tau)
    assert lo - 1e-12 <= moment <= hi + 1e-12


@given(prob_lists, st.integers(min_value=1, max_value=4))
@settings(max_examples=40, deadline=None)
def test_quadrature_route_agrees_with_pmf_route(probs, a):
    # E[1/(G+a)] = integral of t^(a-1) * E[t^G] over [0, 1]; two independent
    # computations of the same number.
    p = np.array(probs)
    via_integral = pgf_integral_check(p, float(a))
    via_pmf = reciprocal_moment(pb_pmf_dp(p), float(a))
    assert via_integral == pytest.approx(via_pmf, abs=1e-8)


def test_large_instance_methods_agree():
    rng = np.random.default_rng(11)
    p = rng.random(3000)
    assert tv(pb_pmf(p, method="fft").pmf, pb_pmf_dft(p).pmf) <= 1e-9
