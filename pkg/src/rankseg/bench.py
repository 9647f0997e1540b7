"""Timing harness for the decision rules on synthetic probability maps."""

from __future__ import annotations

import time
from statistics import median

import numpy as np
from scipy.ndimage import gaussian_filter

from .binary_rules import RULE_CAP_DEFAULT
from .dispatch import predict_binary

MODES = ("uniform", "blobby")


def synthetic_map(d: int, mode: str = "uniform", seed=0) -> np.ndarray:
    """Deterministic synthetic probability map with d pixels.

    "uniform" draws pixels i.i.d. from U(0, 1); "blobby" softly squashes
    smoothed Gaussian noise so foreground mass clumps spatially, closer to
    what a segmentation network emits.
    """
    rng = np.random.default_rng(seed)
    if mode == "uniform":
        return rng.random(d)
    if mode == "blobby":
        side = int(np.ceil(np.sqrt(d)))
        noise = rng.standard_normal((side, side))
        z = gaussian_filter(noise, sigma=max(side / 16.0, 1.0))
        z = (z - z.mean()) / max(z.std(), 1e-12)
        return (1.0 / (1.0 + np.exp(-(3.0 * z - 1.0)))).reshape(-1)[:d].copy()
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def time_rule(
    rule: str,
    d: int,
    trials: int = 5,
    mode: str = "uniform",
    seed: int = 0,
    threshold: float = 0.5,
    exact_cap: int = RULE_CAP_DEFAULT,
) -> dict:
    """Median wall time of one rule over fresh maps; the map draw is untimed."""
    times = []
    for trial in range(trials):
        probs = synthetic_map(d, mode, seed=[seed, d, trial])
        t0 = time.perf_counter()
        predict_binary(probs, rule, threshold=threshold, exact_cap=exact_cap)
        times.append(time.perf_counter() - t0)
    return {
        "rule": rule,
        "d": d,
        "trials": trials,
        "median_seconds": median(times),
        "times": times,
    }


def run_bench(
    sizes,
    trials: int = 5,
    rules=("rankdice-rma",),
    mode: str = "uniform",
    seed: int = 0,
    threshold: float = 0.5,
    exact_cap: int = RULE_CAP_DEFAULT,
) -> dict:
    """Time every (rule, size) pair; derive scaling and RMA/BA speedup ratios."""
    sizes = [int(s) for s in sizes]
    rules = list(rules)
    rows = [
        time_rule(
            rule, d, trials=trials, mode=mode, seed=seed, threshold=threshold, exact_cap=exact_cap
        )
        for rule in rules
        for d in sizes
    ]
    by_rule = {rule: [r for r in rows if r["rule"] == rule] for rule in rules}
    scaling = {}
    for rule, rs in by_rule.items():
        pairs = {}
        for a, b in zip(rs, rs[1:]):
            if a["median_seconds"] > 0:
                pairs[f"{a['d']}->{b['d']}"] = b["median_seconds"] / a["median_seconds"]
        if pairs:
            scaling[rule] = pairs
    speedup = {}
    if "rankdice-rma" in by_rule and "rankdice-ba" in by_rule:
        for fast, slow in zip(by_rule["rankdice-rma"], by_rule["rankdice-ba"]):
            if fast["median_seconds"] > 0:
                speedup[str(fast["d"])] = slow["median_seconds"] / fast["median_seconds"]
    return {
        "mode": mode,
        "seed": seed,
        "trials": trials,
        "sizes": sizes,
        "rules": rules,
        "rows": rows,
        "scaling_ratios": scaling,
        "rma_over_ba_speedup": speedup,
    }


def format_table(result: dict) -> str:
    """Aligned text rendering of a run_bench result."""
    lines = [f"{'rule':<16} {'d':>10} {'median_s':>12} {'trials':>7}"]
    for r in result["rows"]:
        lines.append(f"{r['rule']:<16} {r['d']:>10} {r['median_seconds']:>12.6f} {r['trials']:>7}")
    for rule, pairs in result.get("scaling_ratios", {}).items():
        for span, ratio in pairs.items():
            lines.append(f"scaling {rule} {span}: {ratio:.2f}x")
    for d, ratio in result.get("rma_over_ba_speedup", {}).items():
        lines.append(f"speedup rankdice-rma vs rankdice-ba at d={d}: {ratio:.2f}x")
    return "\n".join(lines)
