"""Command-line entry points: predict, evaluate, bench, oracle-check.

Class indices in all inputs and outputs are 0-based. Reports are JSON with
top-level keys {"config", "per_image", "aggregates", "quantiles", "timings"};
floats are rounded to 6 decimal places so reruns diff cleanly (timings are
exempt from the determinism contract).
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import oracle
from .binary_rules import RULE_CAP_DEFAULT, expected_dice, rankdice_exact, rankiou_exact
from .dispatch import (
    ALL_RULES,
    MULTICLASS_RULES,
    predict_binary,
    predict_multiclass,
    wants_multiclass,
)
from .errors import ProbMapError, RankSegError
from .metrics import compute_report
from .multiclass import SCORE_KINDS
from .poisson_binomial import pb_pmf_dp, reciprocal_moment, reciprocal_moment_bounds
from .probmap import (
    BinaryProbMap,
    MulticlassProbMap,
    _load_npy,
    load_labelmap,
    save_labelmap,
)

_THREADS_ENV = "RANKSEG_THREADS"


@dataclass(frozen=True)
class RunConfig:
    """Validated knob set shared by the subcommands."""

    rule: str | None = None
    score: str | None = None
    threshold: float = 0.5
    exclude_background: bool = True
    exact_cap: int = RULE_CAP_DEFAULT
    quantiles: tuple[float, ...] = field(default_factory=tuple)
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.rule is not None and self.rule not in ALL_RULES:
            raise ValueError(f"rule must be one of {ALL_RULES}, got {self.rule!r}")
        if self.score is not None:
            if self.score not in SCORE_KINDS:
                raise ValueError(f"score must be one of {SCORE_KINDS}, got {self.score!r}")
            if self.rule not in ("rankdice-rma", "rankiou-rma"):
                raise ValueError(
                    "a score only applies to the multiclass rank rules "
                    "(rankdice-rma, rankiou-rma)"
                )
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.exact_cap < 1:
            raise ValueError(f"exact-cap must be positive, got {self.exact_cap}")
        for q in self.quantiles:
            if not 0.0 < q <= 1.0:
                raise ValueError(f"quantile fractions must be in (0, 1], got {q}")
        if self.threads < 1:
            raise ValueError(f"threads must be at least 1, got {self.threads}")


def _round_floats(x):
    if isinstance(x, float):
        return round(x, 6)
    if isinstance(x, dict):
        return {k: _round_floats(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round_floats(v) for v in x]
    return x


def _emit_json(doc: dict, out: str | None) -> None:
    text = json.dumps(_round_floats(doc), indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fail(msg: str) -> int:
    print(f"rankseg: error: {msg}", file=sys.stderr)
    return 1


def _default_threads() -> int:
    env = os.environ.get(_THREADS_ENV, "")
    try:
        return max(int(env), 1)
    except ValueError:
        return 1


def _parse_quantiles(text: str) -> tuple[float, ...]:
    if not text.strip():
        return ()
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _expand_inputs(patterns) -> list[str]:
    files: list[str] = []
    for pat in patterns:
        hits = sorted(glob.glob(pat))
        files.extend(hits if hits else [pat])
    return files


def _predict_one(path: str, cfg: RunConfig, out_dir: Path) -> dict:
    t0 = time.perf_counter()
    raw = _load_npy(path)
    multi = wants_multiclass(raw.ndim, cfg.rule, cfg.score)
    try:
        if multi:
            pm = MulticlassProbMap.from_array(raw)
            result = predict_multiclass(pm, cfg.rule, cfg.score)
            pixels = result.labels.size
        else:
            bm = BinaryProbMap.from_array(raw)
            result = predict_binary(bm, cfg.rule, threshold=cfg.threshold, exact_cap=cfg.exact_cap)
            pixels = result.bits.size
    except (RankSegError, ValueError) as exc:
        raise ProbMapError(f"{path}: {exc}") from exc
    dest = out_dir / Path(path).name
    if dest.resolve() == Path(path).resolve():
        raise RankSegError(f"output would overwrite the input file {path}")
    save_labelmap(result, dest)
    return {
        "input": path,
        "output": str(dest),
        "pixels": int(pixels),
        "multiclass": bool(multi),
        "seconds": time.perf_counter() - t0,
    }


def cmd_predict(args) -> int:
    try:
        cfg = RunConfig(
            rule=args.rule,
            score=args.score,
            threshold=args.threshold,
            exact_cap=args.exact_cap,
            threads=args.threads,
        )
    except ValueError as e:
        return _fail(str(e))
    files = _expand_inputs(args.inputs)
    if not files:
        return _fail("no input files given")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    try:
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                futures = [pool.submit(_predict_one, f, cfg, out_dir) for f in files]
                entries = [fut.result() for fut in futures]  # input order, deterministic
        else:
            entries = [_predict_one(f, cfg, out_dir) for f in files]
    except (RankSegError, ValueError, OSError) as e:
        return _fail(str(e))
    manifest_path = out_dir / "manifest.json"
    manifest = {"config": _config_dict(cfg, command="predict"), "files": []}
    if manifest_path.exists():
        try:
            old = json.loads(manifest_path.read_text())
            if isinstance(old, dict) and isinstance(old.get("files"), list):
                manifest["files"] = old["files"]
        except json.JSONDecodeError:
            pass
    manifest["files"].extend(entries)
    manifest_path.write_text(json.dumps(_round_floats(manifest), indent=2) + "\n")
    return 0


def _config_dict(cfg: RunConfig, **extra) -> dict:
    doc = dict(extra)
    doc.update(asdict(cfg))
    doc["quantiles"] = list(cfg.quantiles)
    return doc


def cmd_evaluate(args) -> int:
    try:
        cfg = RunConfig(
            exclude_background=args.exclude_background,
            quantiles=_parse_quantiles(args.quantiles),
            threads=args.threads,
        )
    except ValueError as e:
        return _fail(str(e))
    t_total = time.perf_counter()
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            return _fail(f"not a directory: {d}")
    pred_names = {p.name for p in pred_dir.glob("*.npy")}
    gt_names = {p.name for p in gt_dir.glob("*.npy")}
    if pred_names != gt_names:
        missing_gt = sorted(pred_names - gt_names)
        missing_pred = sorted(gt_names - pred_names)
        parts = []
        if missing_gt:
            parts.append(f"no ground truth for: {', '.join(missing_gt)}")
        if missing_pred:
            parts.append(f"no prediction for: {', '.join(missing_pred)}")
        return _fail("; ".join(parts) or "no .npy files found")
    names = sorted(pred_names)
    if not names:
        return _fail("no .npy files found")
    pairs, timings = [], []
    try:
        for name in names:
            t0 = time.perf_counter()
            pred = load_labelmap(pred_dir / name)
            gt = load_labelmap(gt_dir / name)
            pairs.append((pred, gt))
            timings.append({"name": name, "seconds": time.perf_counter() - t0})
        report = compute_report(
            pairs,
            names=names,
            exclude_background=cfg.exclude_background,
            quantiles=cfg.quantiles,
        )
    except (RankSegError, ValueError, OSError) as e:
        return _fail(str(e))
    doc = {
        "config": _config_dict(
            cfg, command="evaluate", pred_dir=str(pred_dir), gt_dir=str(gt_dir)
        ),
        **report.to_dict(),
        "timings": {"total_seconds": time.perf_counter() - t_total, "per_image": timings},
    }
    _emit_json(doc, args.out)
    return 0


def cmd_bench(args) -> int:
    try:
        sizes = [int(tok) for tok in args.sizes.split(",") if tok.strip()]
        rules = [tok.strip() for tok in args.rules.split(",") if tok.strip()]
    except ValueError as e:
        return _fail(str(e))
    for rule in rules:
        if rule not in ALL_RULES or rule == "argmax":
            return _fail(f"bench rules must be binary rules, got {rule!r}")
        if rule.endswith("-exact") and sizes and max(sizes) > args.exact_cap:
            return _fail(
                f"rule {rule} is capped at {args.exact_cap} pixels; largest size is {max(sizes)}"
            )
    if args.mode not in bench_mod.MODES:
        return _fail(f"mode must be one of {bench_mod.MODES}")
    result = bench_mod.run_bench(
        sizes,
        trials=args.trials,
        rules=rules,
        mode=args.mode,
        seed=args.seed,
        exact_cap=args.exact_cap,
    )
    print(bench_mod.format_table(result))
    if args.out:
        _emit_json(result, args.out)
    else:
        _emit_json(result, None)
    return 0


def _oracle_violation(phase: str, payload: dict) -> int:
    print(f"rankseg oracle-check: VIOLATION in {phase}", file=sys.stderr)
    print(json.dumps(_round_floats(payload)), file=sys.stderr)
    return 2


def cmd_oracle_check(args) -> int:
    if args.d_min < 1 or args.d_max < args.d_min:
        return _fail(f"bad d range [{args.d_min}, {args.d_max}]")
    if args.d_max > oracle.SEARCH_CAP:
        return _fail(
            f"d range up to {args.d_max} exceeds the exhaustive search cap "
            f"({oracle.SEARCH_CAP}); refusing"
        )
    if args.instances < 1:
        return _fail("need at least one instance")
    rng = np.random.default_rng(args.seed)

    # Ranking property on random instances, both metrics.
    for i in range(args.instances):
        d = int(rng.integers(args.d_min, args.d_max + 1))
        p = rng.random(d)
        for metric in ("dice", "iou"):
            ok = oracle.verify_ranking_property(p, metric)
            if args.inject_fault and i == 0:
                ok = False  # harness self-test: pretend the check failed
            if not ok:
                return _oracle_violation(
                    "ranking-property", {"p": p.tolist(), "metric": metric}
                )
    print(f"ranking property: {args.instances} instances x 2 metrics ok")

    # Exact-rule agreement against the exhaustive search. Drawn so the
    # optimum is provably nonempty (some p above 0.5): the selection rules
    # never output the empty mask on such instances, and below that regime
    # the empty mask can win outright, which the rules do not model.
    n_agree = min(args.instances, 200)
    for i in range(n_agree):
        d = int(rng.integers(max(args.d_min, 2), min(args.d_max, 12) + 1))
        p = rng.random(d)
        if p.max() <= 0.5:
            p[int(rng.integers(d))] = 0.5 + 0.5 * rng.random()
        for metric, rule in (("dice", rankdice_exact), ("iou", rankiou_exact)):
            best_mask, best_val = oracle.bayes_optimal_mask(p, metric)
            mask, curve = rule(p)
            got_val = curve.values[curve.tau_star]
            if not np.array_equal(best_mask.bits, mask.bits) or abs(best_val - got_val) > 1e-9:
                return _oracle_violation(
                    "exact-rule-agreement",
                    {
                        "p": p.tolist(),
                        "metric": metric,
                        "search_mask": best_mask.bits.tolist(),
                        "rule_mask": mask.bits.tolist(),
                        "search_value": best_val,
                        "rule_value": float(got_val),
                    },
                )
    print(f"exact-rule agreement: {n_agree} instances x 2 metrics ok")

    # Reciprocal-moment sandwich bounds on random PB distributions.
    for i in range(1000):
        m_size = int(rng.integers(1, 65))
        probs = rng.random(m_size)
        dist = pb_pmf_dp(probs)
        for tau in range(1, 6):
            moment = reciprocal_moment(dist, float(tau))
            lower, upper = reciprocal_moment_bounds(dist.mean, m_size, tau)
            if not (lower - 1e-12 <= moment <= upper + 1e-12):
                return _oracle_violation(
                    "moment-sandwich",
                    {"p": probs.tolist(), "tau": tau, "moment": moment,
                     "lower": lower, "upper": upper},
                )
    print("reciprocal-moment sandwich: 1000 distributions x 5 volumes ok")

    # Dice approximation error bound on random top-τ sets.
    for i in range(1000):
        d = int(rng.integers(2, 257))
        p = rng.random(d)
        mu = float(p.sum())
        order = np.argsort(-p, kind="stable")
        tau = int(rng.integers(1, d + 1))
        bits = np.zeros(d, dtype=np.uint8)
        bits[order[:tau]] = 1
        exact = expected_dice(p, bits, cap=max(d, RULE_CAP_DEFAULT))
        q_tau = float(p[order[:tau]].sum())
        rma = 2.0 * q_tau / (tau + mu + 1.0)
        if abs(rma - exact) > 2.0 / (mu + tau) + 1e-12:
            return _oracle_violation(
                "rma-error-bound",
                {"p": p.tolist(), "tau": tau, "exact": exact, "rma": rma},
            )
    print("rma error bound: 1000 instances ok")
    print("oracle-check: all checks passed")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rankseg",
        description=(
            "Segmentation decision rules that rank pixels by probability and "
            "pick the volume with the best expected Dice or IoU. Class indices "
            "are 0-based everywhere."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_pred = sub.add_parser(
        "predict",
        help="turn probability maps (.npy) into mask/label files",
        description=(
            "Read probability maps from .npy files and write predicted masks "
            "(binary) or 0-based label maps (multiclass) with the same "
            "basename into --out. 1-D/2-D inputs are treated as binary (d,) "
            "or (H, W) maps; 3-D inputs as multiclass (C, H, W); a 2-D input "
            "is read as multiclass (C, d) when --score is given or the rule "
            "is argmax."
        ),
    )
    p_pred.add_argument("inputs", nargs="+", help="input .npy files or globs")
    p_pred.add_argument("--rule", required=True, choices=ALL_RULES)
    p_pred.add_argument(
        "--score",
        choices=SCORE_KINDS,
        default=None,
        help="overlap-resolution score for multiclass rank rules "
        f"(default: the score matching the rule's metric); rules: {MULTICLASS_RULES}",
    )
    p_pred.add_argument("--threshold", type=float, default=0.5, help="threshold-rule cutoff")
    p_pred.add_argument(
        "--exact-cap",
        type=int,
        default=RULE_CAP_DEFAULT,
        help="pixel cap for the quadratic exact rules",
    )
    p_pred.add_argument("--out", default=".", help="output directory")
    p_pred.add_argument(
        "--threads",
        type=int,
        default=_default_threads(),
        help=f"worker threads across files (default ${_THREADS_ENV} or 1)",
    )
    p_pred.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser(
        "evaluate",
        help="score predicted label maps against ground truth",
        description=(
            "Pair .npy label files by basename between the two directories and "
            "report Dice/IoU at image, class, and dataset level as JSON. "
            "Class 0 is background and excluded unless --include-background."
        ),
    )
    p_eval.add_argument("pred_dir", help="directory of predicted label .npy files")
    p_eval.add_argument("gt_dir", help="directory of ground-truth label .npy files")
    p_eval.add_argument(
        "--exclude-background",
        dest="exclude_background",
        action="store_true",
        default=True,
        help="exclude class 0 from aggregates (default)",
    )
    p_eval.add_argument(
        "--include-background",
        dest="exclude_background",
        action="store_false",
        help="include class 0 in aggregates",
    )
    p_eval.add_argument(
        "--quantiles",
        default="",
        help="comma-separated worst-case fractions, e.g. 0.05,0.1",
    )
    p_eval.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    p_eval.add_argument("--threads", type=int, default=_default_threads())
    p_eval.set_defaults(func=cmd_evaluate)

    p_bench = sub.add_parser(
        "bench",
        help="time rules on synthetic maps",
        description="Median wall times per rule and size, plus scaling/speedup ratios.",
    )
    p_bench.add_argument("--sizes", default="65536,1048576", help="comma-separated pixel counts")
    p_bench.add_argument("--trials", type=int, default=5)
    p_bench.add_argument("--rules", default="rankdice-rma", help="comma-separated binary rules")
    p_bench.add_argument("--mode", default="uniform", choices=bench_mod.MODES)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--exact-cap", type=int, default=RULE_CAP_DEFAULT)
    p_bench.add_argument("--out", default=None, help="write the JSON result here")
    p_bench.set_defaults(func=cmd_bench)

    p_oc = sub.add_parser(
        "oracle-check",
        help="verify the fast rules against brute-force enumeration",
        description=(
            "Cross-check the ranking property, exact-rule agreement, and the "
            "reciprocal-moment bounds on random instances. Exit 0 when all "
            "checks pass, 2 on any violation."
        ),
    )
    p_oc.add_argument("--seed", type=int, default=0)
    p_oc.add_argument("--instances", type=int, default=500)
    p_oc.add_argument("--d-min", type=int, default=1)
    p_oc.add_argument("--d-max", type=int, default=10)
    p_oc.add_argument(
        "--inject-fault",
        action="store_true",
        help="self-test: report a fabricated violation and exit 2",
    )
    p_oc.set_defaults(func=cmd_oracle_check)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
