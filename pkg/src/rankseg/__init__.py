"""Probability-ranking decision rules for segmentation, with evaluation tools.

The binary rules rank pixels by foreground probability and pick the volume
with the best expected Dice or IoU (exactly, or via two fast approximations).
The multiclass pipeline runs the fast rule per class and resolves contested
pixels by marginal-gain scores. Metrics, a brute-force oracle, a benchmark
harness, and a CLI round out the package.
"""

from .bench import run_bench, synthetic_map, time_rule
from .binary_rules import (
    RULE_CAP_DEFAULT,
    VolumeCurve,
    expected_dice,
    expected_iou,
    rankdice_ba,
    rankdice_exact,
    rankdice_rma,
    rankiou_exact,
    rankiou_rma,
    threshold_rule,
)
from .dispatch import (
    ALL_RULES,
    BINARY_RULES,
    MULTICLASS_RULES,
    predict_binary,
    predict_multiclass,
    wants_multiclass,
)
from .errors import (
    DeconvolutionError,
    ExactCapError,
    LabelMapError,
    PmfError,
    ProbMapError,
    RankSegError,
    ShapeMismatchError,
    SimplexError,
)
from .metrics import (
    ClassScore,
    ConfusionCounts,
    MetricReport,
    class_level_means,
    compute_report,
    confusion,
    dataset_level,
    dice_iou_from_counts,
    image_level_means,
    pair_confusion,
    score_pair,
    worst_quantile,
)
from .multiclass import (
    SCORE_KINDS,
    OverlapPartition,
    OverlapScore,
    argmax_prob,
    overlap_scores,
    per_class_positives,
    rankseg_rma_multiclass,
    resolve_overlaps,
    rma_score_dice,
    rma_score_iou,
    wprob_score,
)
from .oracle import (
    ENUM_CAP,
    SEARCH_CAP,
    bayes_optimal_mask,
    enumerate_expected_metric,
    verify_ranking_property,
)
from .poisson_binomial import (
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
from .probmap import (
    BinaryMask,
    BinaryProbMap,
    LabelMap,
    MulticlassProbMap,
    ProbMapDiagnostics,
    load_labelmap,
    load_probmap,
    save_labelmap,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_RULES",
    "BINARY_RULES",
    "BinaryMask",
    "BinaryProbMap",
    "ClassScore",
    "ConfusionCounts",
    "DeconvolutionError",
    "ENUM_CAP",
    "ExactCapError",
    "LabelMap",
    "LabelMapError",
    "MULTICLASS_RULES",
    "MetricReport",
    "MulticlassProbMap",
    "OverlapPartition",
    "OverlapScore",
    "PBDistribution",
    "PmfError",
    "ProbMapDiagnostics",
    "ProbMapError",
    "RULE_CAP_DEFAULT",
    "RankSegError",
    "SCORE_KINDS",
    "SEARCH_CAP",
    "ShapeMismatchError",
    "SimplexError",
    "VolumeCurve",
    "argmax_prob",
    "bayes_optimal_mask",
    "class_level_means",
    "compute_report",
    "confusion",
    "dataset_level",
    "dice_iou_from_counts",
    "enumerate_expected_metric",
    "expected_dice",
    "expected_iou",
    "image_level_means",
    "load_labelmap",
    "load_probmap",
    "overlap_scores",
    "pair_confusion",
    "pb_leave_one_out",
    "pb_mean",
    "pb_pmf",
    "pb_pmf_dft",
    "pb_pmf_dp",
    "per_class_positives",
    "pgf_integral_check",
    "predict_binary",
    "predict_multiclass",
    "rankdice_ba",
    "rankdice_exact",
    "rankdice_rma",
    "rankiou_exact",
    "rankiou_rma",
    "rankseg_rma_multiclass",
    "reciprocal_moment",
    "reciprocal_moment_bounds",
    "resolve_overlaps",
    "rma_score_dice",
    "rma_score_iou",
    "run_bench",
    "save_labelmap",
    "score_pair",
    "synthetic_map",
    "threshold_rule",
    "time_rule",
    "validate",
    "verify_ranking_property",
    "wants_multiclass",
    "worst_quantile",
    "wprob_score",
]
