"""Array-first bindings for the rankseg decision rules and metric reports.

`predict` and `evaluate` accept plain NumPy arrays and delegate every
computation to the core package, so results are bit-identical to the command
line run on the same data. Ingest follows a strict view contract: C-contiguous
arrays of the right dtype family pass through untouched, anything else gets
exactly one conversion copy. This layer holds no numerical logic of its own;
core errors propagate unchanged as the core's exception types. All heavy work
happens inside vectorized kernels, which release the interpreter lock on
their own; arrays are never written to.
"""

from __future__ import annotations

import numpy as np

import rankseg
from rankseg import (
    RULE_CAP_DEFAULT,
    compute_report,
    predict_binary,
    predict_multiclass,
    wants_multiclass,
)

__version__ = "0.1.0"
__all__ = ["build_info", "evaluate", "predict", "__version__"]

_PROB_CONTRACT = (
    "probability arrays must be real floating point (float32/float64), C-contiguous"
)
_LABEL_CONTRACT = "label arrays must be integer (uint8/uint16), C-contiguous"


def build_info() -> dict:
    """Version metadata for this layer and the core it delegates to."""
    return {
        "name": "rankseg-array",
        "version": __version__,
        "core": rankseg.__version__,
    }


def _prob_view(arr) -> np.ndarray:
    a = np.asarray(arr)
    if not np.issubdtype(a.dtype, np.floating):
        raise TypeError(f"{_PROB_CONTRACT}; got dtype {a.dtype}")
    if not a.flags.c_contiguous:
        a = np.ascontiguousarray(a)
    return a


def _label_view(arr) -> np.ndarray:
    a = np.asarray(arr)
    if not np.issubdtype(a.dtype, np.integer):
        raise TypeError(f"{_LABEL_CONTRACT}; got dtype {a.dtype}")
    if not a.flags.c_contiguous:
        a = np.ascontiguousarray(a)
    return a


def _batch(arrays, what: str) -> list[np.ndarray]:
    # A single ndarray is a batch along its leading axis; its rows are
    # contiguous views, so splitting copies nothing.
    if isinstance(arrays, np.ndarray):
        arrays = list(arrays)
    out = []
    for i, item in enumerate(arrays):
        try:
            out.append(_label_view(item))
        except TypeError as exc:
            raise TypeError(f"{what}[{i}]: {exc}") from exc
    return out


def predict(
    array,
    rule: str,
    score: str | None = None,
    threshold: float = 0.5,
    exact_cap: int = RULE_CAP_DEFAULT,
) -> np.ndarray:
    """Label array for one probability map.

    2-D input reads as a (H, W) binary map unless `rule`/`score` force the
    (C, d) multiclass reading; 3-D input is always (C, H, W). The output
    matches what the command line would save for the same map: class indices
    in the input's spatial shape, uint8 while the class count fits.
    """
    a = _prob_view(array)
    if wants_multiclass(a.ndim, rule, score):
        result = predict_multiclass(a, rule, score)
        labels, dims, num_classes = result.labels, result.dims, result.num_classes
    else:
        mask = predict_binary(a, rule, threshold=threshold, exact_cap=exact_cap)
        lm = mask.to_labelmap()
        labels, dims, num_classes = lm.labels, lm.dims, lm.num_classes
    dtype = np.uint8 if num_classes <= 256 else np.uint16
    return labels.astype(dtype).reshape(dims)


def _round(x):
    # Mirrors the command line's JSON rendering so reports compare equal.
    if isinstance(x, float):
        return round(x, 6)
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    return x


def evaluate(
    preds,
    gts,
    *,
    names=None,
    exclude_background: bool = True,
    quantiles=(),
) -> dict:
    """Metric report mapping for matched label batches.

    `preds` and `gts` are same-length batches (leading axis of one array, or
    any sequence of arrays) of integer label maps. The result carries the
    "per_image", "aggregates", and "quantiles" sections of the command line's
    JSON report, rounded identically.
    """
    pred_list = _batch(preds, "predictions")
    gt_list = _batch(gts, "ground truths")
    if len(pred_list) != len(gt_list):
        raise ValueError(
            f"batch sizes differ: {len(pred_list)} predictions vs {len(gt_list)} ground truths"
        )
    for i, (a, b) in enumerate(zip(pred_list, gt_list)):
        if a.shape != b.shape:
            raise ValueError(f"pair {i}: shapes {a.shape} and {b.shape} differ")
    report = compute_report(
        list(zip(pred_list, gt_list)),
        names=names,
        exclude_background=exclude_background,
        quantiles=tuple(quantiles),
    )
    return _round(report.to_dict())
