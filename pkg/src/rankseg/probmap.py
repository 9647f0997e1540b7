"""Probability-map and label-map containers with NPY file ingestion.

Pixel index j always refers to row-major (C-order) flattening of the spatial
dims, so callers on top of (H, W) arrays and callers on flat (d,) vectors agree
on which pixel is which.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LabelMapError, ProbMapError, ShapeMismatchError, SimplexError

# Values this far outside [0, 1] are treated as rounding noise and clamped;
# anything worse is rejected as corrupt data.
RANGE_SLACK = 1e-9

# Per-pixel class-probability sums must match 1 this tightly when a map is
# declared normalized.
SIMPLEX_TOL = 1e-5

_FLOAT_KINDS = "f"
_INT_KINDS = "iu"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _clamp_unit_interval(arr: np.ndarray, what: str) -> np.ndarray:
    """Clamp values within RANGE_SLACK of [0, 1] and reject anything beyond."""
    bad = ~((arr >= -RANGE_SLACK) & (arr <= 1.0 + RANGE_SLACK))  # catches NaN too
    if bad.any():
        n_nan = int(np.isnan(arr).sum())
        lo = float(np.nanmin(arr)) if n_nan < arr.size else float("nan")
        hi = float(np.nanmax(arr)) if n_nan < arr.size else float("nan")
        raise ProbMapError(
            f"{what}: {int(bad.sum())} value(s) outside [0, 1] beyond slack "
            f"{RANGE_SLACK:g} (min {lo:.9g}, max {hi:.9g}, {n_nan} NaN)"
        )
    return np.clip(arr, 0.0, 1.0)


@dataclass(frozen=True)
class BinaryProbMap:
    """Foreground probabilities for d pixels, flat, with original spatial dims."""

    probs: np.ndarray
    dims: tuple[int, ...]

    @property
    def d(self) -> int:
        return self.probs.size

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BinaryProbMap":
        """Validate, clamp, and flatten a (d,) or (H, W) float array."""
        arr = np.asarray(arr)
        if arr.dtype.kind not in _FLOAT_KINDS:
            raise ProbMapError(f"binary map dtype must be floating point, got {arr.dtype}")
        if arr.ndim not in (1, 2):
            raise ProbMapError(f"binary map must be (d,) or (H, W), got shape {arr.shape}")
        probs = _clamp_unit_interval(arr.astype(np.float64).reshape(-1), "binary map")
        return cls(probs=_freeze(probs), dims=arr.shape)


@dataclass(frozen=True)
class MulticlassProbMap:
    """Per-class probability rows, shape (C, d), with original spatial dims.

    ``normalized`` records whether per-pixel sums were checked against the
    probability simplex on construction.
    """

    probs: np.ndarray
    dims: tuple[int, ...]
    normalized: bool = False

    @property
    def num_classes(self) -> int:
        return self.probs.shape[0]

    @property
    def d(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def from_array(cls, arr: np.ndarray, *, normalized: bool = False) -> "MulticlassProbMap":
        """Validate, clamp, and flatten a (C, d) or (C, H, W) float array."""
        arr = np.asarray(arr)
        if arr.dtype.kind not in _FLOAT_KINDS:
            raise ProbMapError(f"multiclass map dtype must be floating point, got {arr.dtype}")
        if arr.ndim not in (2, 3):
            raise ProbMapError(
                f"multiclass map must be (C, d) or (C, H, W), got shape {arr.shape}"
            )
        if arr.shape[0] < 2:
            raise ProbMapError(f"multiclass map needs at least 2 classes, got {arr.shape[0]}")
        dims = arr.shape[1:]
        probs = arr.astype(np.float64).reshape(arr.shape[0], -1)
        probs = _clamp_unit_interval(probs, "multiclass map")
        if normalized:
            sums = probs.sum(axis=0)
            err = np.abs(sums - 1.0)
            if err.max(initial=0.0) > SIMPLEX_TOL:
                j = int(err.argmax())
                raise SimplexError(
                    f"per-pixel class probabilities must sum to 1 within {SIMPLEX_TOL:g}: "
                    f"pixel {j} sums to {sums[j]:.9g}"
                )
        return cls(probs=_freeze(probs), dims=dims, normalized=normalized)


@dataclass(frozen=True)
class BinaryMask:
    """A 0/1 foreground decision per pixel."""

    bits: np.ndarray
    dims: tuple[int, ...]

    @property
    def d(self) -> int:
        return self.bits.size

    @classmethod
    def from_array(cls, arr: np.ndarray, dims: tuple[int, ...] | None = None) -> "BinaryMask":
        arr = np.asarray(arr)
        flat = arr.reshape(-1)
        if not np.isin(flat, (0, 1)).all():
            raise LabelMapError("binary mask values must be 0 or 1")
        bits = flat.astype(np.uint8)
        return cls(bits=_freeze(bits), dims=dims if dims is not None else arr.shape)

    def to_labelmap(self) -> "LabelMap":
        return LabelMap(
            labels=_freeze(self.bits.astype(np.int64)), dims=self.dims, num_classes=2
        )


@dataclass(frozen=True)
class LabelMap:
    """An integer class label per pixel, values in {0, ..., num_classes - 1}."""

    labels: np.ndarray
    dims: tuple[int, ...]
    num_classes: int

    @property
    def d(self) -> int:
        return self.labels.size

    def __post_init__(self) -> None:
        if self.labels.size and int(self.labels.max()) >= self.num_classes:
            raise LabelMapError(
                f"label {int(self.labels.max())} out of range for {self.num_classes} classes"
            )
        if self.labels.size and int(self.labels.min()) < 0:
            raise LabelMapError("labels must be nonnegative")

    @classmethod
    def from_array(cls, arr: np.ndarray, num_classes: int | None = None) -> "LabelMap":
        arr = np.asarray(arr)
        if arr.dtype.kind not in _INT_KINDS:
            raise LabelMapError(f"label map dtype must be integer, got {arr.dtype}")
        flat = arr.astype(np.int64).reshape(-1)
        if num_classes is None:
            num_classes = int(flat.max(initial=0)) + 1
        return cls(labels=_freeze(flat), dims=arr.shape, num_classes=num_classes)


@dataclass(frozen=True)
class ProbMapDiagnostics:
    """Value-range summary for a probability array; NaN is reported, not raised."""

    min: float
    max: float
    pixel_sum_min: float
    pixel_sum_max: float
    nan_count: int

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def validate(map_or_array) -> ProbMapDiagnostics:
    """Report min/max, per-pixel sum range, and NaN count.

    Accepts a BinaryProbMap, a MulticlassProbMap, or a raw array laid out the
    same way ((d,)/(H, W) binary, or (C, ...) when 2-D+ and ``multichannel``
    construction is intended); raw arrays let callers inspect data before the
    constructors reject it.
    """
    if isinstance(map_or_array, BinaryProbMap):
        arr = map_or_array.probs[None, :]
    elif isinstance(map_or_array, MulticlassProbMap):
        arr = map_or_array.probs
    else:
        raw = np.asarray(map_or_array, dtype=np.float64)
        arr = raw.reshape(raw.shape[0], -1) if raw.ndim >= 2 else raw.reshape(1, -1)
    nan_count = int(np.isnan(arr).sum())
    if nan_count == arr.size:
        nan = float("nan")
        return ProbMapDiagnostics(nan, nan, nan, nan, nan_count)
    with np.errstate(invalid="ignore"):
        sums = np.nansum(arr, axis=0)
    return ProbMapDiagnostics(
        min=float(np.nanmin(arr)),
        max=float(np.nanmax(arr)),
        pixel_sum_min=float(sums.min()),
        pixel_sum_max=float(sums.max()),
        nan_count=nan_count,
    )


def _load_npy(path: str | Path) -> np.ndarray:
    try:
        arr = np.load(path, allow_pickle=False)
    except (ValueError, OSError, EOFError) as exc:
        raise ProbMapError(f"{path}: not a readable NPY array ({exc})") from exc
    return arr


def load_probmap(
    path: str | Path, expect: str, *, normalized: bool = False
) -> BinaryProbMap | MulticlassProbMap:
    """Load an NPY probability map.

    Parameters
    ----------
    path : file containing a little-endian float32/float64 NPY array.
    expect : "binary" for (d,)/(H, W) input, "multiclass" for (C, d)/(C, H, W).
    normalized : for multiclass maps, also check per-pixel simplex sums.
    """
    arr = _load_npy(path)
    if arr.dtype.kind not in _FLOAT_KINDS:
        raise ProbMapError(f"{path}: probability dtype must be float32/float64, got {arr.dtype}")
    try:
        if expect == "binary":
            return BinaryProbMap.from_array(arr)
        if expect == "multiclass":
            return MulticlassProbMap.from_array(arr, normalized=normalized)
    except ProbMapError as exc:
        raise ProbMapError(f"{path}: {exc}") from exc
    raise ValueError(f"expect must be 'binary' or 'multiclass', got {expect!r}")


def load_labelmap(path: str | Path) -> LabelMap:
    """Load an NPY integer label map (any integer dtype, nonnegative values)."""
    arr = _load_npy(path)
    try:
        return LabelMap.from_array(arr)
    except LabelMapError as exc:
        raise LabelMapError(f"{path}: {exc}") from exc


def save_labelmap(map_: LabelMap | BinaryMask, path: str | Path) -> None:
    """Write labels as NPY with the original spatial shape restored.

    uint8 when the class count fits, uint16 up to 65536 classes, wider is
    refused so readers never need to guess at dtypes.
    """
    if isinstance(map_, BinaryMask):
        map_ = map_.to_labelmap()
    if map_.num_classes <= 256:
        dtype = np.uint8
    elif map_.num_classes <= 65536:
        dtype = np.uint16
    else:
        raise LabelMapError(f"cannot encode {map_.num_classes} classes in 16 bits")
    np.save(path, map_.labels.astype(dtype).reshape(map_.dims))


def require_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: shapes {a.shape} and {b.shape} differ")
