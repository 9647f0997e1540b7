import numpy as np
import pytest

from rankseg.errors import (
    LabelMapError,
    ProbMapError,
    ShapeMismatchError,
    SimplexError,
)
from rankseg.probmap import (
    RANGE_SLACK,
    BinaryMask,
    BinaryProbMap,
    LabelMap,
    MulticlassProbMap,
    load_labelmap,
    load_probmap,
    require_same_shape,
    save_labelmap,
    validate,
)


def test_binary_from_flat_array():
    m = BinaryProbMap.from_array(np.array([0.7, 0.4]))
    assert m.d == 2
    assert m.dims == (2,)
    assert m.probs.dtype == np.float64
    assert not m.probs.flags.writeable


def test_binary_from_image_flattens_row_major():
    arr = np.array([[0.1, 0.2], [0.3, 0.4]])
    m = BinaryProbMap.from_array(arr)
    assert m.dims == (2, 2)
    assert np.array_equal(m.probs, [0.1, 0.2, 0.3, 0.4])


def test_binary_clamps_rounding_noise():
    m = BinaryProbMap.from_array(np.array([-RANGE_SLACK / 2, 1.0 + RANGE_SLACK / 2]))
    assert m.probs[0] == 0.0
    assert m.probs[1] == 1.0


@pytest.mark.parametrize("bad", [-1e-6, 1.0 + 1e-6, np.nan])
def test_binary_rejects_out_of_range(bad):
    with pytest.raises(ProbMapError):
        BinaryProbMap.from_array(np.array([0.5, bad]))


def test_binary_rejects_integer_dtype_and_bad_rank():
    with pytest.raises(ProbMapError):
        BinaryProbMap.from_array(np.array([0, 1]))
    with pytest.raises(ProbMapError):
        BinaryProbMap.from_array(np.zeros((2, 2, 2)))


def test_binary_does_not_freeze_caller_array():
    arr = np.array([0.5, 0.5])
    BinaryProbMap.from_array(arr)
    arr[0] = 0.1  # still writeable
    assert arr[0] == 0.1


def test_multiclass_shapes():
    m = MulticlassProbMap.from_array(np.zeros((3, 4)))
    assert m.num_classes == 3 and m.d == 4 and m.dims == (4,)
    m = MulticlassProbMap.from_array(np.zeros((2, 4, 5)))
    assert m.num_classes == 2 and m.d == 20 and m.dims == (4, 5)


def test_multiclass_needs_two_classes():
    with pytest.raises(ProbMapError):
        MulticlassProbMap.from_array(np.zeros((1, 4)))


def test_multiclass_simplex_check_is_opt_in():
    bad_sums = np.array([[0.9, 0.6], [0.05, 0.55]])
    MulticlassProbMap.from_array(bad_sums)  # fine unnormalized
    with pytest.raises(SimplexError):
        MulticlassProbMap.from_array(bad_sums, normalized=True)
    ok = np.array([[0.25, 0.5], [0.75, 0.5]])
    m = MulticlassProbMap.from_array(ok, normalized=True)
    assert m.normalized


def test_binary_mask_validation_and_labelmap():
    mask = BinaryMask.from_array(np.array([1, 0, 1], dtype=np.uint8))
    lab = mask.to_labelmap()
    assert lab.num_classes == 2
    assert np.array_equal(lab.labels, [1, 0, 1])
    with pytest.raises(LabelMapError):
        BinaryMask.from_array(np.array([0, 2], dtype=np.uint8))


def test_labelmap_infers_classes_and_checks_range():
    lab = LabelMap.from_array(np.array([[0, 2], [1, 1]]))
    assert lab.num_classes == 3
    assert lab.dims == (2, 2)
    with pytest.raises(LabelMapError):
        LabelMap.from_array(np.array([-1, 0]))
    with pytest.raises(LabelMapError):
        LabelMap(labels=np.array([3]), dims=(1,), num_classes=2)


def test_validate_reports_diagnostics():
    diag = validate(np.array([[0.5, np.nan], [2.0, -0.5]]))
    assert diag.nan_count == 1
    assert diag.max == 2.0 and diag.min == -0.5
    d = diag.as_dict()
    assert set(d) == {"min", "max", "pixel_sum_min", "pixel_sum_max", "nan_count"}


def test_validate_multiclass_pixel_sums():
    diag = validate(MulticlassProbMap.from_array(np.array([[0.2, 0.9], [0.2, 0.2]])))
    assert diag.pixel_sum_min == pytest.approx(0.4)
    assert diag.pixel_sum_max == pytest.approx(1.1)


def test_npy_round_trip_binary(tmp_path):
    path = tmp_path / "m.npy"
    np.save(path, np.array([[0.7], [0.4]]))
    m = load_probmap(path, expect="binary")
    assert m.dims == (2, 1)
    assert np.array_equal(m.probs, [0.7, 0.4])


def test_npy_round_trip_labels(tmp_path):
    path = tmp_path / "lab.npy"
    lab = LabelMap.from_array(np.array([[0, 1], [2, 0]]))
    save_labelmap(lab, path)
    again = load_labelmap(path)
    assert np.array_equal(again.labels, lab.labels)
    assert again.dims == (2, 2)
    assert np.load(path).dtype == np.uint8


def test_save_uses_wider_dtype_above_256_classes(tmp_path):
    path = tmp_path / "wide.npy"
    lab = LabelMap(labels=np.array([0, 300]), dims=(2,), num_classes=301)
    save_labelmap(lab, path)
    assert np.load(path).dtype == np.uint16


def test_save_binary_mask_directly(tmp_path):
    path = tmp_path / "mask.npy"
    save_labelmap(BinaryMask.from_array(np.array([1, 0], dtype=np.uint8)), path)
    assert np.load(path).dtype == np.uint8


def test_load_rejects_non_npy(tmp_path):
    path = tmp_path / "junk.npy"
    path.write_text("not an array")
    with pytest.raises(ProbMapError, match="junk.npy"):
        load_probmap(path, expect="binary")


def test_load_error_names_file(tmp_path):
    path = tmp_path / "bad.npy"
    np.save(path, np.array([0.5, 7.0]))
    with pytest.raises(ProbMapError, match="bad.npy"):
        load_probmap(path, expect="binary")


def test_load_probmap_expect_multiclass(tmp_path):
    path = tmp_path / "mc.npy"
    np.save(path, np.array([[0.9, 0.6, 0.1], [0.1, 0.55, 0.8]]))
    m = load_probmap(path, expect="multiclass")
    assert isinstance(m, MulticlassProbMap)
    with pytest.raises(ValueError):
        load_probmap(path, expect="labels")


def test_require_same_shape():
    require_same_shape(np.zeros((2, 2)), np.zeros((2, 2)), "pair")
    with pytest.raises(ShapeMismatchError):
        require_same_shape(np.zeros(3), np.zeros(4), "pair")
