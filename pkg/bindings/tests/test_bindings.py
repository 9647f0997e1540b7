import json

import numpy as np
import pytest

ra = pytest.importorskip("rankseg_array")

from rankseg.cli import main  # noqa: E402


def cli_predict(tmp_path, arr, *flags):
    tmp_path.mkdir(parents=True, exist_ok=True)
    src = tmp_path / "in.npy"
    out = tmp_path / "out"
    np.save(src, arr)
    assert main(["predict", str(src), *flags, "--out", str(out)]) == 0
    return np.load(out / "in.npy")


def test_worked_example_binary():
    assert np.array_equal(ra.predict(np.array([0.7, 0.4]), rule="rankdice-rma"), [1, 1])


def test_worked_example_multiclass():
    P = np.array([[0.9, 0.6, 0.1], [0.1, 0.55, 0.8]])
    got = ra.predict(P, rule="rankdice-rma", score="rma-dice")
    assert np.array_equal(got, [0, 0, 1])


def test_predict_matches_cli_50_binary(tmp_path):
    rng = np.random.default_rng(11)
    for i in range(50):
        d = int(rng.integers(1, 200))
        p = rng.random(d)
        rule = ("rankdice-rma", "rankiou-rma", "threshold", "rankdice-ba")[i % 4]
        mine = ra.predict(p, rule=rule)
        ref = cli_predict(tmp_path / str(i), p, "--rule", rule)
        assert mine.dtype == ref.dtype
        assert mine.tobytes() == ref.tobytes()


def test_predict_matches_cli_50_multiclass(tmp_path):
    rng = np.random.default_rng(12)
    for i in range(50):
        c = int(rng.integers(2, 6))
        h, w = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        P = rng.random((c, h, w))
        rule = ("rankdice-rma", "rankiou-rma", "argmax")[i % 3]
        flags = ["--rule", rule]
        kwargs = {}
        if rule != "argmax" and i % 2:
            flags += ["--score", "prob"]
            kwargs["score"] = "prob"
        mine = ra.predict(P, rule=rule, **kwargs)
        ref = cli_predict(tmp_path / str(i), P, *flags)
        assert mine.shape == ref.shape == (h, w)
        assert mine.dtype == ref.dtype
        assert mine.tobytes() == ref.tobytes()


def test_evaluate_matches_cli(tmp_path, capsys):
    rng = np.random.default_rng(13)
    pred_dir, gt_dir = tmp_path / "pred", tmp_path / "gt"
    pred_dir.mkdir()
    gt_dir.mkdir()
    preds, gts, names = [], [], []
    for i in range(8):
        pred = rng.integers(0, 4, (5, 7)).astype(np.uint8)
        gt = rng.integers(0, 4, (5, 7)).astype(np.uint8)
        name = f"img{i}.npy"
        np.save(pred_dir / name, pred)
        np.save(gt_dir / name, gt)
        preds.append(pred)
        gts.append(gt)
        names.append(name)
    assert main(["evaluate", str(pred_dir), str(gt_dir), "--quantiles", "0.25,1.0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    doc.pop("config")
    doc.pop("timings")
    mine = ra.evaluate(preds, gts, names=names, quantiles=(0.25, 1.0))
    assert json.dumps(mine, sort_keys=True) == json.dumps(doc, sort_keys=True)


def test_evaluate_stacked_batch_axis():
    preds = np.stack([np.array([[1, 1], [0, 2]], dtype=np.uint8)] * 3)
    report = ra.evaluate(preds, preds.copy())
    assert report["aggregates"]["mdice_image"] == 1.0
    assert report["aggregates"]["iou_dataset"] == 1.0


def test_evaluate_single_image_counts():
    pred = [np.array([1, 1, 0], dtype=np.uint8)]
    gt = [np.array([1, 0, 0], dtype=np.uint8)]
    report = ra.evaluate(pred, gt)
    assert report["aggregates"]["mdice_image"] == 0.666667
    assert report["aggregates"]["miou_image"] == 0.5


def test_evaluate_quantile_example():
    # Four one-pixel images with per-image dice 1,1,0,0 exercise the plumbing;
    # the frozen (0.1,0.2,0.3,0.4) case lives in the core metric tests.
    preds = [np.array([c], dtype=np.uint8) for c in (1, 1, 1, 1)]
    gts = [np.array([c], dtype=np.uint8) for c in (1, 1, 2, 2)]
    report = ra.evaluate(preds, gts, quantiles=(0.5, 1.0))
    assert report["quantiles"]["0.5"]["dice"] == 0.0
    assert report["quantiles"]["1.0"]["dice"] == 0.5


def test_non_contiguous_input_converted():
    base = np.random.default_rng(14).random(40)
    strided = base[::2]
    assert not strided.flags.c_contiguous
    direct = ra.predict(strided.copy(), rule="rankdice-rma")
    assert np.array_equal(ra.predict(strided, rule="rankdice-rma"), direct)


def test_float32_accepted_without_error():
    p = np.array([0.7, 0.4], dtype=np.float32)
    assert np.array_equal(ra.predict(p, rule="rankdice-rma"), [1, 1])


def test_bad_prob_dtype_names_contract():
    with pytest.raises(TypeError, match="float32/float64"):
        ra.predict(np.array([1, 0]), rule="rankdice-rma")


def test_bad_label_dtype_names_contract():
    good = [np.array([1], dtype=np.uint8)]
    with pytest.raises(TypeError, match=r"ground truths\[0\].*uint8/uint16"):
        ra.evaluate(good, [np.array([0.5])])


def test_batch_size_mismatch():
    a = [np.array([1], dtype=np.uint8)]
    with pytest.raises(ValueError, match="batch sizes differ"):
        ra.evaluate(a, a * 2)


def test_pair_shape_mismatch():
    a = [np.zeros((2, 3), dtype=np.uint8)]
    b = [np.zeros((3, 2), dtype=np.uint8)]
    with pytest.raises(ValueError, match="pair 0"):
        ra.evaluate(a, b)


def test_core_errors_pass_through():
    from rankseg import ProbMapError

    with pytest.raises(ProbMapError):
        ra.predict(np.array([0.5, 7.0]), rule="rankdice-rma")


def test_arrays_never_written():
    p = np.array([0.7, 0.4])
    p.flags.writeable = False
    assert np.array_equal(ra.predict(p, rule="rankdice-rma"), [1, 1])


def test_build_info():
    info = ra.build_info()
    assert info["name"] == "rankseg-array"
    assert info["version"] == ra.__version__
    assert info["core"]
