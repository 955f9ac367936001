import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fingerfusion.bench import bench, stats
from fingerfusion.data.ftds import load_arrays
from fingerfusion.evaluate import (
    TAUS,
    compare_table,
    evaluate,
    evaluate_predictions,
    fingertip_errors,
    mp_curve,
    summarize,
    write_report,
)
from fingerfusion.netzoo import build
from fingerfusion.netzoo.checkpoint import Checkpoint
from fingerfusion.train import BatchOrder, TrainConfig, TrainingDiverged, train, write_loss_log

from oracles import metrics_scalar


def _arrays(path, n=None):
    arr = load_arrays(path)
    if n is not None:
        arr = {k: (None if v is None else v[:n]) for k, v in arr.items()}
    return arr


# training ---------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(max_iters=0)
    with pytest.raises(ValueError):
        TrainConfig(lr=-1.0)
    assert TrainConfig().batch_size == 196 and TrainConfig().lr == 0.01
    assert TrainConfig().momentum == 0.9 and TrainConfig().max_iters == 400000


def test_lr_schedule_defaults_off():
    cfg = TrainConfig()
    assert cfg.lr_at(1) == cfg.lr_at(10**6) == 0.01
    step = TrainConfig(lr_step=10, lr_gamma=0.5)
    assert step.lr_at(10) == 0.01 and step.lr_at(11) == 0.005


def test_batch_order_covers_epochs():
    order = BatchOrder(10, 4, seed=0)
    seen = np.concatenate([order.next() for _ in range(5)])
    assert sorted(seen[:10]) == list(range(10)) and sorted(seen[10:20]) == list(range(10))


def test_lr_zero_leaves_parameters(tiny_dataset):
    cfg = TrainConfig(arch_id="single-shallow", batch_size=2, lr=0.0, max_iters=3, seed=4)
    ck = train(cfg, _arrays(tiny_dataset, 4))
    fresh = Checkpoint.from_network(build("single-shallow", seed=4))
    for k, v in fresh.tensors.items():
        assert np.array_equal(ck.tensors[k], v)


def test_training_is_deterministic(tiny_dataset):
    cfg = TrainConfig(arch_id="single-shallow", batch_size=2, max_iters=4, seed=1, data=str(tiny_dataset))
    a = train(cfg)
    b = train(cfg)
    assert a.to_bytes() == b.to_bytes()
    c = train(TrainConfig(arch_id="single-shallow", batch_size=2, max_iters=4, seed=2, data=str(tiny_dataset)))
    assert c.to_bytes() != a.to_bytes()


def test_loss_decreases_and_logs(tiny_dataset, tmp_path):
    rows = []
    cfg = TrainConfig(arch_id="single-shallow", batch_size=4, lr=0.01, max_iters=30, log_every=10, seed=0)
    ck = train(cfg, _arrays(tiny_dataset, 4), loss_log=rows)
    assert [r[0] for r in rows] == [1, 10, 20, 30]
    assert rows[-1][1] < rows[0][1]
    assert ck.metadata["iterations"] == 30
    path = tmp_path / "loss.csv"
    write_loss_log(path, rows)
    parsed = list(csv.DictReader(path.open()))
    assert [float(r["loss"]) for r in parsed] == [r[1] for r in rows]


def test_divergence_reports_iteration(tiny_dataset):
    cfg = TrainConfig(arch_id="single-shallow", batch_size=2, lr=1e6, max_iters=50)
    with np.errstate(all="ignore"), pytest.raises(TrainingDiverged) as exc:
        train(cfg, _arrays(tiny_dataset, 4))
    assert exc.value.iteration >= 1 and exc.value.lr == 1e6


def test_periodic_checkpoints(tiny_dataset):
    seen = []
    cfg = TrainConfig(arch_id="single-shallow", batch_size=2, max_iters=5, checkpoint_every=2)
    train(cfg, _arrays(tiny_dataset, 4), on_checkpoint=lambda it, ck: seen.append((it, ck.metadata["iterations"])))
    assert seen == [(2, 2), (4, 4)]


def test_edge_arch_needs_edges(tiny_dataset):
    arr = _arrays(tiny_dataset, 2)
    arr["edge"] = None
    with pytest.raises(ValueError, match="edge"):
        train(TrainConfig(arch_id="fusion-slow", batch_size=2, max_iters=1), arr)


# metrics ----------------------------------------------------------------------------


def _gt(n=7, seed=0):
    return np.random.default_rng(seed).uniform(-100, 700, (n, 6, 3))


def test_perfect_predictions():
    gt = _gt()
    r = summarize(fingertip_errors(gt, gt))
    assert r.err_f == 0.0
    assert np.all(r.mp_curve == 1.0) and np.all(r.mp_frame_curve == 1.0)


def test_uniform_5mm_displacement():
    gt = _gt()
    d = np.random.default_rng(1).standard_normal((7, 6, 3))
    d /= np.linalg.norm(d, axis=2, keepdims=True)
    r = summarize(fingertip_errors(gt + 5.0 * d, gt))
    assert abs(r.err_f - 5.0) < 1e-6
    assert np.all(r.mp_curve[TAUS <= 4] == 0)
    assert np.all(r.mp_curve[TAUS >= 6] == 1)
    # mP(5) is 0 or 1 depending on sub-ulp rounding of the distance; the strict < rule puts exact 5 at 0
    assert summarize(np.full((3, 5), 5.0)).mp_at(5.0) == 0.0
    assert summarize(np.full((3, 5), 5.0)).mp_at(5.000001) == 1.0


def test_palm_not_scored():
    gt = _gt()
    pred = gt.copy()
    pred[:, 5] += 1000
    assert summarize(fingertip_errors(pred, gt)).err_f == 0.0


def test_mixed_case_matches_scalar_recomputation():
    r = np.random.default_rng(5)
    gt = _gt(20, 3)
    pred = gt + r.normal(0, 12, gt.shape)
    pred[3, 1] += 500  # one outlier beyond the discard threshold
    for tau in (1.0, 7.5, 10.0, 30.0):
        err_f, mp, mp_frame, dropped = metrics_scalar(pred, gt, tau, discard=300.0)
        rep = summarize(fingertip_errors(pred, gt), discard_over_mm=300.0, mp_tau=tau)
        assert rep.err_f == pytest.approx(err_f, rel=1e-12)
        assert rep.mp == pytest.approx(mp) and rep.mp_at(per_frame=True) == pytest.approx(mp_frame)
        assert rep.discarded == dropped == 1


def test_discard_excludes_only_injected_outliers(tiny_dataset):
    arr = _arrays(tiny_dataset)
    n = len(arr["depth"])
    pred = arr["target"].copy().reshape(n, 6, 3)
    pred += 0.01  # a few mm everywhere
    bad = [(1, 0), (4, 3), (6, 2)]
    for f, j in bad:
        pred[f, j] += 5.0  # 5 * cube/2 = 750 mm off
    rep = evaluate_predictions(pred.reshape(n, -1), arr, discard_over_mm=300.0)
    assert rep.discarded == len(bad)
    errs = rep.errors
    assert sorted(zip(*np.nonzero(errs > 300.0))) == sorted(bad)
    keep = errs[errs <= 300.0]
    assert rep.err_f == pytest.approx(keep.mean())
    assert rep.mp_at(50.0) == pytest.approx((errs < 50.0).mean())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 200, allow_nan=False), min_size=1, max_size=60))
def test_mp_curve_monotone_and_bounded(errs):
    c = mp_curve(np.array(errs))
    assert np.all(np.diff(c) >= 0) and c.min() >= 0 and c.max() <= 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**16))
def test_err_f_order_invariant(seed):
    r = np.random.default_rng(seed)
    e = r.uniform(0, 50, (9, 5))
    perm = r.permutation(9)
    assert summarize(e).err_f == pytest.approx(summarize(e[perm]).err_f, rel=1e-14)


def test_evaluate_rejects_missing_edges(tiny_dataset):
    arr = _arrays(tiny_dataset, 2)
    arr["edge"] = None
    with pytest.raises(ValueError, match="edge"):
        evaluate(build("fusion-late"), arr)


def test_result_fusion_evaluates_as_averaged_subnetworks(tiny_dataset):
    arr = _arrays(tiny_dataset, 3)
    net = build("fusion-result", seed=2)
    a, b = net.subnetworks
    avg = (a.predict(arr["depth"], None) + b.predict(None, arr["edge"])) / 2
    r1 = evaluate(net, arr)
    r2 = evaluate_predictions(avg, arr)
    assert np.array_equal(r1.errors, r2.errors)


def test_write_report(tmp_path):
    rep = summarize(np.arange(15.0).reshape(3, 5), method="m")
    paths = write_report(rep, tmp_path / "r")
    rows = dict(csv.reader(open(paths[0])))
    assert float(rows["err_f_mm"]) == rep.err_f
    errs = list(csv.DictReader(open(paths[1])))
    assert float(errs[2]["pinky"]) == 14.0
    table = np.loadtxt(paths[2])
    assert table.shape == (50, 3) and np.array_equal(table[:, 1], rep.mp_curve)


# comparison table ----------------------------------------------------------------------


def test_compare_table():
    reps = [summarize(np.full((2, 5), v), method=f"m{v}") for v in (9.0, 3.0, 6.0)]
    reps[0].timing = {"mean_ms": 12.5}
    text, csv_text = compare_table(reps[:1])
    assert len(text.strip().splitlines()) == 3  # header, rule, one row
    _, csv_text = compare_table(reps, sort_by_err=True)
    rows = list(csv.reader(io.StringIO(csv_text)))
    assert rows[0] == ["method", "mP@10mm", "err_f/mm", "time/ms"]
    assert [r[0] for r in rows[1:]] == ["m3.0", "m6.0", "m9.0"]
    for row, rep in zip(rows[1:], sorted(reps, key=lambda r: r.err_f)):
        assert float(row[1]) == rep.mp and float(row[2]) == rep.err_f
    assert float(rows[3][3]) == 12.5 and rows[1][3] == ""


# bench ---------------------------------------------------------------------------------


def test_bench_stats():
    s = bench(build("single-shallow"), n=10)["single"]
    assert s["mean_ms"] > 0 and s["p95_ms"] >= s["mean_ms"] and s["n"] == 10
    assert s["max_ms"] <= 5 * s["min_ms"]


def test_bench_requires_ten_runs():
    with pytest.raises(ValueError):
        bench(build("single-shallow"), n=5)


def test_stats_order():
    s = stats(np.array([1.0, 2.0, 3.0, 4.0, 100.0, 1, 1, 1, 1, 1]))
    assert s["min_ms"] == 1.0 and s["max_ms"] == 100.0 and s["p95_ms"] >= s["mean_ms"]
