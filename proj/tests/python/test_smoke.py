import json
import math

import numpy as np
import pytest

import forecastad as fad


def test_simulate_day_is_deterministic():
    cfg = fad.SimConfig()
    cfg.height = 8
    cfg.width = 8
    cfg.seed = 7
    a = fad.simulate_day(cfg, 0)
    b = fad.simulate_day(cfg, 0)
    assert len(a) == len(b) > 0
    assert a.day_id == b.day_id
    for sa, sb in zip(a.samples, b.samples):
        assert sa.t == sb.t
        np.testing.assert_array_equal(sa.frame, sb.frame)


def test_thermal_frame_numpy_round_trip():
    pixels = np.arange(12, dtype=np.float32).reshape(3, 4)
    frame = fad.ThermalFrame(pixels)
    assert frame.height == 3 and frame.width == 4
    np.testing.assert_array_equal(frame.to_numpy(), pixels)
    assert frame.mean() == pytest.approx(pixels.mean())


def test_label_days_returns_report():
    cfg = fad.SimConfig()
    cfg.height = 8
    cfg.width = 8
    cfg.seed = 3
    days = [fad.simulate_day(cfg, d) for d in range(4)]
    lcfg = fad.LabelConfig()
    lcfg.min_day_samples = 5
    labelled, report = fad.label_days(days, lcfg)
    assert len(labelled) == 4
    assert report["final_anomalies"] >= 0
    assert all(s.segment != fad.Segment.UNASSIGNED for s in labelled[0].samples)


def test_encode_time_bounds_and_dim():
    enc = fad.encode_time(123.4)
    assert len(enc) == 16
    assert all(-1.0 <= v <= 1.0 for v in enc)


def test_auroc_and_aupr_hand_example():
    scores = [0.1, 0.4, 0.35, 0.8]
    labels = [0, 0, 1, 1]
    assert fad.auroc(scores, labels) == pytest.approx(0.75)
    assert fad.aupr(scores, labels) > 0.5
    with pytest.raises(fad.UndefinedMetricError):
        fad.auroc([1.0, 2.0], [1, 1])


def test_threshold_selection_and_metrics():
    scores = [1.0, 2.0, 3.0, 4.0]
    labels = [0, 0, 1, 1]
    choice = fad.select_thresholds(scores, labels)
    assert choice["lambda_f"] == pytest.approx(2.5)
    assert choice["best_f1"] == pytest.approx(1.0)
    metrics = fad.metrics_at(scores, labels, choice["lambda_g"])
    assert metrics["accuracy"] == pytest.approx(1.0)


def test_config_round_trip_and_hash(tmp_path):
    cfg = fad.default_config("desk")
    cfg.out_dir = str(tmp_path / "run")
    cfg.override("train.lr", "0.002")
    path = tmp_path / "config.json"
    fad.save_config(path, cfg)
    loaded = fad.load_config(path)
    assert loaded.hash() == cfg.hash()
    assert len(cfg.hash()) == 16


def test_mini_pipeline_end_to_end(tmp_path):
    cfg = fad.default_config("desk")
    cfg.out_dir = str(tmp_path / "run")
    cfg.n_days = 8
    cfg.n_seeds = 1
    cfg.override("model.input_hw", "16")
    cfg.override("sim.height", "32")
    cfg.override("sim.width", "32")
    cfg.override("train.pretrain_epochs", "1")
    cfg.override("train.train_epochs", "1")
    fad.run_simulate(cfg)
    fad.run_label(cfg)
    fad.run_split(cfg)
    fad.run_pretrain(cfg, 0)
    fad.run_train(cfg, 0)
    fad.run_score(cfg, 0)
    reports = [json.loads(r) for r in fad.run_evaluate(cfg)]
    assert any(r["detector"] == "forecastad" for r in reports)
    assert (tmp_path / "run" / "reports" / "summary.txt").exists()


def test_missing_artifact_error(tmp_path):
    cfg = fad.default_config("desk")
    cfg.out_dir = str(tmp_path / "empty")
    with pytest.raises(fad.MissingArtifactError):
        fad.run_train(cfg, 0)
