import json
import math

import numpy as np
import pytest

import hybridnav as hn


def test_min_pool_matches_numpy():
    rng = np.random.default_rng(0)
    d = rng.uniform(0, 100, size=(144, 256))
    pooled = hn.min_pool(d)
    assert pooled.shape == (9, 16)
    want = d.reshape(9, 16, 16, 16).min(axis=(1, 3))
    assert np.array_equal(pooled, want)


def test_huber_closed_forms():
    assert hn.huber(0.5) == pytest.approx(0.125, abs=1e-12)
    assert hn.huber(2.0) == pytest.approx(1.5, abs=1e-12)


def test_noise_is_seeded_and_calibrated():
    z = np.zeros((100, 1000))
    a = hn.apply_depth_noise(z, seed=3)
    assert np.array_equal(a, hn.apply_depth_noise(z, seed=3))
    assert abs(np.abs(a).mean() - 0.147) < 0.05 * 0.147


def test_normalize_rejects_out_of_range():
    assert np.array_equal(hn.normalize_depth(np.array([[0.0, 50.0, 100.0]])), [[-1.0, 0.0, 1.0]])
    with pytest.raises(hn.DataError):
        hn.normalize_depth(np.array([[120.0]]))


def test_config_round_trip_and_strictness():
    cfg = json.loads(hn.default_config())
    assert cfg["arbiter"]["threshold"] == 0.5
    assert hn.config_hash(json.dumps(cfg)) == hn.config_hash("")
    with pytest.raises(hn.ConfigError):
        hn.normalize_config('{"arbiter": {"treshold": 1}}')


def test_world_straight_run_completes_at_336():
    cfg = json.dumps({"course": {"obstacle_count": 0}})
    w = hn.World(0, cfg)
    while w.running:
        w.step("forward")
    assert w.outcome == "completed"
    assert w.steps == 336


def test_world_depth_and_course():
    boxes = hn.generate_course(5)
    assert len(boxes) == 6
    w = hn.World(5)
    d = w.depth()
    assert d.shape == (9, 16)
    assert (d > 0).all() and (d <= 100).all()
    full = hn.render_depth(0.0, 0.0, 0.0, 5)
    assert full.shape == (144, 256)
    rgb = hn.render_rgb(0.0, 0.0, 0.0, 5)
    assert rgb.shape == (144, 256, 3)


def test_astar_empty_and_blocked():
    r = hn.astar_plan((0.0, 0.0, 0.0), [])
    assert r["cost"] == 5.0
    assert r["waypoints"][-1] == (5.0, 0.0)
    assert hn.astar_plan((0.0, 0.0, 0.0), [(3.0, -15.0, 30.0)]) is None
    around = hn.astar_plan((0.0, 0.0, 0.0), [(4.0, -1.0, 2.0)])
    assert around["cost"] > 5.0


def test_missing_checkpoint_is_reported(tmp_path, monkeypatch):
    monkeypatch.setenv("HNAV_OUTPUT_DIR", str(tmp_path))
    with pytest.raises(hn.ArtifactError, match="policy"):
        hn.run_episode("rl-only", 1)
    with pytest.raises(hn.ConfigError):
        hn.evaluate("greedy", 1, 0)
