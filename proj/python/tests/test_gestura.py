import itertools
import json

import numpy as np
import pytest

import _gestura as g

TINY = """seed = 3
[dataset]
sample_count = 150
participant_count = 20
frame_size = 8
series_length = 16
electrodes = 4
[model]
dim = 8
heads = 2
vit_blocks = 1
dilations = [1, 2]
denoise_kernel = 3
emg_windows = 2
[denoiser]
pairs = 32
epochs = 1
[federated]
clients = 4
rounds = 2
[rl]
episodes = 500
[evaluation]
episodes_per_user = 2
"""


def test_aggregate_matches_weighted_mean():
    rng = np.random.default_rng(0)
    for _ in range(20):
        k = int(rng.integers(2, 8))
        params = [rng.normal(size=50) for _ in range(k)]
        counts = [int(c) for c in rng.integers(1, 100, size=k)]
        expected = sum(c * p for c, p in zip(counts, params)) / sum(counts)
        np.testing.assert_allclose(g.aggregate([p.tolist() for p in params], counts), expected, rtol=0, atol=1e-12)
    assert g.aggregate([[0.0], [4.0]], [1, 3])[0] == 3.0
    same = [1.0, -2.5, 1e-3]
    assert g.aggregate([same, same, same], [5, 1, 9]).tolist() == same


def test_aggregate_errors():
    with pytest.raises(ValueError):
        g.aggregate([], [])
    with pytest.raises(ValueError):
        g.aggregate([[1.0], [1.0, 2.0]], [1, 1])


def test_f1_against_sklearn_style_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        c = int(rng.integers(2, 10))
        truth = rng.integers(0, c, size=200)
        pred = np.where(rng.random(200) < 0.6, truth, rng.integers(0, c, size=200))
        cm = np.zeros((c, c), dtype=np.int64)
        np.add.at(cm, (truth, pred), 1)
        tp = np.diag(cm).astype(float)
        denom = 2 * tp + (cm.sum(0) - tp) + (cm.sum(1) - tp)
        f1 = np.divide(2 * tp, denom, out=np.zeros(c), where=denom > 0)
        assert g.f1_macro(cm) == pytest.approx(f1.mean(), abs=1e-12)
        assert g.f1_micro(cm) == pytest.approx((truth == pred).mean(), abs=1e-12)


def test_task_success_and_sus():
    assert g.task_success_rate([True, True, False, True], [5.0, 12.0, 3.0, 29.0]) == 75.0
    assert g.task_success_rate([True], [30.0]) == 100.0
    assert g.sus_score([5, 1] * 5) == 1.0
    assert g.sus_score([3] * 10) == 0.5
    for resp in itertools.islice(itertools.product(range(1, 6), repeat=10), 0, 50000, 997):
        assert 0.0 <= g.sus_score(list(resp)) <= 1.0
    with pytest.raises(ValueError):
        g.sus_score([6] * 10)
    assert g.adjustment_latency([10.0, 20.0, 30.0]) == (20.0, 30.0)


def test_reward_and_diagnostic_mdp():
    assert g.compute_reward(0.0, True, 1.0) == 1.0
    assert g.compute_reward(3.0, False, 0.0) == 0.0
    with pytest.raises(ValueError):
        g.compute_reward(-1.0, True, 0.0)
    q_star = g.diagnostic_value_iteration(0.9)
    q = g.diagnostic_q_learning(0.5, 0.9, 2000)
    assert q.shape == (3, 2)
    np.testing.assert_allclose(q, q_star, atol=1e-6)
    assert (q.argmax(1) == q_star.argmax(1)).all()


def test_dataset_generation():
    ds = g.generate_dataset(60, 10, seed=4)
    assert len(ds) == 60
    assert sum(ds.impaired) == 4
    s = ds.sample(0)
    assert s["visual"].shape == (16, 16, 1)
    assert s["accel"].shape == (64, 3)
    assert s["emg"].shape == (64, 8)
    again = g.generate_dataset(60, 10, seed=4, threads=2)
    np.testing.assert_array_equal(again.sample(7)["accel"], ds.sample(7)["accel"])
    assert again.labels == ds.labels


def test_config_round_trip_and_errors():
    for scale in ("desk", "paper"):
        text = g.default_config(scale)
        assert g.normalize_config(text) == text
    with pytest.raises(g.ConfigError, match="federated.rounds"):
        g.normalize_config('[federated]\nrounds = "many"\n')
    with pytest.raises(ValueError):
        g.normalize_config("bogus = 1\n")


def test_short_pipeline(tmp_path):
    out = tmp_path / "run"
    g.gen_data(TINY, out)
    g.train(TINY, out, threads=2)
    g.adapt(TINY, out)
    rows = g.evaluate(TINY, out)
    assert [r["model"] for r in rows][-1] == "Static"
    assert rows[-1]["f1"] is None
    for r in rows[:-1]:
        assert 0.0 <= r["f1"] <= 1.0
    assert 0.0 <= g.accessible_choice_rate(out / "adapt" / "policy.json") <= 1.0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert set(manifest["stages"]) == {"gen-data", "train", "adapt", "evaluate"}


def test_missing_dataset_is_config_error(tmp_path):
    with pytest.raises(g.ConfigError, match="gen-data"):
        g.train(TINY, tmp_path / "empty")
