import json

import numpy as np
import pytest

import oodshape as oo


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def test_npy_round_trip_with_numpy(tmp_path, rng):
    a = rng.normal(size=(7, 5))
    oo.save_tensor(a, tmp_path / "a.npy")
    np.testing.assert_array_equal(np.load(tmp_path / "a.npy"), a)

    b = rng.normal(size=11).astype(np.float32)
    np.save(tmp_path / "b.npy", b)
    np.testing.assert_array_equal(oo.load_tensor(tmp_path / "b.npy"), b.astype(np.float64))

    np.save(tmp_path / "bad.npy", np.arange(4, dtype=np.int32))
    with pytest.raises(oo.OodShapeError):
        oo.load_tensor(tmp_path / "bad.npy")


def test_partition_uses_numpy_linear_percentiles(rng):
    x = rng.gamma(2.0, size=(300, 20))
    p = oo.fit_partition(x, 10, 1.0, 99.0)
    assert p.alpha == np.percentile(x, 1.0)
    assert p.beta == np.percentile(x, 99.0)
    assert p.k == 10


def test_closed_form_solution():
    p = oo.IntervalPartition(0.0, 1.0, 2)
    sol = oo.solve_id_only(np.array([3.0, 4.0]), p)
    np.testing.assert_allclose(sol["theta"], [3 * np.sqrt(2) / 5, 4 * np.sqrt(2) / 5], rtol=1e-15)
    assert sol["objective"] == pytest.approx(5 * np.sqrt(2), rel=1e-15)


def test_shaping_and_scores_match_numpy(rng):
    z = rng.uniform(0, 3, size=(50, 8))
    w = rng.normal(size=(3, 8))
    b = rng.normal(size=3)
    np.testing.assert_array_equal(oo.apply(oo.ReAct(1.0), z), np.minimum(z, 1.0))
    logits = z @ w.T + b
    mls = oo.score_dataset(z, w, b, oo.Identity(), "mls")
    np.testing.assert_allclose(mls, logits.max(axis=1), rtol=1e-12)
    energy = oo.score_dataset(z, w, b, oo.Identity(), "energy")
    np.testing.assert_allclose(energy, np.log(np.exp(logits).sum(axis=1)), rtol=1e-12)


def test_metrics_against_pairwise_definition(rng):
    a = rng.integers(0, 10, size=60).astype(float)
    b = rng.integers(0, 10, size=40).astype(float)
    diff = a[:, None] - b[None, :]
    expected = ((diff > 0) + 0.5 * (diff == 0)).mean()
    assert oo.auroc(a, b) == pytest.approx(expected, abs=1e-15)
    assert oo.fpr_at_tpr(np.arange(1.0, 101.0), np.array([5.0, 6.0])) == 0.5


def test_end_to_end_run(tmp_path, rng):
    m, c = 12, 3
    w = np.where(np.arange(m)[None, :] // 4 == np.arange(c)[:, None], 1.0, -0.05)
    oo.save_tensor(w, tmp_path / "w.npy")
    oo.save_tensor(np.zeros(c), tmp_path / "b.npy")

    def id_features(n):
        cls = np.arange(n) % c
        mu = np.where(np.arange(m)[None, :] // 4 == cls[:, None], 1.4, 0.3)
        return np.maximum(0.0, mu + rng.normal(0, 0.6, size=(n, m)))

    oo.save_tensor(id_features(300), tmp_path / "train.npy")
    oo.save_tensor(id_features(150), tmp_path / "test.npy")
    oo.save_tensor(np.maximum(0.0, rng.normal(0.45, 0.6, size=(120, m))), tmp_path / "ood.npy")
    config = {
        "classifier": {"weights": "w.npy", "bias": "b.npy"},
        "id_train": {"name": "train", "path": "train.npy"},
        "id_test": {"name": "test", "path": "test.npy"},
        "ood": [{"name": "ood", "path": "ood.npy"}],
        "methods": ["identity", "ours-v"],
        "scores": ["mls"],
        "k": 8,
        "output_dir": "out",
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    csv = oo.run(tmp_path / "config.json")
    lines = csv.strip().splitlines()
    assert lines[0] == "ood_dataset,method,score,auroc,fpr95,n_id,n_ood"
    assert len(lines) == 1 + 2 + 2
    assert (tmp_path / "out" / "report.json").exists()
