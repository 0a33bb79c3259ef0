import json

import numpy as np
import pytest

import cdacplus


@pytest.fixture(scope="module")
def blobs():
    return cdacplus.synthetic_blobs(num_classes=4, per_class=40, dim=8, seed=7)


def test_synthetic_blobs_shape(blobs):
    assert len(blobs) == 160
    assert blobs.dim == 8
    assert blobs.embeddings.shape == (160, 8)
    assert len(blobs.classes()) == 4
    assert set(blobs.split) <= {"train", "validation", "test"}


def test_dataset_round_trip(tmp_path, blobs):
    path = tmp_path / "blobs.emb"
    cdacplus.save_binary(blobs, path)
    back = cdacplus.load_dataset(path)
    assert back.labels == blobs.labels
    np.testing.assert_array_equal(back.embeddings, blobs.embeddings)


def test_dataset_from_numpy_and_errors():
    x = np.arange(6, dtype=float).reshape(3, 2)
    ds = cdacplus.Dataset(["a", "b", "c"], x, ["p", "q", "p"], ["train", "test", "test"])
    assert ds.rows_in("test") == [1, 2]
    with pytest.raises(cdacplus.InputError):
        cdacplus.Dataset(["a"], x)
    with pytest.raises(cdacplus.InputError):
        cdacplus.load_dataset("/nonexistent/file.emb")


def test_metrics():
    assert cdacplus.ari([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5)
    assert cdacplus.nmi([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)
    assert cdacplus.acc([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    cols, cost = cdacplus.hungarian(np.array([[4.0, 1.0], [2.0, 3.0]]))
    assert cols == [1, 0] and cost == pytest.approx(3.0)
    report = cdacplus.evaluate([0, 0, 1], [2, 2, 2])
    assert report["acc"] == pytest.approx(2 / 3)


def test_kmeans(blobs):
    r = cdacplus.kmeans(blobs.embeddings, 4, seed=1, restarts=5)
    assert r["centroids"].shape == (4, 8)
    assert len(set(r["assignments"])) == 4


def test_run_reports_and_predictions(blobs):
    out = cdacplus.run(blobs, variant="CDAC+", num_runs=2, refine_epochs=10, batch_size=64)
    assert out["config"]["variant"] == "CDAC+"
    assert len(out["runs"]) == 2
    assert 0.0 <= out["aggregate"]["acc"]["mean"] <= 1.0
    assert len(out["predictions"]) == 2
    assert set(out["predictions"][0]) == set(blobs.ids[i] for i in blobs.rows_in("test"))


def test_run_is_deterministic(blobs):
    cfg = cdacplus.RunConfig()
    cfg.variant = "KM-raw"
    a = cdacplus.run_variant(cfg, blobs).json()
    b = cdacplus.run_variant(cfg, blobs).json()
    assert a == b
    assert json.loads(a)["runs"][0]["test"]["acc"] > 0.9


def test_config_errors(blobs):
    with pytest.raises(cdacplus.InputError):
        cdacplus.run(blobs, variant="CDAC+", labeled_ratio=0.0)
    with pytest.raises(cdacplus.InputError):
        cdacplus.RunConfig().variant = "nope"
    with pytest.raises(TypeError):
        cdacplus.run(blobs, not_an_option=1)
