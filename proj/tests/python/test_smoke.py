import math
import os
from pathlib import Path

import numpy as np
import pytest

import mtdetect as mt

FIXTURES = Path(os.environ.get("MTDETECT_FIXTURES", Path(__file__).resolve().parents[1] / "fixtures"))
E2E = FIXTURES / "e2e"


@pytest.fixture(scope="module")
def table():
    return mt.load_embeddings(E2E / "embeddings.txt")


@pytest.fixture(scope="module")
def features(table):
    corpus, rejected = mt.load_corpus(E2E / "corpus.jsonl")
    assert rejected == []
    return mt.extract(corpus, table, mt.DistanceMetric.EUCLIDEAN, jobs=2)


def test_layout():
    layout = mt.FeatureLayout(mt.Tagset.penn_treebank())
    assert layout.group_count == 1035
    assert layout.total_len == 2070
    assert layout.pair_name(layout.index(0, 11)) == "CC-NN"


def test_distance():
    assert mt.distance(mt.DistanceMetric.EUCLIDEAN, [0, 0], [3, 4]) == pytest.approx(5.0)
    assert mt.distance(mt.DistanceMetric.COSINE, [1, 0], [0, 2]) == pytest.approx(1.0)
    with pytest.raises(mt.Error):
        mt.distance(mt.DistanceMetric.COSINE, [0, 0], [1, 1])


def test_match_paragraph(table):
    groups = mt.match_paragraph([("the", "DT"), ("that", "DT"), ("zzz-unknown", "NN")], table)
    assert list(groups) == ["DT-DT"]
    assert len(groups["DT-DT"]) == 2
    assert table.lookup("zzz-unknown") is None
    assert table.lookup("the").shape == (table.dimension,)


def test_features_and_training(features, tmp_path):
    x = features.values
    assert x.shape == (400, 2070)
    assert np.isfinite(x).all()
    model = mt.train(features, mt.Optimizer.SMO)
    preds = mt.predict(model, features)
    acc = np.mean([(p["label"] == "machine") == (y > 0) for p, y in zip(preds, features.labels)])
    assert acc >= 0.9

    path = tmp_path / "model.json"
    model.save(path)
    again = mt.load_model(path)
    assert again.weights == model.weights
    assert again.score(list(x[0])) == pytest.approx(preds[0]["score"], abs=0, rel=0)


def test_cross_validation(features):
    report = mt.cross_validate(features, folds=5)
    assert report["accuracy"] >= 0.8
    assert 0.0 <= report["eer"] <= 0.2
    assert len(report["per_fold"]) == 5


def test_eer():
    assert mt.compute_eer([-2, -1, 1, 2], [-1, -1, 1, 1]) == 0.0
    assert mt.compute_eer([-3, -2, 1, -1, 2, 3], [-1, -1, -1, 1, 1, 1]) == pytest.approx(1 / 3)
    assert math.isclose(mt.compute_eer([2, 1, -1, -2], [-1, -1, 1, 1]), 1.0)


def test_errors(tmp_path):
    with pytest.raises(OSError):
        mt.load_embeddings(tmp_path / "missing.txt")
    bad = tmp_path / "bad.txt"
    bad.write_text("a 1 2\nb 1\n")
    with pytest.raises(mt.ParseError):
        mt.load_embeddings(bad)
