from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from refmatch.core import Embedding, LabelCatalog, normalize
from refmatch.diagnosis import (
    MetricsReport,
    Prediction,
    LabelScore,
    aggregate_labels,
    evaluate,
    predict,
    predict_batch,
)
from refmatch.errors import (
    EmptyEvaluation,
    EmptyHits,
    LengthMismatch,
    UnknownClassId,
    UnlabeledHit,
)
from refmatch.harness.oracles import oracle_count
from refmatch.index import Hit, RankedHits, build_index, search
from refmatch.core import Provenance
from conftest import make_clustered, unit_rows


def hits_of(*triples) -> RankedHits:
    return RankedHits(
        entries=tuple(
            Hit(item_id=i, class_id=c, provenance=Provenance.BASE, score=s)
            for i, c, s in triples
        )
    )


def test_aggregate_single_neighbor():
    pred = aggregate_labels(hits_of((1, 0, 0.9)), 3)
    assert pred.ranked_labels == (LabelScore(0, 0.9),)
    assert pred.neighbors_used == 1


def test_aggregate_hand_sum():
    pred = aggregate_labels(
        hits_of((1, 0, 0.9), (2, 1, 0.8), (3, 0, 0.7)), 2
    )
    assert pred.labels() == [0, 1]
    assert pred.ranked_labels[0].score == pytest.approx(1.6, abs=1e-12)
    assert pred.ranked_labels[1].score == pytest.approx(0.8, abs=1e-12)


def test_aggregate_clamps_negative_scores():
    pred = aggregate_labels(hits_of((1, 0, -0.5), (2, 1, 0.1)), 2)
    assert pred.top1 == 1
    assert pred.ranked_labels[-1] == LabelScore(0, 0.0)


def test_aggregate_ties_break_by_class_id():
    pred = aggregate_labels(hits_of((1, 5, 0.4), (2, 2, 0.4)), 2)
    assert pred.labels() == [2, 5]


def test_aggregate_errors():
    with pytest.raises(EmptyHits):
        aggregate_labels(RankedHits(entries=()), 3)
    with pytest.raises(UnlabeledHit):
        aggregate_labels(hits_of((1, None, 0.9)), 3)
    with pytest.raises(ValueError):
        aggregate_labels(hits_of((1, 0, 0.9)), 0)


@given(
    st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=6),
            st.floats(min_value=-1, max_value=1, allow_nan=False),
        ),
        min_size=1,
        max_size=40,
    ),
    st.randoms(),
)
def test_aggregate_permutation_invariant(pairs, pyrandom):
    hits = hits_of(*[(i, c, s) for i, (c, s) in enumerate(pairs)])
    shuffled = list(hits.entries)
    pyrandom.shuffle(shuffled)
    a = aggregate_labels(hits, 5)
    b = aggregate_labels(RankedHits(entries=tuple(shuffled)), 5)
    assert a.labels() == b.labels()
    for x, y in zip(a.ranked_labels, b.ranked_labels):
        assert x.score == pytest.approx(y.score, abs=1e-9)


def test_predict_top1_on_separated_clusters(rs):
    snap, centroids = make_clustered(rs, n_classes=4, per_class=40, dim=32, sigma=0.05)
    index = build_index(snap)
    hits = 0
    for c in range(4):
        query = normalize(centroids[c] + 0.05 * rs.standard_normal(32))
        if predict(query, index, k=30, n=5).top1 == c:
            hits += 1
    assert hits == 4


def test_predict_k1_reduces_to_nearest_neighbor(rs):
    snap, _ = make_clustered(rs, n_classes=3, per_class=30, dim=16, sigma=0.3)
    index = build_index(snap)
    for q in unit_rows(rs, 20, 16):
        query = Embedding(q, normalized=True)
        nn = search(index, query, 1)[0]
        pred = predict(query, index, k=1, n=5)
        assert pred.top1 == nn.class_id
        assert pred.ranked_labels[0].score == pytest.approx(
            max(nn.score, 0.0), abs=1e-12
        )


def test_predict_batch_matches_predict(rs):
    snap, _ = make_clustered(rs, n_classes=3, per_class=20, dim=8, sigma=0.2)
    index = build_index(snap)
    queries = [Embedding(q, normalized=True) for q in unit_rows(rs, 10, 8)]
    batch = predict_batch(queries, index, k=7, n=3)
    for query, got in zip(queries, batch):
        want = predict(query, index, k=7, n=3)
        assert got.labels() == want.labels()


def prediction_of(labels: list[int]) -> Prediction:
    return Prediction(
        ranked_labels=tuple(
            LabelScore(c, float(len(labels) - i)) for i, c in enumerate(labels)
        ),
        neighbors_used=len(labels),
    )


def test_evaluate_all_correct():
    catalog = LabelCatalog.from_names(["a", "b", "c"])
    preds = [prediction_of([0, 1, 2]), prediction_of([1, 0, 2])]
    report = evaluate(preds, [0, 1], ks=[1, 2, 3], catalog=catalog)
    assert report.top_k_accuracy == {1: 1.0, 2: 1.0, 3: 1.0}


def test_evaluate_hand_count():
    catalog = LabelCatalog.from_names(["a", "b", "c"])
    preds = [prediction_of([0, 1, 2]), prediction_of([0, 1, 2])]
    report = evaluate(preds, [0, 1], ks=[1, 3], catalog=catalog)
    assert report.top_k_accuracy[1] == 0.5
    assert report.top_k_accuracy[3] == 1.0
    assert report.confusion_top1[0, 0] == 1
    assert report.confusion_top1[1, 0] == 1
    assert report.confusion_top1.sum() == 2


def test_evaluate_validations():
    catalog = LabelCatalog.from_names(["a", "b"])
    preds = [prediction_of([0, 1])]
    with pytest.raises(LengthMismatch):
        evaluate(preds, [0, 1], ks=[1], catalog=catalog)
    with pytest.raises(EmptyEvaluation):
        evaluate([], [], ks=[1], catalog=catalog)
    with pytest.raises(UnknownClassId):
        evaluate(preds, [9], ks=[1], catalog=catalog)
    with pytest.raises(ValueError):
        evaluate(preds, [0], ks=[0], catalog=catalog)
    with pytest.raises(ValueError):
        evaluate(preds, [0], ks=[3], catalog=catalog)


def test_evaluate_equals_counting_oracle_on_random_pairs(rs):
    n_classes = 6
    catalog = LabelCatalog.from_names([f"c{i}" for i in range(n_classes)])
    ks = [1, 3, 5]
    preds = []
    truths = []
    for _ in range(1000):
        ranking = list(rs.permutation(n_classes)[:5])
        preds.append(prediction_of([int(c) for c in ranking]))
        truths.append(int(rs.integers(n_classes)))
    report = evaluate(preds, truths, ks=ks, catalog=catalog)
    expected = oracle_count(
        [p.labels() for p in preds], truths, ks, list(range(n_classes))
    )
    for k in ks:
        assert abs(report.top_k_accuracy[k] - expected["topk"][k]) <= 1e-12
        assert abs(report.macro_recall[k] - expected["macro_recall"][k]) <= 1e-12
        for c, recall in expected["recall"][k].items():
            assert abs(report.per_class_recall[k][c] - recall) <= 1e-12
    assert report.confusion_top1.tolist() == expected["confusion"]


def test_topk_accuracy_monotone_in_k(rs):
    n_classes = 5
    catalog = LabelCatalog.from_names([f"c{i}" for i in range(n_classes)])
    preds = [
        prediction_of([int(c) for c in rs.permutation(n_classes)])
        for _ in range(300)
    ]
    truths = [int(rs.integers(n_classes)) for _ in range(300)]
    report = evaluate(preds, truths, ks=[1, 2, 3, 4, 5], catalog=catalog)
    accs = [report.top_k_accuracy[k] for k in (1, 2, 3, 4, 5)]
    assert accs == sorted(accs)


def test_confusion_rows_sum_to_class_counts(rs):
    n_classes = 4
    catalog = LabelCatalog.from_names([f"c{i}" for i in range(n_classes)])
    preds = [
        prediction_of([int(c) for c in rs.permutation(n_classes)])
        for _ in range(200)
    ]
    truths = [int(rs.integers(n_classes)) for _ in range(200)]
    report = evaluate(preds, truths, ks=[1], catalog=catalog)
    for c in range(n_classes):
        assert report.confusion_top1[c].sum() == truths.count(c)


def test_metrics_report_json_round_trip(rs):
    catalog = LabelCatalog.from_names(["a", "b"])
    preds = [prediction_of([0, 1]), prediction_of([1, 0])]
    report = evaluate(preds, [0, 0], ks=[1, 2], catalog=catalog)
    back = MetricsReport.from_json(report.to_json())
    assert back.top_k_accuracy == report.top_k_accuracy
    assert back.per_class_recall == report.per_class_recall
    assert back.macro_recall == report.macro_recall
    assert np.array_equal(back.confusion_top1, report.confusion_top1)
