"""Acceptance gate: one test per shipped guarantee, each printing a
single summary line with its measured numbers.

Tolerances are stated inline; a failure here means the package does
not meet its contract on this machine.
"""
from __future__ import annotations

import json
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from refmatch import kernels
from refmatch.cli import main
from refmatch.config import EngineConfig, load_config
from refmatch.confidence import EnsembleSpec, calibrate_threshold, mc_predict
from refmatch.core import (
    Embedding,
    LabelCatalog,
    LibrarySnapshot,
    Provenance,
    ReferenceItem,
    load_library,
    normalize,
    save_library,
)
from refmatch.engine import Engine
from refmatch.harness.experiments import run_experiment
from refmatch.harness.oracles import oracle_knn, oracle_sweep
from refmatch.service import create_app

from conftest import make_clustered, make_items, unit_rows


def _line(n: int, slug: str, detail: str) -> None:
    print(f"[criterion {n}] {slug}: {detail}")


def test_accept_1_knn_oracle_equivalence():
    """100 randomized trials (N <= 10^4, dim in {8, 512}, k in
    {1, 3, 5, 10}): ranking equals the full-sort oracle exactly (ids
    and order), scores within 1e-9; total runtime < 30 s."""
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for trial in range(100):
        dim = 8 if trial % 2 == 0 else 512
        hi = 10_001 if dim == 8 else 2_001
        n = int(rng.integers(50, hi))
        mat = rng.standard_normal((n, dim))
        mat /= np.linalg.norm(mat, axis=1, keepdims=True)
        mat = np.ascontiguousarray(mat.astype(np.float32))
        # duplicate rows produce exact ties, exercising the id order
        mat[1] = mat[0]
        mat[3] = mat[2]
        ids = rng.permutation(n).astype(np.uint64)
        q = rng.standard_normal(dim)
        q = (q / np.linalg.norm(q)).astype(np.float32)
        for k in (1, 3, 5, 10):
            rows, scores = kernels.topk(mat, ids, q, k)
            expected = oracle_knn(mat, ids, q, k)
            assert [int(i) for i in ids[rows]] == [i for i, _ in expected]
            want = np.array([s for _, s in expected])
            assert np.abs(scores - want).max() <= 1e-9
    elapsed = time.perf_counter() - start
    _line(1, "knn oracle equivalence", f"100 trials in {elapsed:.1f}s (< 30s)")
    assert elapsed < 30.0


def test_accept_2_youden_oracle_equivalence():
    """100 randomized scored sets (<= 10^4 pairs): theta_star equals the
    exhaustive sweep oracle's smallest argmax exactly; sentinel J values
    at both curve extremes are 0 to 1e-12."""
    rng = np.random.default_rng(7)
    for trial in range(100):
        if trial % 2 == 0:
            n = int(rng.integers(2, 10_001))
            cscores = rng.integers(0, 21, size=n) / 20.0
        else:
            n = int(rng.integers(2, 401))
            cscores = rng.random(n)
        flags = rng.random(n) < rng.uniform(0.2, 0.8)
        if flags.all() or not flags.any():
            flags[0] = not flags[0]
        pairs = [(float(c), bool(ok)) for c, ok in zip(cscores, flags)]
        result = calibrate_threshold(pairs)
        want_theta, want_curve = oracle_sweep(pairs)
        assert result.theta_star == want_theta
        assert len(result.curve) == len(want_curve)
        assert abs(result.curve[0].j) <= 1e-12
        assert abs(result.curve[-1].j) <= 1e-12
    _line(2, "youden oracle equivalence", "100 sets, exact argmax, sentinels 0")


def test_accept_3_topk_monotonicity_and_metrics():
    """Default 11-class benchmark (sigma=0.05): Top-1 >= 0.99,
    accuracy(1) <= accuracy(3) <= accuracy(5), metrics equal the
    counting oracle to 1e-12."""
    report = run_experiment("topk_curve")
    acc = report.metrics["topk_accuracy"]
    _line(
        3,
        "topk curve",
        f"top1={acc['1']:.3f} top3={acc['3']:.3f} top5={acc['5']:.3f} "
        f"oracle diff {report.metrics['oracle_max_diff']:.2e}",
    )
    assert report.passed
    assert acc["1"] >= 0.99
    assert acc["1"] <= acc["3"] <= acc["5"]
    assert report.metrics["oracle_max_diff"] <= 1e-12


def test_accept_4_domain_shift_recovery():
    """Default shift experiment: Top-1 < 0.70 before augmentation,
    >= 0.95 after; null-offset control moves Top-1 by <= 0.02;
    runtime < 60 s."""
    report = run_experiment("shift_recovery")
    before = report.metrics["before_topk"]["1"]
    after = report.metrics["after_topk"]["1"]
    null_delta = report.metrics["null_delta_top1"]
    _line(
        4,
        "shift recovery",
        f"before={before:.3f} after={after:.3f} null delta={null_delta:.3f} "
        f"in {report.timings['total']:.1f}s",
    )
    assert report.passed
    assert before < 0.70
    assert after >= 0.95
    assert null_delta <= 0.02
    assert report.timings["total"] < 60.0


def test_accept_5_confidence_triage_20_seeds():
    """Label-noise triage with E=100, p=0.1: accuracy(retained at
    theta*) - accuracy(all) >= 0.03 and retained >= all on every seed
    of a 20-seed sweep."""
    gaps = []
    for seed in range(20):
        report = run_experiment("triage", {"seed": seed})
        assert report.config["passes"] == 100
        assert report.config["mask_rate"] == 0.1
        gaps.append(report.metrics["gap"])
        assert report.passed, f"seed {seed}: {report.to_json()['checks']}"
        assert report.metrics["gap"] >= 0.03, f"seed {seed}"
    _line(5, "confidence triage", f"20 seeds, gap min={min(gaps):.3f}")


def test_accept_6_ood_detection_20_seeds():
    """Default OOD experiment: flags >= 90% of far-OOD and <= 15% of
    in-distribution holdout at theta*; every seed of a 20-seed sweep."""
    ood_rates, id_rates = [], []
    for seed in range(20):
        report = run_experiment("ood", {"seed": seed})
        ood_rates.append(report.metrics["ood_flag_rate"])
        id_rates.append(report.metrics["id_flag_rate"])
        assert report.passed, f"seed {seed}: {report.to_json()['checks']}"
        assert report.metrics["ood_flag_rate"] >= 0.90, f"seed {seed}"
        assert report.metrics["id_flag_rate"] <= 0.15, f"seed {seed}"
    _line(
        6,
        "ood detection",
        f"20 seeds, ood min={min(ood_rates):.3f} id max={max(id_rates):.3f}",
    )


def test_accept_7_ensemble_determinism():
    """Identical inputs give identical ConfidenceReports, per-query vote
    totals equal E, and p=0 forces cscore 1.0 for every query."""
    rs = np.random.default_rng(13)
    snapshot, _ = make_clustered(rs, n_classes=4, per_class=25, dim=16, sigma=0.1)
    queries = [Embedding(v, normalized=True) for v in unit_rows(rs, 6, 16)]
    spec = EnsembleSpec(passes=64, mask_rate=0.25, seed=11)
    for q in queries:
        first = mc_predict(q, snapshot, spec, k=7)
        second = mc_predict(q, snapshot, spec, k=7)
        assert first == second
        assert sum(first.per_pass_votes.values()) == spec.passes
    clean = EnsembleSpec(passes=32, mask_rate=0.0, seed=3)
    cscores = [mc_predict(q, snapshot, clean, k=7).cscore for q in queries]
    assert all(c == 1.0 for c in cscores)
    _line(7, "ensemble determinism", f"{len(queries)} queries, votes=E, p=0 -> 1.0")


def test_accept_8_performance_budget():
    """Exact top-10 over a 1,000,000 x 512 f32 library: median latency
    <= 150 ms single-threaded and <= 40 ms with the parallel scan;
    parallel results identical to sequential."""
    n, dim, k = 1_000_000, 512, 10
    rng = np.random.default_rng(77)
    mat = rng.standard_normal((n, dim), dtype=np.float32)
    for lo in range(0, n, 100_000):
        block = mat[lo : lo + 100_000]
        block /= np.linalg.norm(block, axis=1, keepdims=True)
    ids = np.arange(n, dtype=np.uint64)
    q = rng.standard_normal(dim)
    q = (q / np.linalg.norm(q)).astype(np.float32)

    kernels.topk(mat[:1000], ids[:1000], q, k)
    kernels.topk(mat[:1000], ids[:1000], q, k, parallel=True)
    seq = kernels.topk(mat, ids, q, k)
    par = kernels.topk(mat, ids, q, k, parallel=True)
    assert np.array_equal(seq[0], par[0])
    assert np.array_equal(seq[1], par[1])

    def median_ms(parallel: bool) -> float:
        times = []
        for _ in range(7):
            t0 = time.perf_counter()
            kernels.topk(mat, ids, q, k, parallel=parallel)
            times.append((time.perf_counter() - t0) * 1e3)
        return float(np.median(times))

    single = median_ms(False)
    parallel = median_ms(True)
    _line(
        8,
        "performance budget",
        f"single {single:.0f}ms (budget 150), parallel {parallel:.0f}ms "
        f"(budget 40), backend={kernels.backend_name()}",
    )
    assert single <= 150.0
    assert parallel <= 40.0


def _mixed_snapshot(rs) -> LibrarySnapshot:
    catalog = LabelCatalog.from_names(["a", "b", "c"])
    items = make_items(rs, 40, 8, 3, source_tag="siteA")
    rows = unit_rows(rs, 10, 8)
    items += [
        ReferenceItem(
            item_id=100 + i,
            embedding=Embedding(rows[i], normalized=True),
            class_id=None,
            provenance=Provenance.LOCAL,
            source_tag="siteB",
        )
        for i in range(10)
    ]
    return LibrarySnapshot.from_items(items, catalog, generation=4)


def _write_demo_rows(path, vectors, labels=None):
    with path.open("w") as fh:
        for i, vec in enumerate(vectors):
            row = {"vector": [float(x) for x in vec]}
            if labels is not None:
                row["label"] = labels[i]
            fh.write(json.dumps(row) + "\n")


def test_accept_9_format_and_service_integrity(tmp_path, capsys):
    """(a) save/load/save is byte-exact; (b) 100+ concurrent diagnoses
    during 10 augments observe only whole generations; (c) API and CLI
    agree on the demo bundle for diagnose, confident diagnose and
    retrieve."""
    rs = np.random.default_rng(20240817)

    # (a) byte-exact round trip
    p1, p2 = tmp_path / "a.grdl", tmp_path / "b.grdl"
    save_library(_mixed_snapshot(rs), p1)
    save_library(load_library(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()

    # (b) atomic generation swap under concurrent readers
    snapshot, centroids = make_clustered(rs, n_classes=4, per_class=15, dim=16, sigma=0.1)
    config = EngineConfig(library_path=str(tmp_path / "live.grdl"), k_neighbors=5, dim=16)
    engine = Engine(config, snapshot)
    manifests = []
    for m in range(10):
        path = tmp_path / f"aug_{m}.jsonl"
        vecs = centroids[m % 4] + 0.1 * rs.standard_normal((5, 16))
        _write_demo_rows(path, vecs, labels=["class_0"] * 5)
        manifests.append(path)
    queries = [Embedding(v, normalized=True) for v in unit_rows(rs, 8, 16)]
    base = len(snapshot)
    observed: list[tuple[int, int, int]] = []
    errors: list[Exception] = []
    barrier = threading.Barrier(5)

    def reader():
        try:
            barrier.wait()
            for i in range(30):
                resp = engine.diagnose(queries[i % len(queries)])
                h = engine.health()
                observed.append((resp.generation, h["generation"], h["item_count"]))
        except Exception as exc:  # noqa: BLE001 - surfaced after join
            errors.append(exc)

    def writer():
        try:
            barrier.wait()
            for m, path in enumerate(manifests):
                engine.augment(path, site_id=f"site_{m}")
                time.sleep(0.002)
        except Exception as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=reader) for _ in range(4)]
    threads.append(threading.Thread(target=writer))
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert len(observed) == 120
    for diag_gen, gen, count in observed:
        assert count == base + 5 * gen, "torn generation observed"
        assert 0 <= diag_gen <= 10
    assert engine.generation == 10
    assert engine.health()["item_count"] == base + 50

    # (c) API/CLI parity on a demo bundle
    demo_dir = tmp_path / "demo"
    demo_dir.mkdir()
    rng = np.random.default_rng(5)
    centers = unit_rows(rng, 6, 16).astype(np.float64)
    ref_vecs, ref_labels = [], []
    for c in range(6):
        for _ in range(30):
            ref_vecs.append(centers[c] + 0.08 * rng.standard_normal(16))
            ref_labels.append(f"disease_{c}")
    manifest = demo_dir / "references.jsonl"
    _write_demo_rows(manifest, ref_vecs, ref_labels)
    lib = demo_dir / "demo.grdl"
    assert main(["ingest", str(manifest), str(lib)]) == 0

    cases = demo_dir / "cases.jsonl"
    _write_demo_rows(cases, ref_vecs[:40])
    store = demo_dir / "cases.grdl"
    assert main(["ingest", str(cases), str(store)]) == 0

    cfg = demo_dir / "engine.toml"
    cfg.write_text(
        'library_path = "demo.grdl"\n'
        'case_store_path = "cases.grdl"\n'
        "dim = 16\n"
        # 150 of 180 references: the hit set must span at least 5 of the
        # 6 classes, so the ranking always fills its five slots.
        "k_neighbors = 150\n"
        "top_n = 5\n\n"
        "[ensemble]\n"
        "passes = 60\n"
        "mask_rate = 0.1\n"
        "seed = 5\n"
    )
    qf = demo_dir / "queries.jsonl"
    _write_demo_rows(qf, [ref_vecs[0], centers[3], centers[5]])
    capsys.readouterr()

    client = TestClient(create_app(Engine.load(load_config(cfg))))

    def cli_json(argv):
        assert main(argv) == 0
        return json.loads(capsys.readouterr().out)

    def strip(payload):
        payload.pop("timing_ms", None)
        return payload

    cli_plain = cli_json(["diagnose", str(lib), str(qf), "--config", str(cfg)])
    for cli_resp, vec in zip(cli_plain, [ref_vecs[0], centers[3], centers[5]]):
        api_resp = client.post(
            "/v1/diagnose", json={"vector": [float(x) for x in vec]}
        )
        assert api_resp.status_code == 200
        assert strip(cli_resp) == strip(api_resp.json())
    assert len(cli_plain[0]["ranked_labels"]) == 5

    single = demo_dir / "one.jsonl"
    _write_demo_rows(single, [ref_vecs[10]])
    cli_conf = cli_json(
        ["diagnose", str(lib), str(single), "--config", str(cfg),
         "--confident", "--theta", "0.4"]
    )
    api_conf = client.post(
        "/v1/diagnose/confident",
        json={"vector": [float(x) for x in ref_vecs[10]], "theta": 0.4},
    )
    assert api_conf.status_code == 200
    assert strip(cli_conf) == strip(api_conf.json())

    cli_hits = cli_json(["retrieve", str(store), str(single), "--k", "4"])
    api_hits = client.post(
        "/v1/retrieve",
        json={"vector": [float(x) for x in ref_vecs[10]], "k": 4},
    )
    assert api_hits.status_code == 200
    assert cli_hits == api_hits.json()

    _line(9, "format and service integrity",
          "byte-exact round trip, 120 reads over 10 augments, API==CLI")
