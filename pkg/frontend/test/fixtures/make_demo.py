"""Builds the demo bundle the console integration tests run against.

Usage: python3 make_demo.py OUTDIR PORT
Writes a reference library, a case store, the service config and the
query/scored inputs, then drops an info.json the tests read back.
"""
import json
import sys
from pathlib import Path

import numpy as np

from refmatch.cli import main


def write_rows(path, vectors, labels=None):
    with path.open("w") as fh:
        for i, vec in enumerate(vectors):
            row = {"vector": [float(x) for x in vec]}
            if labels is not None:
                row["label"] = labels[i]
            fh.write(json.dumps(row) + "\n")


def build(outdir: Path, port: int) -> dict:
    rng = np.random.default_rng(5)
    centers = rng.standard_normal((6, 16))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    ref_vecs, ref_labels = [], []
    for c in range(6):
        for _ in range(30):
            ref_vecs.append(centers[c] + 0.08 * rng.standard_normal(16))
            ref_labels.append(f"disease_{c}")

    manifest = outdir / "references.jsonl"
    write_rows(manifest, ref_vecs, ref_labels)
    lib = outdir / "demo.grdl"
    if main(["ingest", str(manifest), str(lib)]) != 0:
        raise SystemExit("ingest failed")

    cases = outdir / "cases.jsonl"
    write_rows(cases, ref_vecs[:40])
    store = outdir / "cases.grdl"
    if main(["ingest", str(cases), str(store)]) != 0:
        raise SystemExit("case ingest failed")

    cfg = outdir / "engine.toml"
    cfg.write_text(
        'library_path = "demo.grdl"\n'
        'case_store_path = "cases.grdl"\n'
        "dim = 16\n"
        # wide neighbourhood so the five ranking slots always fill
        "k_neighbors = 150\n"
        "top_n = 5\n"
        f'listen_address = "127.0.0.1:{port}"\n\n'
        "[ensemble]\n"
        "passes = 60\n"
        "mask_rate = 0.1\n"
        "seed = 5\n"
    )

    parity = [ref_vecs[0], centers[3], centers[5]]
    queries = outdir / "queries.jsonl"
    write_rows(queries, parity)
    one = outdir / "one.jsonl"
    write_rows(one, [ref_vecs[10]])

    ambiguous = centers[0] + centers[1]
    ambiguous /= np.linalg.norm(ambiguous)

    scored = outdir / "scored.jsonl"
    pairs = [(0.9, True), (0.8, True), (0.55, True), (0.6, False), (0.3, False), (0.2, False)]
    with scored.open("w") as fh:
        for cscore, correct in pairs:
            fh.write(json.dumps({"cscore": cscore, "correct": correct}) + "\n")

    return {
        "base_url": f"http://127.0.0.1:{port}",
        "port": port,
        "config": str(cfg),
        "library": str(lib),
        "store": str(store),
        "queries_jsonl": str(queries),
        "one_jsonl": str(one),
        "scored_jsonl": str(scored),
        "parity_vectors": [[float(x) for x in v] for v in parity],
        "single_vector": [float(x) for x in ref_vecs[10]],
        "ambiguous_vector": [float(x) for x in ambiguous],
    }


if __name__ == "__main__":
    outdir = Path(sys.argv[1])
    outdir.mkdir(parents=True, exist_ok=True)
    info = build(outdir, int(sys.argv[2]))
    (outdir / "info.json").write_text(json.dumps(info, indent=2))
