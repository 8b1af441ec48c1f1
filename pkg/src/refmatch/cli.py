"""Command line front end: every subcommand is a thin composition of
the library, diagnosis, confidence and serving layers.

Usage errors exit 2 (argparse), data errors exit 1 with an error JSON
line on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from refmatch.config import EngineConfig, load_config
from refmatch.confidence import EnsembleSpec, calibrate_threshold
from refmatch.core import (
    LabelCatalog,
    LibrarySnapshot,
    Provenance,
    items_from_manifest,
    load_library,
    normalize,
    read_manifest,
    save_library,
)
from refmatch.engine import Engine
from refmatch.errors import BadRequest, CorruptRecord, EngineError, EmptyManifest
from refmatch.harness.experiments import EXPERIMENT_NAMES, run_experiment
from refmatch.index import build_index
from refmatch.retrieval import load_case_store, retrieve_cases
from refmatch.service import run_service


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _table(rows: list[dict]) -> str:
    if not rows:
        return "(empty)"
    cols = list(rows[0])
    widths = {c: max(len(c), *(len(_cell(r.get(c))) for r in rows)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    for row in rows:
        lines.append("  ".join(_cell(row.get(c)).ljust(widths[c]) for c in cols))
    return "\n".join(lines)


def _emit(payload, fmt: str, rows: list[dict] | None = None) -> None:
    if fmt == "table" and rows is not None:
        print(_table(rows))
    else:
        print(json.dumps(payload, indent=2))


def _kv_rows(payload: dict) -> list[dict]:
    return [{"key": k, "value": json.dumps(v) if isinstance(v, dict) else v}
            for k, v in payload.items()]


def _engine_for(args, library: str) -> Engine:
    """Build an Engine for a library path, folding in config file and
    flag overrides; without a config the dim comes from the library."""
    snapshot = load_library(library)
    if getattr(args, "config", None):
        config = load_config(args.config)
        config = replace(config, library_path=str(Path(library).resolve()))
    else:
        config = EngineConfig(library_path=str(library), dim=snapshot.dim or 1)
    overrides = {}
    if isinstance(getattr(args, "k", None), int):
        overrides["k_neighbors"] = args.k
    if getattr(args, "n", None) is not None:
        overrides["top_n"] = args.n
    if getattr(args, "theta", None) is not None:
        overrides["theta_star"] = args.theta
    if getattr(args, "seed", None) is not None:
        overrides["ensemble"] = replace(config.ensemble, seed=args.seed)
    if overrides:
        config = replace(config, **overrides)
    return Engine(config, snapshot)


def _queries_from(path: str) -> list:
    rows = read_manifest(path)
    return [normalize(row.vector) for row in rows]


def _cmd_ingest(args) -> int:
    rows = read_manifest(args.manifest)
    labels = sorted({row.label for row in rows if row.label is not None})
    catalog = LabelCatalog.from_names(labels)
    dim = len(rows[0].vector)
    assign = not all(row.id is not None for row in rows)
    items = items_from_manifest(
        rows, catalog, dim, Provenance.BASE, assign_ids=assign
    )
    snapshot = LibrarySnapshot.from_items(items, catalog, generation=0)
    save_library(snapshot, args.out_library)
    payload = {
        "library": str(args.out_library),
        "items": len(snapshot),
        "dim": snapshot.dim,
        "classes": len(catalog),
        "generation": snapshot.generation,
    }
    _emit(payload, args.format, _kv_rows(payload))
    return 0


def _cmd_build(args) -> int:
    snapshot = load_library(args.library)
    build_index(snapshot)
    prov = snapshot.provenance
    payload = {
        "library": str(args.library),
        "generation": snapshot.generation,
        "items": len(snapshot),
        "dim": snapshot.dim,
        "classes": len(snapshot.catalog),
        "by_provenance": {
            "base": int((prov == int(Provenance.BASE)).sum()),
            "local": int((prov == int(Provenance.LOCAL)).sum()),
        },
    }
    _emit(payload, args.format, _kv_rows(payload))
    return 0


def _cmd_diagnose(args) -> int:
    engine = _engine_for(args, args.library)
    queries = _queries_from(args.query_file)
    responses = []
    for q in queries:
        if args.confident:
            responses.append(engine.diagnose_confident(q))
        else:
            responses.append(engine.diagnose(q))
    payload = [r.to_json() for r in responses]
    if len(payload) == 1:
        payload = payload[0]
    rows = []
    for qi, resp in enumerate(responses):
        for rank, (label, score) in enumerate(resp.ranked_labels, start=1):
            rows.append(
                {
                    "query": qi,
                    "rank": rank,
                    "label": label,
                    "score": score,
                    "cscore": resp.cscore,
                    "reliable": resp.reliable,
                }
            )
    _emit(payload, args.format, rows)
    return 0


def _scored_pairs(path: str) -> list[tuple[float, bool]]:
    """Read a scored JSONL file of {cscore, correct} pairs."""
    pairs = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip()]
    except OSError as exc:
        raise CorruptRecord(f"cannot read {path}: {exc}") from exc
    for i, line in enumerate(lines):
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptRecord(f"{path}:{i + 1}: bad JSON: {exc}") from exc
        if not isinstance(row, dict) or "cscore" not in row or "correct" not in row:
            raise CorruptRecord(f"{path}:{i + 1}: need cscore and correct keys")
        pairs.append((float(row["cscore"]), bool(row["correct"])))
    if not pairs:
        raise EmptyManifest(f"{path} holds no scored rows")
    return pairs


def _sniff_scored(path: str) -> bool:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    return "cscore" in json.loads(line)
    except (OSError, json.JSONDecodeError):
        pass
    return False


def _cmd_calibrate(args) -> int:
    engine = _engine_for(args, args.library)
    if _sniff_scored(args.validation_file):
        scored = _scored_pairs(args.validation_file)
    else:
        rows = read_manifest(args.validation_file)
        scored = []
        for row in rows:
            if row.label is None:
                raise CorruptRecord("validation manifest rows must carry labels")
            truth = engine.snapshot.catalog.id_of(row.label)
            report = engine.diagnose_confident(normalize(row.vector), theta=0.0)
            top = report.ranked_labels[0][0]
            scored.append((report.cscore, engine.snapshot.catalog.id_of(top) == truth))
    try:
        result = engine.calibrate(scored)
    except ValueError as exc:
        raise CorruptRecord(str(exc)) from exc
    payload = result.to_json()
    rows = [
        {"theta": p.theta, "sensitivity": p.sensitivity,
         "specificity": p.specificity, "j": p.j}
        for p in result.curve
    ]
    if args.format == "table":
        print(f"theta_star  {result.theta_star:.6g}")
    _emit(payload, args.format, rows)
    return 0


def _cmd_retrieve(args) -> int:
    store = load_case_store(args.store)
    queries = _queries_from(args.query_file)
    results = []
    for q in queries:
        hits = retrieve_cases(store, q, k=args.k)
        results.append(
            {
                "hits": [
                    {
                        "item_id": h.item_id,
                        "score": h.score,
                        "external_ref": h.external_ref,
                        "source_tag": h.source_tag,
                    }
                    for h in hits
                ],
                "generation": store.snapshot.generation,
            }
        )
    payload = results[0] if len(results) == 1 else results
    rows = []
    for qi, result in enumerate(results):
        for rank, hit in enumerate(result["hits"], start=1):
            rows.append({"query": qi, "rank": rank, **hit})
    _emit(payload, args.format, rows)
    return 0


def _cmd_eval(args) -> int:
    engine = _engine_for(args, args.library)
    n_classes = len(engine.snapshot.catalog)
    if args.k:
        ks = tuple(sorted(set(args.k)))
    else:
        ks = tuple(k for k in (1, 3, 5) if k <= n_classes) or (1,)
    try:
        report = engine.evaluate_manifest(args.test_manifest, ks=ks)
    except ValueError as exc:
        raise BadRequest(str(exc)) from exc
    rows = [
        {"k": k, "accuracy": report.top_k_accuracy[k],
         "macro_recall": report.macro_recall[k]}
        for k in ks
    ]
    _emit(report.to_json(), args.format, rows)
    return 0


def _cmd_serve(args) -> int:
    config = load_config(args.config_file)
    run_service(config)
    return 0


def _cmd_harness_run(args) -> int:
    overrides = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                overrides = json.load(fh)
        except OSError as exc:
            raise CorruptRecord(f"cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise CorruptRecord(f"{args.config}: bad JSON: {exc}") from exc
    if args.seed is not None:
        overrides["seed"] = args.seed
    report = run_experiment(args.name, overrides)
    payload = report.to_json()
    print(json.dumps(payload, indent=2))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    if args.csv:
        report.dump_csv(args.csv)
    return 0 if report.passed else 1


def _add_common(parser: argparse.ArgumentParser, with_k: bool = True) -> None:
    parser.add_argument("--config", help="engine config TOML")
    parser.add_argument("--seed", type=int, help="ensemble seed override")
    if with_k:
        parser.add_argument("--k", type=int, help="neighbors per query")
    parser.add_argument("--n", type=int, help="labels in the ranking")
    parser.add_argument("--theta", type=float, help="confidence threshold")
    parser.add_argument(
        "--format", choices=("json", "table"), default="json", help="output format"
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refmatch",
        description="Retrieval-augmented diagnosis over an embedding library.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a library file from a manifest")
    p.add_argument("manifest")
    p.add_argument("out_library")
    _add_common(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("build", help="load a library and verify its index")
    p.add_argument("library")
    _add_common(p)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("diagnose", help="rank labels for query vectors")
    p.add_argument("library")
    p.add_argument("query_file")
    p.add_argument(
        "--confident", action="store_true",
        help="score confidence with the masked ensemble",
    )
    _add_common(p)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("calibrate", help="pick the confidence threshold")
    p.add_argument("library")
    p.add_argument(
        "validation_file",
        help="scored {cscore, correct} JSONL or a labeled manifest",
    )
    _add_common(p)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("retrieve", help="nearest cases from an unlabeled store")
    p.add_argument("store")
    p.add_argument("query_file")
    p.add_argument("--k", type=int, default=10, help="hits per query")
    _add_common(p, with_k=False)
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser("eval", help="top-k accuracy over a labeled manifest")
    p.add_argument("library")
    p.add_argument("test_manifest")
    p.add_argument(
        "--k", type=int, action="append",
        help="accuracy cutoff, repeatable (default 1 3 5)",
    )
    _add_common(p, with_k=False)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("config_file")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("harness", help="synthetic experiments")
    hsub = p.add_subparsers(dest="harness_command", required=True)
    _add_harness_run(hsub)

    return parser


def _add_harness_run(sub) -> None:
    p = sub.add_parser("run", help="run one experiment and print its report")
    p.add_argument("name", choices=EXPERIMENT_NAMES)
    p.add_argument("--config", help="JSON file of config overrides")
    p.add_argument("--seed", type=int, help="experiment seed override")
    p.add_argument("--out", help="write the report JSON here")
    p.add_argument("--csv", help="write the flat CSV here")
    p.set_defaults(func=_cmd_harness_run)


def _dispatch(parser: argparse.ArgumentParser, argv) -> int:
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        sys.stderr.write(json.dumps(exc.to_json()) + "\n")
        return 1


def main(argv=None) -> int:
    return _dispatch(_build_parser(), argv)


def harness_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="harness", description="Synthetic experiment harness."
    )
    sub = parser.add_subparsers(dest="harness_command", required=True)
    _add_harness_run(sub)
    return _dispatch(parser, argv)


if __name__ == "__main__":
    sys.exit(main())
