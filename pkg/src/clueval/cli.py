"""Command-line harness.

Subcommands: gen, cluster, evaluate, simulate, suite, pairwise, serve.
Exit codes: 0 success, 1 user error (bad arguments or inputs), 2 internal
error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from dataclasses import replace
from pathlib import Path

from . import __version__
from .data import (
    DataFormatError,
    HardClustering,
    LabelStore,
    load_clustering,
    load_embeddings,
    load_labels,
    save_clustering,
    save_embeddings,
    save_labels,
)
from .datagen import BlobSpec, kmeans, make_blobs
from .metrics import aec, estimate_metric
from .pairwise import PairwiseConfig, run_pairwise_pipeline
from .pipeline import (
    ExperimentConfig,
    GroundTruthAnnotator,
    MethodSpec,
    curve_to_csv,
    run_experiment,
    run_suite,
    suite_to_csv,
)
from .rng import RngState


class UserError(Exception):
    """Invalid invocation or inputs; reported without a traceback."""


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError as exc:
        raise UserError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UserError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise UserError(f"{path}: expected a JSON object")
    return obj


def _cmd_gen(args: argparse.Namespace) -> int:
    spec = BlobSpec(
        n_points=args.n,
        n_clusters=args.clusters,
        dimension=args.dim,
        cluster_std=args.std,
        center_spread=args.spread,
        seed=args.seed,
        with_payloads=args.payloads,
    )
    dataset, truth = make_blobs(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_embeddings(dataset, out / "dataset.jsonl")
    save_labels(LabelStore(truth, {}, spec.n_clusters), out / "truth.jsonl")
    print(f"wrote {dataset.n} points to {out / 'dataset.jsonl'} and labels to {out / 'truth.jsonl'}")
    return 0


def _cmd_cluster(args: argparse.Namespace) -> int:
    dataset = load_embeddings(args.data)
    clustering = kmeans(dataset, args.k, RngState(args.seed), max_iter=args.max_iter, tol=args.tol)
    save_clustering(clustering, args.out)
    print(f"wrote k={args.k} clustering of {dataset.n} points to {args.out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    dataset = load_embeddings(args.data) if args.data else None
    clustering = load_clustering(args.clustering, dataset)
    store = load_labels(args.labels, dataset, k_ref=args.k_ref)
    value = estimate_metric(args.metric, clustering, store)
    print(f"{value:.10f}")
    return 0


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    raw = _load_json(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "budget": args.budget,
        "acquisition": args.acquisition,
        "metric": args.metric,
        "surrogate": args.surrogate,
        "estimator": args.estimator,
        "seed_size": args.seed_size,
        "queries_per_round": args.queries_per_round,
        "k_ref": args.k_ref,
    }
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if args.pseudo_label is not None:
        raw["pseudo_label"] = args.pseudo_label
    try:
        return ExperimentConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise UserError(f"bad experiment config: {exc}") from exc


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    dataset = load_embeddings(args.data)
    clustering = load_clustering(args.clustering, dataset)
    truth_store = load_labels(args.truth, dataset, k_ref=cfg.k_ref)
    truth = truth_store.merged()
    missing = [i for i in dataset.ids if i not in truth]
    if missing:
        raise UserError(f"truth labels missing {len(missing)} id(s), e.g. {missing[0]!r}")
    result = run_experiment(dataset, clustering, GroundTruthAnnotator(truth), cfg, truth=truth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curve_to_csv(result.curve, out / "curve.csv")
    with open(out / "audit.jsonl", "w", encoding="utf-8") as fh:
        for entry in result.audit:
            fh.write(json.dumps(entry) + "\n")
    summary = {
        "final_estimate": result.final_estimate,
        "true_value": result.curve.true_value,
        "aec": aec(result.curve),
        "labels_used": result.curve.points[-1][0],
        "config": cfg.to_dict(),
    }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(f"final estimate {result.final_estimate:.6f} (true {result.curve.true_value:.6f}) -> {out}")
    return 0


def _cmd_suite(args: argparse.Namespace) -> int:
    raw = _load_json(args.config)
    for key in ("data", "truth", "clusterings", "methods"):
        if key not in raw:
            raise UserError(f"suite config missing {key!r}")
    base_raw = raw.get("experiment", {})
    try:
        base_cfg = ExperimentConfig.from_dict(base_raw)
        methods = [MethodSpec(**m) for m in raw["methods"]]
    except (TypeError, ValueError) as exc:
        raise UserError(f"bad suite config: {exc}") from exc
    seeds = raw.get("seeds", [0])
    dataset = load_embeddings(raw["data"])
    truth = load_labels(raw["truth"], dataset, k_ref=base_cfg.k_ref).merged()
    tests = [load_clustering(p, dataset) for p in raw["clusterings"]]
    progress = (lambda msg: print(msg, flush=True)) if args.verbose else None
    rows = run_suite(dataset, tests, methods, seeds, truth, base_cfg, progress=progress)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    suite_to_csv(rows, out / "aec.csv")
    for row in rows:
        print(f"{row.method}: mean_aec={row.mean_aec:.4f} std_err={row.std_err:.4f} runs={row.runs}")
    return 0


def _cmd_pairwise(args: argparse.Namespace) -> int:
    raw = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.k_ref is not None:
        raw["k_ref"] = args.k_ref
    try:
        from .surrogate import TrainConfig

        if "train" in raw and isinstance(raw["train"], dict):
            raw["train"] = TrainConfig(**raw["train"])
        cfg = PairwiseConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise UserError(f"bad pairwise config: {exc}") from exc
    dataset = load_embeddings(args.data)
    clustering = load_clustering(args.clustering, dataset)
    truth = load_labels(args.truth, dataset, k_ref=cfg.k_ref).merged()
    result = run_pairwise_pipeline(dataset, clustering, GroundTruthAnnotator(truth), cfg, truth=truth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curve_to_csv(result.curve, out / "curve.csv")
    last = result.curve.points[-1]
    print(f"final estimate {last[1]:.6f} after {last[0]} pair annotations -> {out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.state_dir), frontend_dir=Path(args.frontend) if args.frontend else None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clueval", description=__doc__)
    parser.add_argument("--version", action="version", version=f"clueval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a Gaussian blob dataset with reference labels")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--std", type=float, default=1.0)
    p.add_argument("--spread", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--payloads", action="store_true", help="attach text payloads for annotation UIs")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("cluster", help="k-means cluster an embeddings file")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True, help="output clustering file")
    p.set_defaults(fn=_cmd_cluster)

    p = sub.add_parser("evaluate", help="exact metric between a clustering and a label file")
    p.add_argument("--metric", choices=("nmi", "ami", "ari"), default="nmi")
    p.add_argument("--clustering", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--data", help="optional embeddings file for id validation")
    p.add_argument("--k-ref", type=int, help="reference label-space width (default: inferred)")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("simulate", help="run the active-evaluation loop with a simulated annotator")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--data", required=True)
    p.add_argument("--clustering", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--seed-size", dest="seed_size", type=int)
    p.add_argument("--queries-per-round", dest="queries_per_round", type=int)
    p.add_argument("--acquisition")
    p.add_argument("--metric")
    p.add_argument("--surrogate")
    p.add_argument("--estimator")
    p.add_argument("--k-ref", dest="k_ref", type=int)
    p.add_argument("--pseudo-label", dest="pseudo_label", action="store_true", default=None)
    p.add_argument("--no-pseudo-label", dest="pseudo_label", action="store_false")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("suite", help="run a benchmark grid and aggregate AEC per method")
    p.add_argument("--config", required=True, help="JSON suite config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=_cmd_suite)

    p = sub.add_parser("pairwise", help="run the same-cluster pair-annotation pipeline")
    p.add_argument("--config", help="JSON pairwise config")
    p.add_argument("--data", required=True)
    p.add_argument("--clustering", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--k-ref", dest="k_ref", type=int)
    p.set_defaults(fn=_cmd_pairwise)

    p = sub.add_parser("serve", help="serve annotation sessions over HTTP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--state-dir", required=True, help="directory for persisted sessions")
    p.add_argument("--frontend", help="optional directory of static UI files to serve at /")
    p.set_defaults(fn=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; that is a user error here.
        return 0 if exc.code in (0, None) else 1
    try:
        return args.fn(args)
    except (UserError, DataFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
