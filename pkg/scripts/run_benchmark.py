#!/usr/bin/env python3
"""Run the packaged blob benchmark and report mean AEC per method.

The benchmark evaluates how cheaply each method tracks the true NMI of three
k-means clusterings (k in {6, 8, 10}) of a 2000-point, 8-cluster Gaussian
blob dataset: seed batch 50, 50 queries per round, budget 500, seeds paired
across methods.  The default methods are the random labeled-only baseline and
the combined method (random acquisition + semi-supervised surrogate + pseudo-
label imputation); --all-methods adds the informative-acquisition variants.
"""

import argparse
import math
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from clueval.datagen import BlobSpec, kmeans, make_blobs
from clueval.metrics import build_contingency, nmi
from clueval.pipeline import ExperimentConfig, MethodSpec, run_suite, suite_to_csv
from clueval.rng import RngState
from clueval.semisup import FixMatchConfig

BLOBS = BlobSpec(n_points=2000, n_clusters=8, dimension=16,
                 cluster_std=2.0, center_spread=10.0, seed=11)
KMEANS_SEEDS = {6: 1013, 8: 3031, 10: 3126}

BASELINE = MethodSpec("random_labeled_only")
COMBINED = MethodSpec("random_fixmatch_pseudo", acquisition="random",
                      surrogate="fixmatch", estimator="imputed", pseudo_label=True)
EXTRA = [
    MethodSpec(f"{acq}_fixmatch_pseudo", acquisition=acq, surrogate="fixmatch",
               estimator="imputed", pseudo_label=True)
    for acq in ("max_entropy", "bald", "cross_entropy", "soft_nmi")
]


def parse_args(argv):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5, help="number of paired seeds (default 5)")
    parser.add_argument("--budget", type=int, default=500)
    parser.add_argument("--all-methods", action="store_true",
                        help="also run informative-acquisition variants of the combined method")
    parser.add_argument("--quick", action="store_true",
                        help="smoke-test scale: 400 points, budget 200, light training")
    parser.add_argument("--out", default="benchmark_out", help="output directory for aec.csv")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    t0 = time.monotonic()
    if args.quick:
        print("quick mode: smoke-tests the plumbing only; the dataset is too small "
              "for the surrogate to train well, so AEC ordering is not meaningful")
        spec = BlobSpec(n_points=400, n_clusters=8, dimension=16,
                        cluster_std=2.0, center_spread=10.0, seed=11)
        budget = min(args.budget, 200)
        fixmatch = FixMatchConfig(epochs=32, labeled_batch=16)
    else:
        spec = BLOBS
        budget = args.budget
        fixmatch = FixMatchConfig(epochs=128, labeled_batch=16)

    dataset, truth = make_blobs(spec)
    tests = []
    for k, seed in KMEANS_SEEDS.items():
        cl = kmeans(dataset, k, RngState(seed))
        tv = nmi(build_contingency(cl, truth, spec.n_clusters))
        print(f"k={k} (k-means seed {seed}): true NMI {tv:.4f}")
        tests.append(cl)

    base_cfg = ExperimentConfig(
        k_ref=spec.n_clusters, metric="nmi", seed_size=50, queries_per_round=50,
        budget=budget, hidden_dim=128, hidden_layers=4, dropout_rate=0.1,
        fixmatch=fixmatch,
    )
    methods = [BASELINE, COMBINED] + (EXTRA if args.all_methods else [])
    rows = run_suite(dataset, tests, methods, list(range(args.seeds)), truth, base_cfg,
                     progress=lambda msg: print(msg, flush=True))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    suite_to_csv(rows, out / "aec.csv")

    print(f"\n{'method':<28} {'mean AEC':>9} {'std err':>8} {'runs':>5}")
    for row in rows:
        print(f"{row.method:<28} {row.mean_aec:>9.4f} {row.std_err:>8.4f} {row.runs:>5}")
    baseline = rows[0]
    for row in rows[1:]:
        margin = baseline.mean_aec - row.mean_aec
        pooled = math.sqrt(baseline.std_err**2 + row.std_err**2)
        verdict = "beats" if margin > pooled else "does not clearly beat"
        print(f"{row.method} {verdict} {baseline.method}: "
              f"margin {margin:+.4f}, pooled std err {pooled:.4f}")
    print(f"\nwrote {out / 'aec.csv'} in {time.monotonic() - t0:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
