"""Event rates, benchmark accuracy and importance ordering across seeds.

    python scripts/seed_sweep.py [--seeds 0-9] [--no-bench]
"""

import argparse
import logging
import math
import warnings

import numpy as np

from fleetpdm.config import RunConfig
from fleetpdm.evalbench import rank_features, run_benchmark
from fleetpdm.features import build_matrix
from fleetpdm.synthgen import generate_fleet


def parse_seeds(text):
    if "-" in text:
        a, b = text.split("-")
        return list(range(int(a), int(b) + 1))
    return [int(s) for s in text.split(",")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0-9")
    ap.add_argument("--no-bench", action="store_true", help="rates only")
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)
    warnings.simplefilter("ignore")

    rates = []
    for seed in parse_seeds(args.seeds):
        cfg = RunConfig.from_flat({"seed": str(seed), "repetitions": "1"})
        ds = generate_fleet(cfg.fleet_config())
        rate = len(ds.errors) / len(ds.telemetry)
        rates.append(rate)
        line = f"seed {seed:3d}: failures {len(ds.failures):2d}, error rate {rate:.5f}"
        if not args.no_bench:
            matrix = build_matrix(ds, cfg.feature_config())
            try:
                bench = run_benchmark(matrix, cfg.learner_specs(), cfg.split_spec(), 1)
            except ValueError as exc:
                print(line + f", bench skipped: {exc}")
                continue
            used = sum(not s.degenerate for s in bench.slices)
            accs = " ".join(f"{r.name} {r.median_accuracy:.2f}" for r in bench.ranked()
                            if not math.isnan(r.median_accuracy))
            line += f", slices {used}/3, {accs}"
            try:
                rep = rank_features(matrix, cfg.rf_spec(), cfg.split_spec())
                g = rep.group_mean_rank()
                line += (f", top {rep.features[0].name}, age {rep.rank_of('machine_age')}, "
                         f"model {rep.rank_of('model_code')}, error group {g['error-counts']:.1f}")
            except ValueError as exc:
                line += f", importance skipped: {exc}"
        print(line)
    print(f"mean error rate {np.mean(rates):.5f} over {len(rates)} seeds "
          f"(band 1/2000..1/500 = {1 / 2000:.5f}..{1 / 500:.5f})")


if __name__ == "__main__":
    main()
