"""Default desk-scale run in memory: benchmark table plus importance ranking.

    python scripts/run_desk_benchmark.py [--seed 42] [--learners lda,pda,...]
"""

import argparse
import logging

from fleetpdm.config import RunConfig
from fleetpdm.evalbench import rank_features, run_benchmark
from fleetpdm.features import build_matrix
from fleetpdm.synthgen import generate_fleet


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--learners", default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)

    flat = {"seed": str(args.seed)}
    if args.learners:
        flat["learners"] = args.learners
    cfg = RunConfig.from_flat(flat)
    ds = generate_fleet(cfg.fleet_config())
    matrix = build_matrix(ds, cfg.feature_config())
    print(f"seed {cfg.seed}: {len(ds.failures)} failures, {len(ds.errors)} errors, "
          f"{len(matrix)} feature rows ({int(matrix.y.sum())} positive)")

    bench = run_benchmark(matrix, cfg.learner_specs(), cfg.split_spec(), cfg.get_int("repetitions"))
    print(f"\n{'learner':8s} {'accuracy':>8s} {'recall':>7s} {'rel time':>9s} slices")
    for r in bench.ranked():
        print(f"{r.name:8s} {r.median_accuracy:8.3f} {r.median_recall:7.3f} {r.relative_time:9.1f} "
              f"{r.slices_used}/{len(bench.slices)}")
        for f, msg in sorted(r.failures.items()):
            print(f"         failed on {f:.2f}: {msg}")

    rep = rank_features(matrix, cfg.rf_spec(), cfg.split_spec())
    print("\nimportance, top 10:")
    for f in rep.features[:10]:
        print(f"{f.rank:3d} {f.name:28s} {f.score:.4f}")
    print("group mean rank:", {g: round(v, 2) for g, v in sorted(rep.group_mean_rank().items())})
    print(f"machine_age rank {rep.rank_of('machine_age')}, model_code rank {rep.rank_of('model_code')}")


if __name__ == "__main__":
    main()
