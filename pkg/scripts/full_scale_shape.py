"""Generate the full-scale fleet (100 machines x 8761 hours) and report its shape.

    python scripts/full_scale_shape.py [--seed 42] [--out DIR]
"""

import argparse
import time

from fleetpdm.synthgen import FleetConfig, empirical_rates, generate_fleet, write_fleet


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", help="also write the five CSVs here")
    args = ap.parse_args()

    cfg = FleetConfig(n_machines=100, horizon_hours=8761, seed=args.seed)
    t0 = time.perf_counter()
    ds = generate_fleet(cfg)
    print(f"generated in {time.perf_counter() - t0:.1f}s")
    for kind, n in ds.row_counts().items():
        print(f"{kind:12s} {n:>9d}")
    rows = len(ds.telemetry)
    rates = empirical_rates(ds)
    print(f"telemetry rows vs 876,101: {100 * (rows - 876_101) / 876_101:+.4f}%")
    print(f"failure rate {rates['failure_rate']:.6f} (target 1/4000 = {1 / 4000:.6f})")
    print(f"error rate   {rates['error_rate']:.6f} (ceiling 1/500 = {1 / 500:.6f})")
    if args.out:
        write_fleet(ds, args.out, config=cfg, overwrite=True)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
