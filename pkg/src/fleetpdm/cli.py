"""Command-line entry point: ``fleetpdm generate|featurize|bench|importance|pipeline``.

Every command writes a run manifest (command, config snapshot, seed, paths,
row counts, wall clock, SHA-256 of each emitted file).  On failure a single
line ``fleetpdm: error: <Kind>: <message>`` goes to stderr and the exit status
is nonzero.

``FLEETPDM_THREADS`` caps BLAS worker threads; it only takes effect when set
before numpy is first imported, which ``main`` arranges.  Timed sections run
on one worker regardless.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
EXIT_FAILURE = 1
EXIT_USAGE = 2


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def apply_thread_cap(env=os.environ) -> int | None:
    raw = env.get("FLEETPDM_THREADS")
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"FLEETPDM_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise CliError(f"FLEETPDM_THREADS must be a positive integer, got {raw!r}")
    for var in THREAD_VARS:
        env[var] = str(n)
    return n


def _add_common(p: argparse.ArgumentParser, out_help: str):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", required=True, help=out_help)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")


def _add_input(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--features", help="feature CSV written by featurize")
    src.add_argument("--data", help="directory with the five raw CSVs")
    p.add_argument("--strict-ingest", action=argparse.BooleanOptionalAction, default=None,
                   help="abort on the first malformed raw CSV line")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fleetpdm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic fleet as five CSVs")
    _add_common(g, "output directory")
    g.add_argument("--overwrite", action="store_true", help="replace existing files")

    f = sub.add_parser("featurize", help="build the 27-feature matrix from raw CSVs")
    _add_common(f, "output feature CSV")
    f.add_argument("--data", required=True, help="directory with the five raw CSVs")
    f.add_argument("--strict-ingest", action=argparse.BooleanOptionalAction, default=None,
                   help="abort on the first malformed raw CSV line")

    b = sub.add_parser("bench", help="time-sliced benchmark of the learner families")
    _add_common(b, "output directory")
    _add_input(b)
    b.add_argument("--learners", help="comma-separated learner families")

    i = sub.add_parser("importance", help="random-forest feature importance ranking")
    _add_common(i, "output directory")
    _add_input(i)

    p = sub.add_parser("pipeline", help="generate, featurize, bench and importance in one go")
    _add_common(p, "output directory")
    p.add_argument("--learners", help="comma-separated learner families")
    p.add_argument("--overwrite", action="store_true", help="replace existing files")

    sub.add_parser("defaults", help="print the config key table")
    return parser


def resolve_config(args):
    from fleetpdm.config import ConfigError, load_config

    overrides: dict[str, str] = {}
    for item in getattr(args, "set", []):
        k, sep, v = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[k.strip()] = v.strip()
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    if getattr(args, "learners", None) is not None:
        overrides["learners"] = args.learners
    if getattr(args, "strict_ingest", None) is not None:
        overrides["strict_ingest"] = "true" if args.strict_ingest else "false"
    return load_config(args.config, overrides)


def write_run_manifest(path: Path, command: str, cfg, inputs, outputs, counts, wall: float,
                       threads) -> Path:
    from fleetpdm.synthgen import file_sha256

    lines = [
        f"command={command}",
        f"seed={cfg.seed}",
        f"threads={threads if threads is not None else 'default'}",
        f"wall_seconds={wall:.3f}",
    ]
    lines += [f"input.{k}={v}" for k, v in inputs.items()]
    lines += [f"rows.{k}={v}" for k, v in counts.items()]
    lines += [f"config.{k}={v}" for k, v in cfg.as_dict().items()]
    for p in outputs:
        p = Path(p)
        lines.append(f"output.{p.name}={p}")
        lines.append(f"sha256.{p.name}={file_sha256(p)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# -- commands -------------------------------------------------------------------


def cmd_generate(cfg, out_dir, overwrite=False):
    from fleetpdm.ingest import FILENAMES, KINDS
    from fleetpdm.synthgen import generate_fleet, write_fleet

    out = Path(out_dir)
    fleet_cfg = cfg.fleet_config()
    ds = generate_fleet(fleet_cfg)
    write_fleet(ds, out, config=fleet_cfg, overwrite=overwrite)
    files = [out / FILENAMES[k] for k in KINDS] + [out / "manifest.txt"]
    return files, ds.row_counts()


def _load_dataset(cfg, data_dir):
    from fleetpdm.ingest import load_fleet

    return load_fleet(data_dir, strict=cfg.get_bool("strict_ingest"),
                      n_components=cfg.get_int("n_components"),
                      n_error_types=cfg.get_int("n_error_types"))


def cmd_featurize(cfg, data_dir, out_file):
    from fleetpdm.features import build_matrix, write_matrix

    matrix = build_matrix(_load_dataset(cfg, data_dir), cfg.feature_config())
    out = Path(out_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_matrix(matrix, out)
    counts = {"features": len(matrix), "positives": int(matrix.y.sum())}
    return [out], counts


def _load_matrix(cfg, features=None, data=None):
    from fleetpdm.features import build_matrix, read_matrix

    if features is not None:
        return read_matrix(features)
    return build_matrix(_load_dataset(cfg, data), cfg.feature_config())


def cmd_bench(cfg, out_dir, features=None, data=None):
    from fleetpdm.evalbench import run_benchmark
    from fleetpdm.report import write_bench

    matrix = _load_matrix(cfg, features, data)
    result = run_benchmark(matrix, cfg.learner_specs(), cfg.split_spec(), cfg.get_int("repetitions"))
    files = write_bench(result, out_dir)
    return files, {"features": len(matrix)}, result


def cmd_importance(cfg, out_dir, features=None, data=None):
    from fleetpdm.evalbench import rank_features
    from fleetpdm.report import write_importance

    matrix = _load_matrix(cfg, features, data)
    report = rank_features(matrix, cfg.rf_spec(), cfg.split_spec())
    files = write_importance(report, out_dir)
    return files, {"features": len(matrix), "train": report.n_train}, report


def cmd_pipeline(cfg, out_dir, overwrite=False):
    out = Path(out_dir)
    files, counts = cmd_generate(cfg, out / "data", overwrite)
    f2, c2 = cmd_featurize(cfg, out / "data", out / "features.csv")
    f3, _, _ = cmd_bench(cfg, out / "bench", features=out / "features.csv")
    f4, c4, _ = cmd_importance(cfg, out / "importance", features=out / "features.csv")
    return files + f2 + f3 + f4, {**counts, **c2, "importance_train": c4["train"]}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "defaults":
        from fleetpdm.config import describe_defaults

        print(describe_defaults())
        return 0
    logging.basicConfig(format="fleetpdm: %(levelname)s: %(message)s", level=logging.WARNING)
    threads = apply_thread_cap()
    cfg = resolve_config(args)
    t0 = time.perf_counter()
    inputs: dict[str, str] = {}
    out = Path(args.out)
    if args.command == "generate":
        files, counts = cmd_generate(cfg, out, args.overwrite)
        manifest = out / "run_manifest.txt"
    elif args.command == "featurize":
        inputs["data"] = args.data
        files, counts = cmd_featurize(cfg, args.data, out)
        manifest = out.with_name(out.name + ".manifest.txt")
    elif args.command == "bench":
        inputs = {"features": args.features} if args.features else {"data": args.data}
        files, counts, result = cmd_bench(cfg, out, args.features, args.data)
        for r in result.ranked():
            print(f"{r.name}\taccuracy={r.median_accuracy:.3f}\trecall={r.median_recall:.3f}"
                  f"\trelative_time={r.relative_time:.1f}")
        manifest = out / "run_manifest.txt"
    elif args.command == "importance":
        inputs = {"features": args.features} if args.features else {"data": args.data}
        files, counts, report = cmd_importance(cfg, out, args.features, args.data)
        for f in report.features[:5]:
            print(f"{f.rank}\t{f.name}\t{f.score:.4f}")
        manifest = out / "run_manifest.txt"
    else:
        files, counts = cmd_pipeline(cfg, out, args.overwrite)
        manifest = out / "run_manifest.txt"
    manifest.parent.mkdir(parents=True, exist_ok=True)
    write_run_manifest(manifest, args.command, cfg, inputs, files, counts,
                       time.perf_counter() - t0, threads)
    print(f"wrote {len(files)} files; manifest {manifest}")
    return 0


def _one_line(exc: BaseException) -> str:
    msg = " ".join(str(exc).split()) or type(exc).__name__
    return f"fleetpdm: error: {type(exc).__name__}: {msg}"


def main(argv=None) -> int:
    try:
        return run(argv)
    except CliError as exc:
        print(_one_line(exc), file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("fleetpdm: error: KeyboardInterrupt: interrupted", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as exc:  # every failure becomes one parseable line
        print(_one_line(exc), file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
