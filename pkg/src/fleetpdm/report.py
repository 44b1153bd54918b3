"""CSV, markdown and SVG renderings of benchmark and importance results.

Numbers are printed with fixed formats and SVG geometry is computed from
the data alone, so the same result always renders to the same bytes.
Timing columns (``median_seconds``, ``relative_time``, ``seconds``) are the
only fields that vary between otherwise identical runs.
"""

from __future__ import annotations

import csv
import io
import math
from html import escape
from pathlib import Path

from fleetpdm.evalbench import BenchResult, ImportanceReport

BENCH_COLUMNS = (
    "rank", "learner", "family", "median_accuracy", "median_recall", "median_precision",
    "median_f1", "median_seconds", "relative_time", "slices_used", "slices_failed", "balance_test",
)
SLICE_COLUMNS = (
    "learner", "fraction", "n_train", "n_test", "tn", "fp", "fn", "tp",
    "accuracy", "recall", "precision", "f1", "seconds", "error",
)
IMPORTANCE_COLUMNS = ("rank", "feature", "group", "score", "raw_score")
TIMING_COLUMNS = frozenset({"median_seconds", "relative_time", "seconds"})

WIDTH, HEIGHT = 800, 600
GROUP_COLORS = {
    "error-counts": "#c0392b",
    "sensor-stats": "#2e86c1",
    "replacement-ages": "#7d8c2a",
    "metadata": "#7f7f7f",
    "other": "#444444",
}


def fmt(x, digits: int = 6) -> str:
    """Fixed-point number, or ``nan`` for an undefined value."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.{digits}f}"


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


# -- benchmark ------------------------------------------------------------------


def bench_rows(result: BenchResult) -> list[list[str]]:
    rows = []
    for i, r in enumerate(result.ranked(), 1):
        rows.append([
            str(i), r.name, r.spec.family, fmt(r.median_accuracy), fmt(r.median_recall),
            fmt(r.median_precision), fmt(r.median_f1), fmt(r.median_seconds), fmt(r.relative_time, 3),
            str(r.slices_used), str(len(r.failures)), "true" if result.balance_test else "false",
        ])
    return rows


def bench_csv(result: BenchResult) -> str:
    return _csv_text(BENCH_COLUMNS, bench_rows(result))


def bench_slices_csv(result: BenchResult) -> str:
    """Per-slice confusion counts; a failed learner row carries the error text."""
    info = {s.fraction: s for s in result.slices}
    rows = []
    for r in result.ranked():
        for s in result.slices:
            if s.degenerate:
                continue
            f = s.fraction
            base = [r.name, f"{f:.2f}", str(info[f].n_train), str(info[f].n_test)]
            if f in r.slice_metrics:
                m = r.slice_metrics[f]
                rows.append(base + [str(m.tn), str(m.fp), str(m.fn), str(m.tp), fmt(m.accuracy),
                                    fmt(m.recall), fmt(m.precision), fmt(m.f1),
                                    fmt(r.slice_seconds[f]), ""])
            else:
                rows.append(base + [""] * 8 + ["", r.failures.get(f, "")])
    return _csv_text(SLICE_COLUMNS, rows)


def _md_table(columns, rows) -> str:
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    lines += ["| " + " | ".join(c.replace("|", "\\|") for c in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def bench_markdown(result: BenchResult) -> str:
    cols = ("rank", "learner", "median accuracy", "median recall", "median F1", "relative time", "slices")
    rows = []
    for row, r in zip(bench_rows(result), result.ranked()):
        rows.append([row[0], row[1], fmt(r.median_accuracy, 3), fmt(r.median_recall, 3),
                     fmt(r.median_f1, 3), fmt(r.relative_time, 1), row[9]])
    used = [s for s in result.slices if not s.degenerate]
    head = [
        "# Learner comparison: median accuracy and relative execution time",
        "",
        f"Test side balanced: {'yes' if result.balance_test else 'no'}. "
        f"Slices used: {', '.join(f'{s.fraction:.2f}' for s in used) or 'none'}.",
        "",
    ]
    notes = []
    for r in result.ranked():
        for f, msg in sorted(r.failures.items()):
            notes.append(f"- {r.name} failed on slice {f:.2f}: {msg}")
    tail = ["", "Failures:", *notes, ""] if notes else []
    return "\n".join(head) + "\n" + _md_table(cols, rows) + "\n".join(tail)


def _svg(body: list[str], title: str) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.2f}" y="30.00" font-size="18" text-anchor="middle">{escape(title)}</text>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _axis(x0, x1, y, lo, hi, ticks, label):
    out = [f'<line x1="{x0:.2f}" y1="{y:.2f}" x2="{x1:.2f}" y2="{y:.2f}" stroke="#000000"/>']
    for k in range(ticks + 1):
        v = lo + (hi - lo) * k / ticks
        x = x0 + (x1 - x0) * k / ticks
        out.append(f'<line x1="{x:.2f}" y1="{y:.2f}" x2="{x:.2f}" y2="{y + 5:.2f}" stroke="#000000"/>')
        out.append(f'<text x="{x:.2f}" y="{y + 18:.2f}" font-size="11" text-anchor="middle">{v:.2g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{y + 36:.2f}" font-size="12" '
               f'text-anchor="middle">{escape(label)}</text>')
    return out


def bench_svg(result: BenchResult) -> str:
    """Horizontal bars of median accuracy, best first, annotated with relative time."""
    ranked = result.ranked()
    x0, x1, top, bottom = 140.0, 680.0, 60.0, 530.0
    slot = (bottom - top) / max(len(ranked), 1)
    bar = min(slot * 0.7, 40.0)
    body = []
    for i, r in enumerate(ranked):
        acc = r.median_accuracy
        y = top + i * slot + (slot - bar) / 2
        w = 0.0 if math.isnan(acc) else (x1 - x0) * max(0.0, min(acc, 1.0))
        body.append(f'<text x="{x0 - 8:.2f}" y="{y + bar / 2 + 4:.2f}" font-size="13" '
                    f'text-anchor="end">{escape(r.name)}</text>')
        body.append(f'<rect x="{x0:.2f}" y="{y:.2f}" width="{w:.2f}" height="{bar:.2f}" fill="#2e86c1"/>')
        note = "failed" if math.isnan(acc) else f"acc {acc:.3f}, {fmt(r.relative_time, 1)}x time"
        body.append(f'<text x="{x0 + w + 6:.2f}" y="{y + bar / 2 + 4:.2f}" font-size="11">{escape(note)}</text>')
    body += _axis(x0, x1, bottom + 5, 0.0, 1.0, 5, "median accuracy")
    return _svg(body, "Algorithm comparison: accuracy and relative execution time")


# -- importance -----------------------------------------------------------------


def importance_rows(report: ImportanceReport) -> list[list[str]]:
    return [[str(f.rank), f.name, f.group, fmt(f.score), fmt(f.raw)] for f in report.features]


def importance_csv(report: ImportanceReport) -> str:
    return _csv_text(IMPORTANCE_COLUMNS, importance_rows(report))


def importance_markdown(report: ImportanceReport) -> str:
    head = [
        "# Rank order of feature importance",
        "",
        f"Random-forest OOB permutation importance on the balanced train slice at "
        f"fraction {report.fraction:.2f} ({report.n_train} rows).",
        "",
    ]
    groups = report.group_mean_rank()
    tail = ["", "Group mean rank:", ""]
    tail += [f"- {g}: {groups[g]:.2f}" for g in sorted(groups, key=lambda g: (groups[g], g))]
    return "\n".join(head) + "\n" + _md_table(IMPORTANCE_COLUMNS, importance_rows(report)) + "\n".join(tail) + "\n"


def importance_svg(report: ImportanceReport) -> str:
    """One horizontal bar per feature in rank order, colored by group."""
    feats = report.features
    x0, x1, top, bottom = 210.0, 740.0, 50.0, 520.0
    slot = (bottom - top) / max(len(feats), 1)
    bar = slot * 0.75
    hi = max([f.score for f in feats] + [1e-12])
    body = []
    for i, f in enumerate(feats):
        y = top + i * slot + (slot - bar) / 2
        w = (x1 - x0) * f.score / hi
        color = GROUP_COLORS.get(f.group, GROUP_COLORS["other"])
        body.append(f'<text x="{x0 - 6:.2f}" y="{y + bar / 2 + 4:.2f}" font-size="10" '
                    f'text-anchor="end">{f.rank}. {escape(f.name)}</text>')
        body.append(f'<rect x="{x0:.2f}" y="{y:.2f}" width="{w:.2f}" height="{bar:.2f}" fill="{color}"/>')
    body += _axis(x0, x1, bottom + 5, 0.0, hi, 4, "OOB accuracy drop")
    lx = 220.0
    for g in ("error-counts", "sensor-stats", "replacement-ages", "metadata"):
        body.append(f'<rect x="{lx:.2f}" y="575.00" width="12.00" height="12.00" fill="{GROUP_COLORS[g]}"/>')
        body.append(f'<text x="{lx + 16:.2f}" y="585.00" font-size="11">{g}</text>')
        lx += 130.0
    return _svg(body, "Rank order of input variable importance")


# -- files ----------------------------------------------------------------------


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def write_bench(result: BenchResult, out_dir: str | Path) -> list[Path]:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return [
        _write(d / "bench.csv", bench_csv(result)),
        _write(d / "bench_slices.csv", bench_slices_csv(result)),
        _write(d / "bench.md", bench_markdown(result)),
        _write(d / "bench.svg", bench_svg(result)),
    ]


def write_importance(report: ImportanceReport, out_dir: str | Path) -> list[Path]:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return [
        _write(d / "importance.csv", importance_csv(report)),
        _write(d / "importance.md", importance_markdown(report)),
        _write(d / "importance.svg", importance_svg(report)),
    ]


def mask_timing(text: str, kind: str) -> str:
    """Blank the wall-clock fields of a rendered bench artifact.

    ``kind`` is ``csv``, ``md`` or ``svg``.  Everything else is left intact,
    so masked artifacts from two identical runs must match byte for byte.
    """
    import re

    if kind == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            return text
        idx = [i for i, c in enumerate(rows[0]) if c in TIMING_COLUMNS]
        for row in rows[1:]:
            for i in idx:
                if i < len(row) and row[i]:
                    row[i] = "*"
        return _csv_text(rows[0], rows[1:])
    if kind == "md":
        out = []
        for line in text.splitlines(keepends=True):
            if line.startswith("| ") and not line.startswith("| rank"):
                cells = line.rstrip("\n").split(" | ")
                if len(cells) >= 7:
                    cells[5] = "*"
                line = " | ".join(cells) + "\n"
            out.append(line)
        return "".join(out)
    if kind == "svg":
        return re.sub(r", (?:[0-9.]+|nan)x time", ", *x time", text)
    raise ValueError(f"unknown artifact kind {kind!r}")
