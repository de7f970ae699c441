"""Summary table and figures from an experiment bundle."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import atomic_write  # noqa: E402

SUMMARY_COLUMNS = ("variant", "kind", "label", "z", "gap_pct", "GR", "VSD", "time", "TR")


def _num(s: str) -> float:
    try:
        return float(s)
    except (TypeError, ValueError):
        return math.nan


def read_bundle(run_dir: str | Path) -> list[dict]:
    run_dir = Path(run_dir)
    with open(run_dir / "results.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    times = {}
    tpath = run_dir / "timings.csv"
    if tpath.exists():
        with open(tpath, newline="") as fh:
            for t in csv.DictReader(fh):
                times[(t["variant"], t["kind"], t["label"])] = t
    for r in rows:
        t = times.get((r["variant"], r["kind"], r["label"]), {})
        r["time"] = t.get("time", "")
        r["TR"] = t.get("TR", "")
    return rows


def summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        g = _num(r["gap"])
        w.writerow([r["variant"], r["kind"], r["label"], r["z"],
                    "" if math.isnan(g) else f"{100 * g:.2f}", r["GR"], r["VSD"], r["time"], r["TR"]])
    return buf.getvalue()


def _costs_figure(rows, path: Path) -> None:
    variants = list(dict.fromkeys(r["variant"] for r in rows))
    labels = list(dict.fromkeys(r["label"] for r in rows if r["kind"] in ("method", "bound")))
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(labels) * len(variants)), 4))
    width = 0.8 / max(1, len(variants))
    for k, v in enumerate(variants):
        vals = {r["label"]: _num(r["z"]) for r in rows if r["variant"] == v}
        ys = [vals.get(lb, math.nan) for lb in labels]
        ax.bar([i + k * width for i in range(len(labels))], ys, width, label=v)
    ax.set_xticks([i + width * (len(variants) - 1) / 2 for i in range(len(labels))])
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("cost (EUR)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _gaps_figure(rows, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for v in dict.fromkeys(r["variant"] for r in rows):
        pts = [(r["label"], 100 * _num(r["gap"])) for r in rows
               if r["variant"] == v and not math.isnan(_num(r["gap"]))]
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=v)
    ax.axhline(0.0, color="grey", lw=0.8)
    ax.set_ylabel("gap to monolithic optimum (%)")
    ax.tick_params(axis="x", rotation=30, labelsize=8)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Write ``summary.csv``, ``costs.png`` and ``gaps.png``; return their paths."""
    out = Path(out_dir or run_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = read_bundle(run_dir)
    atomic_write(out / "summary.csv", summary_csv(rows))
    _costs_figure(rows, out / "costs.png")
    _gaps_figure(rows, out / "gaps.png")
    return [out / "summary.csv", out / "costs.png", out / "gaps.png"]
