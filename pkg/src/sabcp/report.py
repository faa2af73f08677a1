"""Turn a run directory into a human report: table, tidy CSV, figures.

Reads the ``summary.csv`` (and, when present, per-step logs) written by the
harness and renders:

    report/table.txt          aligned text table, one row per cell
    report/tidy.csv           asset, target, model, marginal, high_vol, width, winkler
    report/figures/*.png      winkler-by-model bars; gate trajectories from
                              sabcp step logs; winkler-vs-k curves when the
                              run was a k sweep

Figures degrade gracefully: whatever the run directory supports is drawn,
the rest is skipped.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import DataError

TIDY_COLUMNS = ("asset", "target", "model", "marginal", "high_vol", "width", "winkler")


def load_summary(out_dir) -> list[dict]:
    path = Path(out_dir) / "summary.csv"
    if not path.exists():
        raise DataError(f"{out_dir}: no summary.csv (zero completed cells found)")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: summary lists zero cells")
    return rows


def load_step_log(out_dir, cell_id: str) -> dict[str, np.ndarray]:
    path = Path(out_dir) / "steps" / f"{cell_id}.csv"
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header}
        for row in reader:
            for name, val in zip(header, row):
                cols[name].append(float(val))
    return {name: np.asarray(vals) for name, vals in cols.items()}


def render_table(rows: list[dict]) -> str:
    headers = ("asset", "target", "model", "marginal", "high_vol", "width", "winkler")
    body = []
    for r in rows:
        body.append(
            [
                r["asset"],
                r["target"],
                r["model"],
                format(float(r["marginal"]) * 100.0, ".2f"),
                "" if r["high_vol"] == "" else format(float(r["high_vol"]) * 100.0, ".2f"),
                format(float(r["width"]), ".4f"),
                format(float(r["winkler"]), ".4f"),
            ]
        )
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for b in body:
        lines.append("  ".join(v.ljust(w) for v, w in zip(b, widths)))
    return "\n".join(lines) + "\n"


def _fig_winkler_bars(rows, fig_dir) -> list[Path]:
    targets = sorted({r["target"] for r in rows}, key=float, reverse=True)
    assets = sorted({r["asset"] for r in rows})
    models = sorted({r["model"] for r in rows})
    if not assets or not models:
        return []
    fig, axes = plt.subplots(
        1, len(targets), figsize=(4.2 * len(targets), 3.4), squeeze=False, sharey=False
    )
    for ax, target in zip(axes[0], targets):
        sub = [r for r in rows if r["target"] == target]
        x = np.arange(len(assets))
        bar_w = 0.8 / len(models)
        for j, model in enumerate(models):
            vals = []
            for asset in assets:
                match = [r for r in sub if r["asset"] == asset and r["model"] == model]
                vals.append(float(match[0]["winkler"]) if match else np.nan)
            ax.bar(x + (j - (len(models) - 1) / 2) * bar_w, vals, bar_w, label=model)
        ax.set_xticks(x)
        ax.set_xticklabels(assets, rotation=20, ha="right")
        ax.set_title(f"target {target}%")
        ax.set_ylabel("mean winkler score")
    axes[0][-1].legend(fontsize=8)
    fig.tight_layout()
    path = Path(fig_dir) / "winkler_by_model.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def _fig_k_sweep(rows, fig_dir) -> list[Path]:
    # a sweep is recognizable by several k values for one (asset, model, target)
    paths = []
    assets = sorted({r["asset"] for r in rows})
    for asset in assets:
        sub = [r for r in rows if r["asset"] == asset and r["model"] == "sabcp"]
        ks = sorted({float(r["k"]) for r in sub})
        if len(ks) < 2:
            continue
        fig, ax = plt.subplots(figsize=(4.6, 3.4))
        for target in sorted({r["target"] for r in sub}, key=float, reverse=True):
            pts = sorted(
                ((float(r["k"]), float(r["winkler"])) for r in sub if r["target"] == target)
            )
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                    label=f"target {target}%")
        ax.set_xscale("log")
        ax.set_xlabel("gate constant K")
        ax.set_ylabel("mean winkler score")
        ax.set_title(asset)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = Path(fig_dir) / f"winkler_vs_k__{asset}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def _fig_gate_trajectories(out_dir, rows, fig_dir) -> list[Path]:
    paths = []
    steps_dir = Path(out_dir) / "steps"
    for r in rows:
        if r["model"] != "sabcp":
            continue
        cell_id = f"{r['asset']}__sabcp__t{r['target']}"
        if not (steps_dir / f"{cell_id}.csv").exists():
            continue
        log = load_step_log(out_dir, cell_id)
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.0, 4.6), sharex=True)
        ax1.plot(log["t"], log["pi_s"], lw=0.9, color="tab:orange")
        ax1.set_ylabel("spatial proportion")
        ax1.set_ylim(-0.02, 1.02)
        ax2.plot(log["t"], log["width"], lw=0.9, color="tab:blue")
        ax2.set_ylabel("interval width")
        ax2.set_xlabel("step")
        fig.suptitle(f"{r['asset']} target {r['target']}%")
        fig.tight_layout()
        path = Path(fig_dir) / f"gate__{cell_id}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def write_report(out_dir, report_dir=None) -> dict:
    """Aggregate run artifacts; returns the paths written.

    Raises ``DataError`` when the run directory holds no completed cells.
    """
    out_dir = Path(out_dir)
    rows = load_summary(out_dir)
    report_dir = Path(report_dir) if report_dir else out_dir / "report"
    fig_dir = report_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)

    table = render_table(rows)
    (report_dir / "table.txt").write_text(table, encoding="utf-8")
    with (report_dir / "tidy.csv").open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TIDY_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(r[c] for c in TIDY_COLUMNS) + "\n")

    figures = []
    figures += _fig_winkler_bars(rows, fig_dir)
    figures += _fig_k_sweep(rows, fig_dir)
    figures += _fig_gate_trajectories(out_dir, rows, fig_dir)
    return {
        "table": report_dir / "table.txt",
        "tidy": report_dir / "tidy.csv",
        "figures": figures,
        "rows": len(rows),
    }
