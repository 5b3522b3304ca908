"""Result persistence: per-round CSV, JSON metadata sidecar, and figures.

CSV files use '.' decimals, UTF-8, and LF line endings, and are
byte-identical across reruns of the same config and master seed. Figures
are rendered headlessly next to the delimited output.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

from .harness import RunSummary


def _fmt(value: float) -> str:
    # repr of a float is its shortest round-trip form; ints stay bare.
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def run_csv_rows(summary: RunSummary) -> tuple[list[str], list[list[str]]]:
    """Header and rows of the per-round CSV for one run."""
    header = ["round", "mean_spread", "mean_regret", "cum_regret"]
    n_members = 0
    if summary.member_probs_mean is not None:
        n_members = summary.member_probs_mean.shape[1]
        header += [f"member_prob_{i}" for i in range(n_members)]
    rows = []
    for t in range(summary.rounds):
        row = [str(t + 1), _fmt(summary.mean_spread[t]),
               _fmt(summary.mean_regret[t]), _fmt(summary.cum_regret[t])]
        if n_members:
            row += [_fmt(summary.member_probs_mean[t, i]) for i in range(n_members)]
        rows.append(row)
    return header, rows


def write_run_csv(summary: RunSummary, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header, rows = run_csv_rows(summary)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def content_hash(summary: RunSummary) -> str:
    """Hash of the run inputs: the config echo plus the graph file bytes."""
    digest = hashlib.sha256()
    digest.update(json.dumps(summary.config_echo, sort_keys=True).encode("utf-8"))
    graph_path = summary.config_echo.get("graph")
    if graph_path and Path(graph_path).is_file():
        digest.update(Path(graph_path).read_bytes())
    return digest.hexdigest()


def write_metadata(summary: RunSummary, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "strategy": summary.strategy_name,
        "rounds": summary.rounds,
        "repetitions": summary.repetitions,
        "node_count": summary.node_count,
        "edge_count": summary.edge_count,
        "eta": summary.eta,
        "f_opt": summary.f_opt,
        "optimal_seeds": list(summary.optimal_seeds),
        "member_names": summary.member_names,
        "final_cum_regret": float(summary.cum_regret[-1]),
        "config": summary.config_echo,
        "input_hash": content_hash(summary),
        "runtime_s": summary.runtime_s,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def render_run_figures(summary: RunSummary, prefix: str | Path) -> list[Path]:
    """Spread and regret curves as PNG files named ``<prefix>_spread.png``
    and ``<prefix>_regret.png``."""
    import matplotlib.pyplot as plt

    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    rounds = range(1, summary.rounds + 1)
    paths = []

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(rounds, summary.mean_spread, lw=1.5)
    ax.set_xlabel("round")
    ax.set_ylabel("mean influence spread")
    ax.set_title(summary.strategy_name)
    fig.tight_layout()
    spread_path = prefix.with_name(prefix.name + "_spread.png")
    fig.savefig(spread_path, dpi=120)
    plt.close(fig)
    paths.append(spread_path)

    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    ax0.plot(rounds, summary.mean_regret, lw=1.2)
    ax0.set_xlabel("round")
    ax0.set_ylabel("mean per-round regret")
    ax1.plot(rounds, summary.cum_regret, lw=1.5, color="tab:red")
    ax1.set_xlabel("round")
    ax1.set_ylabel("cumulative regret")
    fig.suptitle(summary.strategy_name)
    fig.tight_layout()
    regret_path = prefix.with_name(prefix.name + "_regret.png")
    fig.savefig(regret_path, dpi=120)
    plt.close(fig)
    paths.append(regret_path)
    return paths


def emit_results(summary: RunSummary, out_dir: str | Path, prefix: str,
                 figures: bool = True) -> dict[str, object]:
    """Persist one run: CSV + JSON sidecar, and figures unless disabled."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = write_run_csv(summary, out_dir / f"{prefix}.csv")
    meta_path = write_metadata(summary, out_dir / f"{prefix}.json")
    figure_paths: list[Path] = []
    if figures:
        figure_paths = render_run_figures(summary, out_dir / prefix)
    return {"csv": csv_path, "metadata": meta_path, "figures": figure_paths}


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def merge_run_csvs(paths: Sequence[str | Path], out_path: str | Path) -> Path:
    """Join several per-run CSVs on the round index for side-by-side plotting.

    Output columns are ``round`` followed by each input's data columns
    prefixed with the file stem. Runs of different lengths are truncated to
    the shortest.
    """
    paths = [Path(p) for p in paths]
    if not paths:
        raise ValueError("no CSV files given")
    labels = []
    for p in paths:
        label = p.stem
        while label in labels:
            label += "_dup"
        labels.append(label)

    tables = [_read_csv(p) for p in paths]
    length = min(len(rows) for _, rows in tables)
    header = ["round"]
    for label, (cols, _) in zip(labels, tables):
        header += [f"{label}_{c}" for c in cols[1:]]
    merged = []
    for t in range(length):
        row = [str(t + 1)]
        for _, rows in tables:
            if rows[t][0] != str(t + 1):
                raise ValueError("round index mismatch while merging")
            row += rows[t][1:]
        merged.append(row)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(merged)
    return out_path


def render_comparison_figure(paths: Sequence[str | Path], figure_path: str | Path,
                             column: str = "cum_regret") -> Path:
    """Overlay one column (default cumulative regret) from several run CSVs."""
    import matplotlib.pyplot as plt

    figure_path = Path(figure_path)
    figure_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for p in paths:
        p = Path(p)
        header, rows = _read_csv(p)
        if column not in header:
            raise ValueError(f"{p}: no column {column!r}")
        idx = header.index(column)
        ys = [float(r[idx]) for r in rows]
        ax.plot(range(1, len(ys) + 1), ys, lw=1.4, label=p.stem)
    ax.set_xlabel("round")
    ax.set_ylabel(column.replace("_", " "))
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(figure_path, dpi=120)
    plt.close(fig)
    return figure_path
