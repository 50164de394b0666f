"""Delimited tables and figures from finished runs and comparisons."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .engine import Comparison, load_result
from .plotting import MODE_COLORS, new_figure, save

GENERATION_COLUMNS = ("generation", "cumulative_hypervolume", "new_genomes", "reward", "mean_prob",
                      "importance_fallback", "top_k")


def _write_csv(path: Path, header: dict, columns: Iterable[str], rows: Iterable[Iterable]) -> Path:
    with path.open("w", newline="") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in header.items()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(columns))
        w.writerows(rows)
    return path


def hypervolume_series(result: dict) -> list[float]:
    return [g["cumulative_hypervolume"] for g in result["generations"]]


def write_run_report(run_dir: str | Path, out_dir: str | Path | None = None) -> dict[str, Path]:
    """Per-generation metrics, importance trajectory and final front as CSV plus PNG figures."""
    result = load_result(run_dir)
    out = Path(out_dir or run_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = result["header"]
    files: dict[str, Path] = {}

    gen_rows = []
    for g in result["generations"]:
        row = [g.get(c, "") for c in GENERATION_COLUMNS[:-1]]
        row.append(";".join(str(i) for i in g.get("top_k", [])))
        gen_rows.append(row)
    files["generations"] = _write_csv(out / "generations.csv", header, GENERATION_COLUMNS, gen_rows)

    importance = result["importance"]
    m = len(importance[0]) if importance else 0
    files["importance"] = _write_csv(
        out / "importance.csv", header, ["generation", *[f"p{i}" for i in range(m)]],
        ([g + 1, *vec] for g, vec in enumerate(importance)),
    )
    front = np.asarray(result["front"]["points"])
    files["front"] = _write_csv(out / "front.csv", header, ["error", "latency_ms", "energy_mj"], front.tolist())

    color = MODE_COLORS.get(header.get("mode"), "k")
    fig, ax = new_figure()
    series = hypervolume_series(result)
    ax.plot(range(len(series)), series, marker="o", color=color)
    ax.set_xlabel("generation")
    ax.set_ylabel("cumulative hypervolume")
    files["hypervolume_png"] = save(fig, out / "hypervolume.png")

    if importance:
        fig, ax = new_figure(6.0, 3.2)
        im = ax.imshow(np.asarray(importance).T, aspect="auto", cmap="viridis", origin="lower",
                       extent=(0.5, len(importance) + 0.5, -0.5, m - 0.5))
        ax.set_xlabel("generation")
        ax.set_ylabel("parameter")
        fig.colorbar(im, ax=ax, label="importance")
        files["importance_png"] = save(fig, out / "importance.png")

    if len(front):
        fig, ax = new_figure()
        sc = ax.scatter(front[:, 1], front[:, 0], c=front[:, 2], s=10, cmap="plasma")
        ax.set_xlabel("latency [ms]")
        ax.set_ylabel("error")
        fig.colorbar(sc, ax=ax, label="energy [mJ]")
        files["front_png"] = save(fig, out / "front.png")
    return files


def write_comparison(comparison: Comparison, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = comparison.to_dict()
    (out / "comparison.json").write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    cols = ["label", "hypervolume", "igd", "dominance_ratio", "front_size"]
    if "igd_true_front" in comparison.rows[0]:
        cols.append("igd_true_front")
    files = {
        "json": out / "comparison.json",
        "csv": _write_csv(out / "comparison.csv", data["header"], cols,
                          ([row[c] for c in cols] for row in comparison.rows)),
    }
    fig, ax = new_figure()
    for result in comparison.results:
        pts = result.front.points
        ax.scatter(pts[:, 1], pts[:, 0], s=8, alpha=0.8, label=result.config.mode,
                   color=MODE_COLORS.get(result.config.mode))
    ax.set_xlabel("latency [ms]")
    ax.set_ylabel("error")
    ax.legend()
    files["fronts_png"] = save(fig, out / "fronts.png")
    return files


SWEEP_COLUMNS = ("device", "space", "static_hypervolume", "static_igd", "static_dominance_ratio",
                 "adaptive_hypervolume", "adaptive_igd", "adaptive_dominance_ratio")


def sweep_rows(comparisons: list[tuple[str, str, Comparison]]) -> list[list]:
    rows = []
    for device, space, comp in comparisons:
        by_mode = {r["label"]: r for r in comp.rows}
        s, a = by_mode["static"], by_mode["adaptive"]
        rows.append([device, space, s["hypervolume"], s["igd"], s["dominance_ratio"],
                     a["hypervolume"], a["igd"], a["dominance_ratio"]])
    return rows


def write_sweep(comparisons: list[tuple[str, str, Comparison]], out_dir: str | Path, header: dict) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _write_csv(out / "sweep.csv", header, SWEEP_COLUMNS, sweep_rows(comparisons))
