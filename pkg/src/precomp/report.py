"""Report serialization: delimited tables, JSON summaries, and figures.

Output is deterministic for deterministic inputs: fixed column order,
fixed float formatting, sorted JSON keys, no timestamps. Rates are
recomputed here from raw bit counts so the tables never drift from the
streams they describe. Figures render through the Agg backend next to the
tables they visualize.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

CELL_COLUMNS = ("method", "theta", "bits", "bpp", "psnr_db", "ssim",
                "status", "iterations", "error")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.12g}"
    return str(value)


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _dump_json(payload, path: Path):
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True,
                               allow_nan=False) + "\n")


def write_bundle(bundle: dict, out_dir) -> dict:
    """Write tables, summaries, and figures; returns {name: path}."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    total = bundle["total_samples"]

    cells_path = out_dir / "cells.csv"
    with open(cells_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CELL_COLUMNS)
        for cell in bundle["cells"]:
            bpp = cell.bits / total if cell.bits is not None else None
            writer.writerow([
                cell.method, cell.theta, _fmt(cell.bits), _fmt(bpp),
                _fmt(cell.psnr_db), _fmt(cell.ssim), cell.status,
                _fmt(cell.iterations), cell.error or "",
            ])
    written["cells"] = cells_path

    curves_path = out_dir / "curves.csv"
    with open(curves_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("method", "bpp", "psnr_db", "ssim"))
        for method, curve in bundle["curves"].items():
            for p in curve.points:
                writer.writerow([method, _fmt(p.bpp), _fmt(p.psnr_db),
                                 _fmt(p.ssim)])
    written["curves"] = curves_path

    _dump_json(
        {
            method: [
                {"bpp": p.bpp, "psnr_db": p.psnr_db, "ssim": p.ssim}
                for p in curve.points
            ]
            for method, curve in bundle["curves"].items()
        },
        out_dir / "curves.json",
    )
    written["curves_json"] = out_dir / "curves.json"

    _dump_json(bundle["bd_psnr"], out_dir / "bd_psnr.json")
    written["bd_psnr"] = out_dir / "bd_psnr.json"

    diagnostics = {}
    for cell in bundle["cells"]:
        if cell.diagnostics:
            diagnostics[f"{cell.method}_theta{cell.theta}"] = {
                "status": cell.status,
                "iterations": cell.iterations,
                "bits": cell.bits,
                "runs": cell.diagnostics,
            }
    summary = {
        "geometry": bundle["geometry"],
        "inputs": bundle["inputs"],
        "degradation": bundle["degradation"],
        "methods": bundle["methods"],
        "theta_list": bundle["theta_list"],
        "margin": bundle["margin"],
        "total_samples": total,
        "all_failed": bundle["all_failed"],
        "diagnostics": diagnostics,
    }
    _dump_json(summary, out_dir / "summary.json")
    written["summary"] = out_dir / "summary.json"

    written.update(render_figures(bundle, out_dir))
    return written


def _finite_pairs(xs, ys):
    pairs = [(x, y) for x, y in zip(xs, ys)
             if y is not None and math.isfinite(y)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def render_figures(bundle: dict, out_dir) -> dict:
    """Rate-quality curves and the per-iteration residual traces as PNGs."""
    out_dir = Path(out_dir)
    written = {}
    curves = bundle["curves"]

    if curves:
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        for method, curve in curves.items():
            xs, ys = _finite_pairs([p.bpp for p in curve.points],
                                   [p.psnr_db for p in curve.points])
            if xs:
                ax.plot(xs, ys, marker="o", label=method)
        ax.set_xscale("log")
        ax.set_xlabel("rate [bits/sample]")
        ax.set_ylabel("degraded-domain PSNR [dB]")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = out_dir / "rd_curves.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written["rd_curves_png"] = path

    if any(p.ssim is not None for c in curves.values() for p in c.points):
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        for method, curve in curves.items():
            xs, ys = _finite_pairs([p.bpp for p in curve.points],
                                   [p.ssim for p in curve.points])
            if xs:
                ax.plot(xs, ys, marker="s", label=method)
        ax.set_xscale("log")
        ax.set_xlabel("rate [bits/sample]")
        ax.set_ylabel("SSIM")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = out_dir / "ssim_curves.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written["ssim_curves_png"] = path

    traced = [c for c in bundle["cells"] if c.diagnostics]
    if traced:
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        for cell in traced:
            for run_log in cell.diagnostics:
                ax.plot(
                    [entry["t"] for entry in run_log],
                    [entry["w"] for entry in run_log],
                    marker=".",
                    label=f"{cell.method} theta={cell.theta}",
                )
        ax.set_xlabel("iteration")
        ax.set_ylabel("consensus residual w(t)")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize="small")
        fig.tight_layout()
        path = out_dir / "admm_trace.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written["admm_trace_png"] = path

    return written
