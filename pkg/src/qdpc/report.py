"""Benchmark figures rendered next to the CSV results."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import BenchRecord, summarize

_METHOD_STYLE = {
    "tv_dpc": dict(color="#c44e52", marker="o"),
    "iso_dpc": dict(color="#dd8452", marker="s"),
    "l2_retinex": dict(color="#55a868", marker="^"),
    "l1_retinex": dict(color="#4c72b0", marker="d"),
}


def render_bench_figures(records: list[BenchRecord], csv_path: str | Path) -> list[Path]:
    """One rpSNR-vs-background-strength figure per (pattern, snr) slice.

    Files land alongside the CSV, named after its stem.
    """
    csv_path = Path(csv_path)
    stats = summarize(records)
    slices = sorted({(r.pattern, r.snr_db) for r in records})
    methods = []
    for r in records:
        if r.method not in methods:
            methods.append(r.method)
    out_paths: list[Path] = []
    for pattern, snr in slices:
        fig, ax = plt.subplots(figsize=(6.0, 4.2))
        strengths = sorted({r.strength_a for r in records
                            if r.pattern == pattern and r.snr_db == snr})
        for method in methods:
            means, stds = [], []
            for a in strengths:
                mean, std = stats.get((pattern, snr, a, method), (np.nan, np.nan))
                means.append(mean)
                stds.append(std)
            style = _METHOD_STYLE.get(method, {})
            ax.errorbar(strengths, means, yerr=stds, label=method,
                        capsize=3, **style)
        ax.set_xlabel("background strength A")
        ax.set_ylabel("rpSNR (dB)")
        ax.set_title(f"{pattern}, SNR {snr:g} dB")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        out = csv_path.with_name(f"{csv_path.stem}_{pattern}_snr{snr:g}.png")
        fig.savefig(out, dpi=130)
        plt.close(fig)
        out_paths.append(out)
    return out_paths
