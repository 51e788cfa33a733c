"""SVG line charts for study outputs. Deterministic: fixed hash salt, no date stamp."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "svg.hashsalt": "toricquant",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "lines.markersize": 4,
}


def _save(fig, path: Path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_study(rows, out_dir: Path):
    """w1 vs k and sup_deviation * k / log k vs k; returns written file names."""
    ok = [r for r in rows if r["status"] == "ok"]
    files = []
    if not ok:
        return files
    ks = [r["k"] for r in ok]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        w1 = [r["w1"] for r in ok]
        if all(v > 0 for v in w1):
            ax.loglog(ks, w1, "o-", label="W1(nu_k, mu)")
            ax.loglog(ks, [w1[0] * ks[0] / k for k in ks], "--", color="0.5", label="1/k reference")
        else:
            ax.plot(ks, w1, "o-", label="W1(nu_k, mu)")
        ax.set_xlabel("k")
        ax.set_ylabel("W1")
        ax.legend(frameon=False)
        _save(fig, out_dir / "w1_vs_k.svg")
        files.append("w1_vs_k.svg")

        keys = [key for key in ok[0] if key.startswith("sup_deviation[")]
        if keys:
            fig, ax = plt.subplots(figsize=(5, 3.6))
            for key in keys:
                vals = [r[key] * r["k"] / math.log(r["k"]) for r in ok if r["k"] > 1]
                ax.semilogx([k for k in ks if k > 1], vals, "o-", label=key[len("sup_deviation["):-1])
            ax.set_xlabel("k")
            ax.set_ylabel("sup deviation * k / log k")
            ax.legend(frameon=False)
            _save(fig, out_dir / "sup_deviation_vs_k.svg")
            files.append("sup_deviation_vs_k.svg")
    return files


def plot_sup_deviation(rows, out_dir: Path):
    """rows of [k, t, sup, sup * k / log k]."""
    ts = sorted({r[1] for r in rows})
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        for t in ts:
            sel = [r for r in rows if r[1] == t and r[0] > 1]
            ax.semilogx([r[0] for r in sel], [r[3] for r in sel], "o-", label=f"t = {t:g}")
        ax.set_xlabel("k")
        ax.set_ylabel("sup deviation * k / log k")
        ax.legend(frameon=False)
        _save(fig, out_dir / "sup_deviation_vs_k.svg")
    return "sup_deviation_vs_k.svg"
