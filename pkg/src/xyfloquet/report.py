"""Optional PNG figures rendered from an experiment CSV."""

from __future__ import annotations

import csv
import os
from typing import List


def read_rows(path: str) -> List[dict]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def render(path: str) -> List[str]:
    """Write ``<csv stem>_failures.png`` (and ``_classes.png`` for surgery
    rows) next to the CSV and return the written paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_rows(path)
    base, _ = os.path.splitext(path)
    out = []
    fig, ax = plt.subplots(figsize=(5, 3.5))
    labels, rates, lo, hi = [], [], [], []
    for r in rows:
        shots = int(r["shots"])
        nb = 1 if r["geometry"] == "surgery" else 2
        rate = (int(r["fails_Z"]) + int(r["fails_X"])) / (nb * shots)
        labels.append(f"{r['geometry']} L={r['L1']}x{r['L2']} T={r['rounds']}\np={r['p_gate']}")
        rates.append(rate)
        lo.append(rate - float(r["ci_low"]))
        hi.append(float(r["ci_high"]) - rate)
    ax.errorbar(range(len(rows)), rates, yerr=[lo, hi], fmt="o", capsize=4)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylabel("logical failure rate")
    ax.set_title("Wilson 95% intervals", fontsize=9)
    fig.tight_layout()
    p = base + "_failures.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    out.append(p)
    surg = [r for r in rows if r["geometry"] == "surgery"]
    if surg:
        fig, ax = plt.subplots(figsize=(4, 3))
        for i, r in enumerate(surg):
            n = int(r["shots"])
            ax.bar([2 * i, 2 * i + 0.8], [int(r["class0"]) / n, int(r["class1"]) / n],
                   width=0.7, color=["tab:blue", "tab:orange"])
        ax.set_xticks([2 * i + 0.4 for i in range(len(surg))])
        ax.set_xticklabels([f"input {r['input']}" for r in surg])
        ax.set_ylabel("P(class 0) / P(class 1)")
        fig.tight_layout()
        p = base + "_classes.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        out.append(p)
    return out
