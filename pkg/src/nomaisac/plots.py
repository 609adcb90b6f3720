"""Static SVG figures rendered from the CSV outputs (cosmetic only)."""
from __future__ import annotations

import csv
from pathlib import Path


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "nomaisac"  # stable element ids across runs
    return plt


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    return Path(path)


def plot_tradeoff(avg_csv, out_svg):
    plt = _pyplot()
    rows = _read(avg_csv)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for s in dict.fromkeys(r["scheme"] for r in rows):
        pts = sorted((float(r["mean_loss"]), float(r["mean_throughput"])) for r in rows if r["scheme"] == s)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=s)
    ax.set_xscale("log")
    ax.set_xlabel("beampattern matching loss")
    ax.set_ylabel("throughput (bit/s/Hz)")
    ax.legend()
    return _save(fig, out_svg)


def plot_beampattern(bp_csv, out_svg):
    plt = _pyplot()
    rows = _read(bp_csv)
    theta = [float(r["theta_deg"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for col in [c for c in rows[0] if c != "theta_deg"]:
        style = "k:" if col == "desired" else ("k--" if col == "reference" else "-")
        ax.plot(theta, [float(r[col]) for r in rows], style, label=col)
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("beampattern gain")
    ax.legend(fontsize=7)
    return _save(fig, out_svg)


def plot_convergence(conv_csv, out_svg):
    plt = _pyplot()
    rows = _read(conv_csv)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    it = range(1, len(rows) + 1)
    ax.plot(it, [float(r["throughput"]) for r in rows], marker=".", label="throughput")
    ax.set_xlabel("iteration")
    ax.set_ylabel("throughput (bit/s/Hz)")
    ax2 = ax.twinx()
    ax2.semilogy(it, [max(float(r["penalty"]), 1e-16) for r in rows], "r--", label="penalty")
    ax2.set_ylabel("penalty")
    return _save(fig, out_svg)


def plot_q_sweep(q_csv, out_svg):
    plt = _pyplot()
    rows = _read(q_csv)
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    ax.plot([int(r["q"]) for r in rows], [float(r["mean_throughput"]) for r in rows], marker="o")
    ax.set_xlabel("multicast streams Q")
    ax.set_ylabel("mean throughput (bit/s/Hz)")
    return _save(fig, out_svg)


def plot_single_user(curve_csv, out_svg):
    plt = _pyplot()
    rows = _read(curve_csv)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for s in dict.fromkeys(r["scheme"] for r in rows):
        sel = [r for r in rows if r["scheme"] == s and r["loss"] != "nan"]
        ax.plot([float(r["eps"]) for r in sel], [float(r["loss"]) for r in sel], marker="o", label=s)
    ax.set_xlabel("rate target (bit/s/Hz)")
    ax.set_ylabel("beampattern matching loss")
    ax.legend()
    return _save(fig, out_svg)
