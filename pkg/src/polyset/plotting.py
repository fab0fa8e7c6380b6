"""Static report figures.

The CSV files written next to each figure hold the data; figures are
rendered with the Agg backend and saved without timestamps and with a fixed
SVG id salt, so reruns produce identical bytes.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "svg.hashsalt": "polyset",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "figure.dpi": 100,
}

REPR_COLORS = {"baseline": "#c0392b", "polyset": "#1f4e79"}


def save(fig, path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".") or "svg"
    meta = {"Date": None} if fmt == "svg" else ({"CreationDate": None} if fmt == "pdf" else None)
    fig.savefig(path, format=fmt, metadata=meta, bbox_inches="tight")
    plt.close(fig)
    return path


def dataset_overview(records, path):
    """Four panels: Mn histogram, D histogram, (Mn, D) hexbin, Mn vs log10 Mz+1."""
    mn = np.array([r.mn for r in records])
    disp = np.array([r.dispersity for r in records])
    mz1 = np.array([r.target_log10_mz1 for r in records])
    with matplotlib.rc_context(RC):
        fig, axes = plt.subplots(2, 2, figsize=(7.0, 5.6))
        ax = axes[0, 0]
        ax.hist(np.log10(mn), bins=40, color="#4c72b0", edgecolor="white", linewidth=0.3)
        ax.set_xlabel(r"$\log_{10} M_n$ (g/mol)")
        ax.set_ylabel("count")
        ax = axes[0, 1]
        ax.hist(disp, bins=40, color="#55a868", edgecolor="white", linewidth=0.3)
        ax.set_xlabel(r"$Đ$")
        ax = axes[1, 0]
        hb = ax.hexbin(np.log10(mn), disp, gridsize=25, cmap="viridis", mincnt=1, linewidths=0.1)
        fig.colorbar(hb, ax=ax, label="count")
        ax.set_xlabel(r"$\log_{10} M_n$")
        ax.set_ylabel(r"$Đ$")
        ax = axes[1, 1]
        ax.scatter(mn, mz1, s=2, c=disp, cmap="plasma", rasterized=False, linewidths=0)
        ax.set_xscale("log")
        ax.set_xlabel(r"$M_n$ (g/mol)")
        ax.set_ylabel(r"$\log_{10} M_{z+1}$")
        fig.tight_layout()
        return save(fig, path)


def moment_scatter(records, path, which: str = "mz"):
    mn = np.array([r.mn for r in records])
    y = np.array([r.target(which) for r in records])
    label = r"$\log_{10} M_z$" if which == "mz" else r"$\log_{10} M_{z+1}$"
    with matplotlib.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.6, 3.0))
        ax.scatter(mn, y, s=2, color="#4c72b0", linewidths=0)
        ax.set_xscale("log")
        ax.set_xlabel(r"$M_n$ (g/mol)")
        ax.set_ylabel(label)
        fig.tight_layout()
        return save(fig, path)


def learning_curves(reports, path):
    """Validation and training MSE per epoch, one color per representation."""
    with matplotlib.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.8, 3.0))
        for rep in reports:
            epochs = np.arange(1, len(rep.val_loss) + 1)
            color = REPR_COLORS.get(rep.representation)
            ax.plot(epochs, rep.train_loss, color=color, alpha=0.45, linestyle="--")
            ax.plot(epochs, rep.val_loss, color=color, label=f"{rep.representation} (val)")
        ax.set_yscale("log")
        ax.set_xlabel("epoch")
        ax.set_ylabel("MSE (standardized)")
        ax.legend(frameon=False)
        fig.tight_layout()
        return save(fig, path)


def parity(reports, path):
    with matplotlib.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.4, 3.4))
        lo = min(min(r.test_true + r.test_pred) for r in reports)
        hi = max(max(r.test_true + r.test_pred) for r in reports)
        ax.plot([lo, hi], [lo, hi], color="0.5", linewidth=0.8)
        for rep in reports:
            ax.scatter(rep.test_true, rep.test_pred, s=4, alpha=0.6, linewidths=0,
                       color=REPR_COLORS.get(rep.representation),
                       label=f"{rep.representation} R²={rep.metrics['r2']:.3f}")
        tgt = "M_z" if reports[0].target == "mz" else "M_{z+1}"
        ax.set_xlabel(rf"true $\log_{{10}} {tgt}$")
        ax.set_ylabel(rf"predicted $\log_{{10}} {tgt}$")
        ax.legend(frameon=False, loc="upper left")
        fig.tight_layout()
        return save(fig, path)


def smape_distribution(per_sample: dict, path):
    """Histogram of per-sample SMAPE (percent), one series per representation."""
    with matplotlib.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.8, 3.0))
        allv = np.concatenate([np.asarray(v) for v in per_sample.values()])
        hi = max(float(allv.max()), 1e-3)
        bins = np.linspace(0.0, hi, 41)
        for name, vals in per_sample.items():
            ax.hist(vals, bins=bins, alpha=0.6, color=REPR_COLORS.get(name), label=name)
        ax.set_xlabel("SMAPE (%)")
        ax.set_ylabel("count")
        ax.legend(frameon=False)
        fig.tight_layout()
        return save(fig, path)


def pca_scatter(projections, color_values, path, title: str = ""):
    P = np.asarray(projections, dtype=float)
    with matplotlib.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.8, 3.2))
        y = P[:, 1] if P.shape[1] > 1 else np.zeros(P.shape[0])
        sc = ax.scatter(P[:, 0], y, c=color_values, cmap="viridis", s=16, linewidths=0)
        fig.colorbar(sc, ax=ax, label=r"$\log_{10} M_{z+1}$")
        ax.set_xlabel("PC1")
        ax.set_ylabel("PC2")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return save(fig, path)


def mwd_curves(curves, path):
    """Number-fraction MWD per record on a log-mass axis; ``curves`` is
    a list of ``(log10 masses, density in log10 M, color value)``."""
    with matplotlib.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.8, 3.0))
        vals = np.array([c[2] for c in curves])
        norm = matplotlib.colors.Normalize(vals.min(), vals.max() if vals.max() > vals.min() else vals.min() + 1)
        cmap = matplotlib.colormaps["viridis"]
        for x, d, v in curves:
            ax.plot(x, d, color=cmap(norm(v)), linewidth=0.8)
        fig.colorbar(matplotlib.cm.ScalarMappable(norm=norm, cmap=cmap), ax=ax, label=r"$\log_{10} M_{z+1}$")
        ax.set_xlabel(r"$\log_{10} M$")
        ax.set_ylabel("number fraction density")
        fig.tight_layout()
        return save(fig, path)
