"""Matplotlib figures for sweep curves, noise-hypothesis summaries and image panels.

All figures go straight to files through the Agg backend.  PNG metadata is
stripped of the software tag so reruns produce byte-identical files.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .imageio import atomic_writer  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "savefig.dpi": 120,
    "svg.hashsalt": "dualgrid",
}

COLORS = ("tab:red", "tab:blue", "tab:orange", "tab:green", "tab:purple")


def _save(fig, path):
    buf = io.BytesIO()
    fig.savefig(buf, format="png", bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    with atomic_writer(path) as fh:
        fh.write(buf.getvalue())


def plot_curves(curves, path, labels=None, threshold=None, chosen=None, ylabel="SSIM(g, f)",
                title=None, hline_label="threshold"):
    """Semilog-x plot of one or more sweep curves.

    ``threshold`` may be a number or one value per curve (a residual plot has
    one noise level per curve); ``chosen`` likewise lists selected alphas,
    ``None`` entries skipped.
    """
    n = len(curves)
    labels = labels or [None] * n
    thresholds = threshold if isinstance(threshold, (list, tuple)) else [threshold] * n
    chosen = chosen if isinstance(chosen, (list, tuple)) else [chosen] * n
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for i, c in enumerate(curves):
            color = COLORS[i % len(COLORS)]
            ax.semilogx(c.alphas, c.values, "-o", ms=2.5, color=color, label=labels[i])
            if thresholds[i] is not None and (i == 0 or thresholds[i] != thresholds[0]):
                ax.axhline(thresholds[i], color=color if n > 1 else "k", ls="--", lw=0.9,
                           label=hline_label if i == 0 else None)
            if chosen[i] is not None:
                ax.axvline(chosen[i], color=color, ls=":", lw=1.0)
                ax.annotate(f"{chosen[i]:.3g}", (chosen[i], ax.get_ylim()[0]), color=color,
                            xytext=(3, 3), textcoords="offset points", fontsize=7)
        ax.set_xlabel(r"$\alpha$")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if any(labels) or threshold is not None:
            ax.legend(loc="best")
        _save(fig, path)


def plot_hypothesis(names, table, path):
    """Per-image shift similarity and mean +/- std bars per variant.

    ``table`` maps a variant name to one SSIM value per image.
    """
    variants = list(table)
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8.0, 3.2), gridspec_kw={"width_ratios": [2, 1]})
        x = np.arange(len(names))
        for i, v in enumerate(variants):
            ax0.plot(x, table[v], "-o", ms=3, color=COLORS[i % len(COLORS)], label=v)
        ax0.set_xlabel("image")
        ax0.set_ylabel(r"SSIM$(f, f\star d_s)$")
        ax0.legend(loc="lower right")
        means = [np.mean(table[v]) for v in variants]
        stds = [np.std(table[v]) for v in variants]
        ax1.bar(variants, means, yerr=stds, capsize=4,
                color=[COLORS[i % len(COLORS)] for i in range(len(variants))])
        lo = min(np.min(table[v]) for v in variants)
        ax1.set_ylim(max(0.0, lo - 0.05), 1.0)
        ax1.set_ylabel("mean SSIM")
        _save(fig, path)


def plot_images(panels, path, vmin=0.0, vmax=1.0):
    """Row of grayscale panels.

    ``panels`` holds ``(title, image)`` pairs; a third element ``"auto"``
    stretches that panel to its own range (useful for PSFs).
    """
    k = len(panels)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, k, figsize=(2.6 * k, 2.9), squeeze=False)
        for ax, panel in zip(axes[0], panels):
            title, img = panel[0], np.asarray(panel[1])
            auto = len(panel) > 2 and panel[2] == "auto"
            lo, hi = (img.min(), img.max()) if auto else (vmin, vmax)
            ax.imshow(img, cmap="gray", vmin=lo, vmax=hi, interpolation="nearest")
            ax.set_title(title)
            ax.set_axis_off()
        _save(fig, path)
