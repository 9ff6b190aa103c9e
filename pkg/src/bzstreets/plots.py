"""Report figures. Every function writes one PNG and returns its path."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}

PHASE_COLORS = {"P1": "#d9ead3", "T1": "#fff2cc", "P2": "#cfe2f3", "T2": "#f4cccc", "P3": "#eeeeee"}


def _new(width=5.0, height=3.2, **kw):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, height), **kw)
    return fig, ax


def _save(fig, path) -> Path:
    path = Path(path)
    with plt.rc_context(STYLE):
        fig.tight_layout()
        # no timestamp/version metadata: reruns must produce identical bytes
        fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_activity(path, series_by_label: dict, stride: int = 1):
    """Excited-node count against integration step, one line per run."""
    fig, ax = _new()
    for label, series in series_by_label.items():
        series = np.asarray(series)
        ax.plot(np.arange(1, series.size + 1) * stride, series, lw=0.8, label=str(label))
    ax.set_xlabel("step")
    ax.set_ylabel("excited nodes")
    if len(series_by_label) > 1:
        ax.legend(frameon=False)
    return _save(fig, path)


def plot_coverage_curve(path, phis, coverages, segmentation=None, extra: dict | None = None):
    """Coverage vs phi, phase segments shaded, T2 line dashed."""
    fig, ax = _new()
    phis = np.asarray(phis)
    if segmentation is not None:
        step = np.min(np.diff(phis)) / 2 if phis.size > 1 else 0.0005
        for seg in segmentation.segments:
            ax.axvspan(seg.phi_lo - step, seg.phi_hi + step,
                       color=PHASE_COLORS.get(seg.label, "#ffffff"), lw=0)
            ax.text((seg.phi_lo + seg.phi_hi) / 2, 1.03, seg.label, ha="center", fontsize=7)
        if segmentation.t2_fit is not None:
            t2 = segmentation.segment("T2")
            xs = np.linspace(t2.phi_lo, t2.phi_hi, 10)
            slope, icpt = segmentation.t2_fit
            ax.plot(xs, icpt + slope * xs, "k--", lw=0.8)
    ax.plot(phis, coverages, "x-", color="C0", ms=4, lw=0.8, label="coverage")
    for label, (xs, ys) in (extra or {}).items():
        ax.plot(xs, ys, "o", ms=3, label=label)
    if extra:
        ax.legend(frameon=False)
    ax.set_ylim(-0.02, 1.08)
    ax.set_xlabel(r"$\phi$")
    ax.set_ylabel("coverage")
    return _save(fig, path)


def plot_qq(path, qq):
    fig, ax = _new(3.6, 3.4)
    t, s = qq.theoretical, qq.ordered
    ax.plot(t, s, "o", ms=3)
    lim = [min(t.min(), s.min()), max(t.max(), s.max())]
    ax.plot(lim, lim, "k-", lw=0.7)
    ax.set_xlabel("N(0,1) quantile")
    ax.set_ylabel("sample quantile")
    return _save(fig, path)


def plot_dendrogram(path, dendro):
    from scipy.cluster.hierarchy import dendrogram as draw

    fig, ax = _new(6.0, 3.2)
    draw(dendro.linkage_matrix(), labels=list(dendro.leaf_labels), ax=ax,
         color_threshold=0, above_threshold_color="k", leaf_rotation=90)
    ax.set_ylabel("height")
    return _save(fig, path)


def plot_matrix(path, matrix, labels):
    fig, ax = _new(4.4, 3.8)
    im = ax.imshow(np.asarray(matrix), cmap="viridis", interpolation="nearest")
    ticks = np.arange(len(labels))
    ax.set_xticks(ticks, [str(x) for x in labels], rotation=90, fontsize=6)
    ax.set_yticks(ticks, [str(x) for x in labels], fontsize=6)
    fig.colorbar(im, ax=ax, shrink=0.8)
    return _save(fig, path)


def plot_cost(path, history):
    fig, ax = _new()
    ax.plot(np.arange(len(history)), history, lw=1.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("global best cost")
    return _save(fig, path)


def plot_memberships(path, xs, memberships, xlabel=r"$\phi$"):
    fig, ax = _new()
    u = np.asarray(memberships)
    for j in range(u.shape[1]):
        ax.plot(xs, u[:, j], ".-", lw=0.6, ms=4, label=f"c{j}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("membership")
    ax.legend(frameon=False, ncol=5, fontsize=6)
    return _save(fig, path)


def plot_raster(path, img, title=None):
    """Grayscale raster with no axes, e.g. a frequency map or time lapse."""
    fig, ax = _new(4.0, 4.0 * img.shape[0] / max(img.shape[1], 1))
    ax.imshow(img, cmap="gray", vmin=0, vmax=255, interpolation="nearest")
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    return _save(fig, path)
