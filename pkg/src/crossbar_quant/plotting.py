"""Render result CSVs to image files with matplotlib."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import LOG_METRICS, _series, read_csv  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.markersize": 4,
    "legend.fontsize": 7,
    "figure.dpi": 150,
}


def render_csv(csv_path, image_path=None, title: str | None = None) -> Path:
    """Plot each series of a result CSV against sigma; returns the image path."""
    csv_path = Path(csv_path)
    image_path = Path(image_path) if image_path else csv_path.with_suffix(".png")
    groups = _series(read_csv(csv_path))
    metrics = sorted({m for m, _ in groups})
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.6))
        for (metric, label), pts in sorted(groups.items()):
            pts = sorted(pts)
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            err = [p[2] for p in pts]
            if metric in LOG_METRICS:
                # zero counts cannot be shown on a log axis
                keep = [k for k, y in enumerate(ys) if y > 0]
                xs, ys, err = [xs[k] for k in keep], [ys[k] for k in keep], [err[k] for k in keep]
            if not xs:
                continue
            ax.errorbar(xs, ys, yerr=err if any(err) else None, marker="o", capsize=2, label=label)
        if set(metrics) & LOG_METRICS:
            ax.set_yscale("log")
        ax.set_xlabel(r"$\sigma_\eta$ ($\Omega$)")
        ax.set_ylabel(" / ".join(metrics) or "value")
        if title:
            ax.set_title(title)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(image_path)
        plt.close(fig)
    return image_path
