"""SVG overlays of spectra and fitted lattices (non-interactive backend)."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import atomic_write_text  # noqa: E402


def _svg_text(fig) -> str:
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "pseudolattice", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": "pseudolattice"})
    plt.close(fig)
    return buf.getvalue()


def overlay_svg(cloud, charts=(), title: str = "") -> str:
    """Spectrum in (Re mu, Im mu / eps) with fitted grid lines and rectangle outlines."""
    fig, ax = plt.subplots(figsize=(6, 6))
    x = cloud.chi_inverse()
    ax.scatter(x[:, 0], x[:, 1], s=1.5, c="k", linewidths=0)
    for mc in charts:
        r = mc.rectangle
        if r is not None:
            box = r.value_box()
            ax.add_patch(
                plt.Rectangle((box.E0, box.G0), box.E1 - box.E0, box.G1 - box.G0, fill=False, lw=0.6, ec="tab:blue")
            )
        k = mc.labels
        if len(k) == 0:
            continue
        lo, hi = k.min(axis=0), k.max(axis=0)
        for axis in (0, 1):
            for v in range(lo[axis], hi[axis] + 1):
                t = np.linspace(lo[1 - axis], hi[1 - axis], 8)
                kk = np.empty((len(t), 2))
                kk[:, axis] = v
                kk[:, 1 - axis] = t
                p = mc.predict(kk)
                ax.plot(p[:, 0], p[:, 1], lw=0.3, c="tab:orange")
    ax.set_xlabel("Re mu")
    ax.set_ylabel("Im mu / eps")
    if title:
        ax.set_title(title)
    return _svg_text(fig)


def write_overlay(path, cloud, charts=(), title: str = ""):
    return atomic_write_text(path, overlay_svg(cloud, charts, title))
