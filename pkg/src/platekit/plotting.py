"""Log-log convergence plots written as SVG."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .study import METHOD_FIELDS, ConvergenceTable  # noqa: E402

LABELS = {
    "err_u": "u",
    "err_hess": "D2u",
    "err_M": "M",
    "err_divdiv": "divDiv M",
    "err_shear_w": "shear (h^3/2)",
    "err_nn_w": "Mnn (h^1/2)",
    "err_hess_recon": "eps(G_h)",
}


def _reference(ax, h, anchor, order, style):
    # anchored a little above the first data point so it does not hide a curve
    ref = 2.0 * anchor * (h / h[0]) ** order
    ax.loglog(h, ref, style, color="0.5", lw=1, label="O(h)" if order == 1 else f"O(h^{order})")


def plot_convergence(table: ConvergenceTable, path, title: str | None = None) -> list[str]:
    """Write one polyline per populated error field plus O(h) and O(h^2) guides.

    Returns the list of plotted field names.
    """
    recs = table.records
    if len(recs) < 2:
        raise ValueError("need at least two levels to plot")
    h = np.array([r.h for r in recs])
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    plotted = []
    for name in METHOD_FIELDS[table.spec.method]:
        vals = table.column(name)
        if any(v is None or v <= 0 for v in vals):
            continue
        label = LABELS[name]
        if name == "err_M" and table.spec.full_ddiv:
            label = "M(15)"
        ax.loglog(h, vals, "o-", lw=1.2, ms=4, label=label)
        plotted.append(name)
    if plotted:
        top = max(table.column(plotted[0])[0], 1e-300)
        _reference(ax, h, top, 1, "--")
        _reference(ax, h, top, 2, ":")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.invert_xaxis()
    ax.grid(True, which="both", lw=0.3, alpha=0.5)
    ax.legend(fontsize=8, loc="best")
    ax.set_title(title or table.spec.method.replace("_", "-"))
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return plotted
