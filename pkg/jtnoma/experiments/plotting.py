"""Line plots of sweep results."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.axes  # noqa: E402
import matplotlib.figure  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

from jtnoma.experiments.status import aggregate  # noqa: E402

_AXIS_LABELS = {
    "num_sut": "Number of SUTs",
    "num_put": "Number of PUTs",
    "num_subcarriers": "Number of subcarriers",
}
_METRIC_LABELS = {
    "avg_mos": "Average MOS per SUT",
    "avg_rate": "Average rate per SUT [bits/s/Hz]",
    "total_qoe": "Total QoE",
}


def _set_general_plot_style() -> None:
    plt.rcParams.update(
        {
            "text.usetex": False,
            "font.size": "10.90",
            "legend.fontsize": "9.90",
            "xtick.labelsize": "small",
            "ytick.labelsize": "small",
            "legend.title_fontsize": "small",
            "svg.hashsalt": "jtnoma",
        }
    )


def _get_fig_and_ax() -> tuple[matplotlib.figure.Figure, matplotlib.axes.Axes]:
    _set_general_plot_style()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    sns.despine(fig)
    return fig, ax


def plot_sweep(
    results: pd.DataFrame,
    out_dir: str | Path,
    *,
    metric: str = "avg_mos",
    filename: str = "avg_mos",
    extension: str = "svg",
) -> Path:
    """Plot the mean of `metric` against the axis value, one line per scheme.

    Error bars are standard errors over seeds, each point is labelled with its seed
    count. Only feasible runs are plotted.

    Returns:
        The path of the written figure.
    """
    table = aggregate(results, metric)
    fig, ax = _get_fig_and_ax()
    palette = sns.color_palette("colorblind", n_colors=max(table["scheme"].nunique(), 1))

    for color, (scheme, group) in zip(palette, table.groupby("scheme", sort=True)):
        ax.errorbar(
            group["value"],
            group["mean"],
            yerr=group["sem"].fillna(0.0),
            label=str(scheme),
            color=color,
            marker="o",
            markersize=3,
            linewidth=0.9,
            capsize=2,
        )
        for x, y, count in zip(group["value"], group["mean"], group["count"]):
            ax.annotate(
                f"n={count}",
                (x, y),
                textcoords="offset points",
                xytext=(0, 5),
                ha="center",
                fontsize=6,
                color=color,
            )

    axis = str(results["axis"].iloc[0]) if len(results) else ""
    ax.set_xlabel(_AXIS_LABELS.get(axis, axis), color=(0, 0, 0, 0.69))
    ax.set_ylabel(_METRIC_LABELS.get(metric, metric), color=(0, 0, 0, 0.69))
    ax.grid(visible=True, which="both", ls="-", alpha=0.3)
    if not table.empty:
        ax.legend(frameon=False)
    fig.tight_layout()

    path = Path(out_dir) / f"{filename}.{extension}"
    path.parent.mkdir(parents=True, exist_ok=True)
    # Without a timestamp reruns produce identical files.
    metadata = {"Date": None} if extension in ("svg", "pdf") else None
    fig.savefig(path, bbox_inches="tight", metadata=metadata)
    plt.close(fig)
    return path
