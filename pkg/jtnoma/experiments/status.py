"""Functions to summarize a finished or running sweep."""

# ruff: noqa: T201
from __future__ import annotations

import math
from pathlib import Path
from typing import Any

import pandas as pd
from scipy import stats

from jtnoma.utils.files import empty_file


def _usable(results: pd.DataFrame) -> pd.DataFrame:
    feasible = results["feasible"].astype(str).str.lower() == "true"
    return results[feasible & results["avg_mos"].notna()]


def aggregate(results: pd.DataFrame, metric: str = "avg_mos") -> pd.DataFrame:
    """Mean, standard error and seed count of `metric` per scheme and axis value.

    Only feasible runs count. The standard error of a single seed is NaN.
    """
    usable = _usable(results)
    if usable.empty:
        return pd.DataFrame(columns=["scheme", "value", "mean", "sem", "count"])
    grouped = usable.groupby(["scheme", "value"], sort=True)[metric]
    table = grouped.agg(["mean", "count"]).reset_index()
    table["sem"] = grouped.apply(
        lambda s: stats.sem(s.to_numpy(), ddof=1) if len(s) > 1 else math.nan
    ).to_numpy()
    return table[["scheme", "value", "mean", "sem", "count"]]


def trend_statistics(results: pd.DataFrame, metric: str = "avg_mos") -> dict[str, Any]:
    """Spearman rank correlation of `metric` against the axis value, per scheme.

    Returns:
        For every scheme `{"rho", "p_value", "runs"}`; rho and p-value are NaN when the
        axis takes a single value or the metric is constant.
    """
    usable = _usable(results)
    trends: dict[str, Any] = {}
    for scheme, group in usable.groupby("scheme", sort=True):
        rho, p_value = math.nan, math.nan
        if group["value"].nunique() > 1 and group[metric].nunique() > 1:
            result = stats.spearmanr(group["value"], group[metric])
            rho, p_value = float(result[0]), float(result[1])
        trends[str(scheme)] = {"rho": rho, "p_value": p_value, "runs": int(len(group))}
    return trends


def load_results(out_dir: str | Path) -> pd.DataFrame:
    """Read `results.csv`, or the rows written so far by a running sweep.

    Raises:
        FileNotFoundError: If neither file exists or both are empty.
    """
    out_dir = Path(out_dir)
    for name in ("results.csv", "results.partial.csv"):
        path = out_dir / name
        if not empty_file(path):
            return pd.read_csv(path)
    raise FileNotFoundError(f"No sweep results found in {out_dir}")


def summarize_sweep(out_dir: str | Path, *, print_summary: bool = True) -> dict[str, Any]:
    """Summary of a sweep directory: run counts, failures, per-point means and trends.

    Args:
        out_dir: The output directory of the sweep.
        print_summary: If true, print the summary.

    Returns:
        summary: The figures that were printed.
    """
    results = load_results(out_dir)
    table = aggregate(results)
    failed = results[results["status"] == "error"]
    summary = {
        "num_runs": int(len(results)),
        "num_feasible": int(len(_usable(results))),
        "num_errors": int(len(failed)),
        "status_counts": results["status"].value_counts().sort_index().to_dict(),
        "table": table,
        "trends": trend_statistics(results),
    }

    if print_summary:
        print(f"#Runs: {summary['num_runs']}")
        print(f"#Feasible runs: {summary['num_feasible']}")
        print(f"#Crashed runs: {summary['num_errors']}")
        for status, count in summary["status_counts"].items():
            print(f"  {status}: {count}")
        if table.empty:
            return summary

        print()
        print("Average MOS per SUT (mean, standard error, seeds):")
        print(79 * "-")
        print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
        print()
        print("Trend of average MOS per SUT against the axis value:")
        for scheme, trend in summary["trends"].items():
            print(f"  {scheme}: rho={trend['rho']:.3f} p={trend['p_value']:.3g}")

        if not failed.empty:
            print()
            print("Crashed runs:")
            for row in failed.itertuples():
                print(f"  value={row.value} seed={row.seed} {row.scheme}: {row.message}")
    return summary
