from __future__ import annotations

import math

import pandas as pd
import pytest

from jtnoma import summarize_sweep
from jtnoma.experiments import aggregate, plot_sweep, trend_statistics
from jtnoma.experiments.status import load_results


@pytest.fixture(name="results")
def fixture_results() -> pd.DataFrame:
    return pd.DataFrame(
        {
            "axis": "num_sut",
            "scheme": ["jt_noma", "jt_noma", "jt_noma", "jt_noma", "jt_oma", "jt_oma"],
            "value": [1, 1, 2, 2, 1, 1],
            "seed": [0, 1, 0, 1, 0, 1],
            "status": ["converged", "converged", "converged", "infeasible", "error", "converged"],
            "avg_mos": [2.0, 4.0, 5.0, 1.0, math.nan, 3.0],
            "feasible": [True, True, True, False, False, True],
            "message": ["", "", "", "", "boom", ""],
        }
    )


@pytest.mark.core
def test_aggregate_counts_feasible_runs_only(results):
    table = aggregate(results)
    assert list(table.columns) == ["scheme", "value", "mean", "sem", "count"]
    assert table[["scheme", "value"]].values.tolist() == [
        ["jt_noma", 1],
        ["jt_noma", 2],
        ["jt_oma", 1],
    ]
    assert table["mean"].tolist() == pytest.approx([3.0, 5.0, 3.0])
    assert table["count"].tolist() == [2, 1, 1]
    assert table["sem"].iloc[0] == pytest.approx(1.0)
    assert math.isnan(table["sem"].iloc[1])


@pytest.mark.core
def test_aggregate_of_nothing_feasible(results):
    table = aggregate(results[~results["feasible"]])
    assert table.empty
    assert list(table.columns) == ["scheme", "value", "mean", "sem", "count"]


@pytest.mark.core
def test_trend_statistics(results):
    trends = trend_statistics(results)
    assert set(trends) == {"jt_noma", "jt_oma"}
    # Ranks of the values are (1.5, 1.5, 3) against MOS ranks (1, 2, 3).
    assert trends["jt_noma"]["rho"] == pytest.approx(math.sqrt(3) / 2)
    assert trends["jt_noma"]["runs"] == 3
    assert math.isnan(trends["jt_oma"]["rho"])
    assert trends["jt_oma"]["runs"] == 1


@pytest.mark.core
def test_load_results_prefers_the_final_file(tmp_path, results):
    with pytest.raises(FileNotFoundError, match="No sweep results"):
        load_results(tmp_path)
    results.iloc[:2].to_csv(tmp_path / "results.partial.csv", index=False)
    assert len(load_results(tmp_path)) == 2
    results.to_csv(tmp_path / "results.csv", index=False)
    assert len(load_results(tmp_path)) == len(results)


@pytest.mark.core
def test_summarize_sweep(tmp_path, results, capsys):
    results.to_csv(tmp_path / "results.csv", index=False)
    summary = summarize_sweep(tmp_path)
    assert summary["num_runs"] == 6
    assert summary["num_feasible"] == 4
    assert summary["num_errors"] == 1
    assert summary["status_counts"] == {"converged": 4, "error": 1, "infeasible": 1}

    out = capsys.readouterr().out
    assert "#Runs: 6" in out
    assert "#Crashed runs: 1" in out
    assert "value=1 seed=0 jt_oma: boom" in out


@pytest.mark.core
def test_summarize_quietly(tmp_path, results, capsys):
    results.to_csv(tmp_path / "results.csv", index=False)
    summarize_sweep(tmp_path, print_summary=False)
    assert capsys.readouterr().out == ""


@pytest.mark.core
@pytest.mark.parametrize("extension", ["svg", "png"])
def test_plot_sweep(tmp_path, results, extension):
    path = plot_sweep(results, tmp_path / "plots", extension=extension)
    assert path == tmp_path / "plots" / f"avg_mos.{extension}"
    assert path.stat().st_size > 0


@pytest.mark.core
def test_plot_of_an_empty_sweep(tmp_path, results):
    path = plot_sweep(results.iloc[:0], tmp_path, metric="avg_rate", filename="rate")
    assert path.exists()
