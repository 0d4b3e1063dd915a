from __future__ import annotations

import logging
import os
import runpy
from pathlib import Path

import pandas as pd
import pytest

from jtnoma.utils.files import deserialize
from jtnoma_examples import ci_examples, core_examples

examples_folder = Path(__file__, "..", "..", "jtnoma_examples").resolve()


@pytest.fixture(autouse=True)
def use_tmpdir(tmp_path, request):
    os.chdir(tmp_path)
    yield
    os.chdir(request.config.invocation_dir)


# Fail tests if there is a logging.error
@pytest.fixture(autouse=True)
def no_logs_gte_error(caplog):
    yield
    errors = [
        record for record in caplog.get_records("call") if record.levelno >= logging.ERROR
    ]
    assert not errors


def run_example(name: str) -> None:
    runpy.run_path(str(examples_folder / f"{name}.py"), run_name="__main__")


def check_sweep_dir(out_dir: Path, schemes: set[str], runs: int) -> None:
    results = pd.read_csv(out_dir / "results.csv")
    assert len(results) == runs
    assert set(results["scheme"]) == schemes
    assert results["avg_mos"].dropna().between(1.0, 5.0).all()
    assert len(pd.read_csv(out_dir / "timings.csv")) == runs
    assert len(list((out_dir / "convergence").glob("*.csv"))) == runs
    assert not (out_dir / "results.partial.csv").exists()
    assert deserialize(out_dir / "summary.yaml")
    assert (out_dir / "avg_mos.svg").exists()


def check_small_sweep(out: str) -> None:
    check_sweep_dir(Path("results/small_sweep"), {"jt_noma", "non_jt_oma"}, runs=3 * 2 * 2)


def check_analyse(out: str) -> None:
    assert "Plot written to" in out
    assert Path("results/small_sweep/avg_rate.svg").exists()


def check_solve_instance(out: str) -> None:
    assert "Total QoE:" in out
    assert "MOS per SUT:" in out


def check_compare_schemes(out: str) -> None:
    for scheme in ("jt_noma", "jt_oma", "non_jt_noma", "non_jt_oma"):
        assert scheme in out


def check_oracle_check(out: str) -> None:
    lines = [line for line in out.splitlines() if line.startswith("seed")]
    assert len(lines) == 3
    assert all("0 skipped" in line for line in lines if "oracle " in line)


def check_fixed_lambda(out: str) -> None:
    assert "fixed: total QoE" in out
    assert "per_pair: total QoE" in out


def check_run_scenario(out: str) -> None:
    assert "Worst status:" in out
    check_sweep_dir(Path("results/declarative_example"), {"jt_noma", "jt_oma"}, runs=2 * 2 * 2)


CHECKS = {
    "basic_usage/small_sweep": check_small_sweep,
    "basic_usage/analyse": check_analyse,
    "basic_usage/solve_instance": check_solve_instance,
    "basic_usage/compare_schemes": check_compare_schemes,
    "efficiency/oracle_check": check_oracle_check,
    "efficiency/fixed_lambda": check_fixed_lambda,
    "declarative_usage/run_scenario": check_run_scenario,
}


@pytest.mark.examples
@pytest.mark.parametrize("example", core_examples)
def test_core_examples(example, capsys):
    if example == "basic_usage/analyse":
        # The analysis reads the small sweep
        run_example(core_examples[0])
    capsys.readouterr()
    run_example(example)
    CHECKS[example](capsys.readouterr().out)


@pytest.mark.examples
@pytest.mark.parametrize("example", ci_examples)
def test_ci_examples(example, capsys):
    run_example(example)
    CHECKS[example](capsys.readouterr().out)


@pytest.mark.examples
def test_every_listed_example_is_checked():
    assert set(core_examples) | set(ci_examples) == set(CHECKS)
