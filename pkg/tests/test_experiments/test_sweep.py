from __future__ import annotations

import pandas as pd
import pytest

from jtnoma import InvalidConfigError, ScenarioSpec, run_sweep
from jtnoma.experiments import ScenarioConfigs, SweepResult, trend_statistics
from jtnoma.experiments.sweep import RESULT_COLUMNS, SCHEMA_VERSION, run_stem
from jtnoma.utils.files import deserialize
from tests.settings import fast_settings

NETWORK = {"num_sbs": 2, "num_put": 1, "num_subcarriers": 2}


def tiny_spec(out_dir, **overrides) -> ScenarioSpec:
    kwargs = {
        "axis": "num_sut",
        "values": [2, 0],
        "seeds": [0],
        "schemes": ["non_jt_oma"],
        "network": dict(NETWORK),
        "solver": fast_settings(max_outer_iters=1),
        "out_dir": out_dir,
        **overrides,
    }
    return ScenarioSpec(**kwargs)


@pytest.fixture(name="sweep_result")
def fixture_sweep_result(tmp_path) -> SweepResult:
    return run_sweep(tiny_spec(tmp_path / "sweep"))


@pytest.mark.core
@pytest.mark.parametrize(
    ("overrides", "message"),
    [
        ({"axis": "num_sbs"}, "Unknown sweep axis 'num_sbs'"),
        ({"values": []}, "at least one axis value"),
        ({"seeds": []}, "at least one seed"),
        ({"schemes": []}, "at least one scheme"),
        ({"network": {"num_sut": 3}}, "set by the sweep"),
        ({"network": {"rng_seed": 3}}, "set by the sweep"),
        ({"network": {"num_users": 3}}, "of section 'network' are not valid"),
        ({"schemes": ["tdma"]}, "Unknown scheme 'tdma'"),
    ],
)
def test_spec_is_checked(tmp_path, overrides, message):
    with pytest.raises(InvalidConfigError, match=message):
        tiny_spec(tmp_path, **overrides)


@pytest.mark.core
def test_cells_and_configs(tmp_path):
    spec = tiny_spec(tmp_path, values=[2, 3], seeds=[5, 6])
    assert list(spec.cells()) == [(2, 5), (2, 6), (3, 5), (3, 6)]
    config = spec.config_for(3, 6)
    assert config.num_sut == 3
    assert config.rng_seed == 6
    assert config.num_sbs == 2


@pytest.mark.core
def test_spec_from_yaml(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text(
        "sweep:\n"
        "  service: video\n"
        "  axis: num_subcarriers\n"
        "  values: [2, 4]\n"
        "  seeds: [0, 1]\n"
        "  schemes: [jt_noma, jt_oma]\n"
        "network:\n"
        "  num_sbs: 2\n"
        "solver:\n"
        "  max_outer_iters: 3\n"
    )
    spec = ScenarioSpec.from_yaml(path)
    assert spec.service.name == "VIDEO"
    assert spec.axis.value == "num_subcarriers"
    assert [s.value for s in spec.schemes] == ["jt_noma", "jt_oma"]
    assert spec.solver.max_outer_iters == 3
    assert spec.config_for(4, 1).num_sut == 10


@pytest.mark.core
def test_nested_sections_are_rejected():
    with pytest.raises(InvalidConfigError, match="'solver' is a top-level section"):
        ScenarioSpec.from_dict({"sweep": {"values": [2], "seeds": [0], "solver": {}}})


@pytest.mark.core
def test_builtin_scenarios():
    assert ScenarioConfigs.get_scenarios() == ["audio", "video", "web"]
    for name in ScenarioConfigs.get_scenarios():
        spec = ScenarioSpec.from_yaml(ScenarioConfigs.get_scenario_path(name))
        assert spec.service.name.lower() == name
    with pytest.raises(InvalidConfigError, match="Unknown scenario 'gaming'"):
        ScenarioConfigs.get_scenario_path("gaming")


@pytest.mark.core
def test_sweep_writes_sorted_results(sweep_result):
    out_dir = sweep_result.out_dir
    results = pd.read_csv(out_dir / "results.csv")
    assert list(results.columns) == RESULT_COLUMNS
    assert results["value"].tolist() == [0, 2]
    assert set(results["schema_version"]) == {SCHEMA_VERSION}
    assert not (out_dir / "results.partial.csv").exists()

    failed = results.iloc[0]
    assert failed["status"] == "error"
    assert "num_sut=0" in failed["message"]
    assert not failed["feasible"]
    assert sweep_result.worst_status == "error"

    solved = results.iloc[1]
    assert solved["status"] in {"converged", "not_converged", "infeasible"}
    assert solved["outer_iterations"] <= 1


@pytest.mark.core
def test_sweep_writes_per_run_files(sweep_result):
    out_dir = sweep_result.out_dir
    stem = run_stem(tiny_spec(out_dir).axis, 2, 0, tiny_spec(out_dir).schemes[0])
    assert stem == "num_sut_2_seed0_non_jt_oma"
    convergence = pd.read_csv(out_dir / "convergence" / f"{stem}.csv")
    assert "outer" in set(convergence["phase"])
    assert not (out_dir / "convergence" / "num_sut_0_seed0_non_jt_oma.csv").exists()

    timings = pd.read_csv(out_dir / "timings.csv")
    assert timings["value"].tolist() == [2]
    assert (out_dir / "avg_mos.svg").stat().st_size > 0

    summary = deserialize(out_dir / "summary.yaml")
    assert summary["schema_version"] == SCHEMA_VERSION
    assert summary["axis"] == "num_sut"
    assert summary["runs"] == 2
    assert summary["status_counts"]["error"] == 1


@pytest.mark.core
def test_reruns_give_identical_results(tmp_path):
    first = run_sweep(tiny_spec(tmp_path / "first", values=[2]))
    second = run_sweep(tiny_spec(tmp_path / "second", values=[2]))
    for name in ("results.csv", "summary.yaml", "avg_mos.svg"):
        assert (first.out_dir / name).read_bytes() == (second.out_dir / name).read_bytes()


@pytest.mark.core
def test_worst_status_precedence(tmp_path):
    def result(*statuses):
        return SweepResult(results=pd.DataFrame({"status": statuses}), out_dir=tmp_path)

    assert result("converged", "converged").worst_status == "converged"
    assert result("converged", "not_converged").worst_status == "not_converged"
    assert result("not_converged", "infeasible").worst_status == "infeasible"
    assert result("infeasible", "error").worst_status == "error"


@pytest.mark.acceptance
@pytest.mark.parametrize(("scenario", "sign"), [("web", -1), ("video", -1), ("audio", 1)])
def test_builtin_scenario_trends(tmp_path, scenario, sign):
    spec = ScenarioSpec.from_yaml(ScenarioConfigs.get_scenario_path(scenario))
    spec.schemes = spec.schemes[:1]
    spec.out_dir = tmp_path
    result = run_sweep(spec)
    trend = trend_statistics(result.results)[spec.schemes[0].value]
    assert sign * trend["rho"] > 0
    assert trend["p_value"] < 0.05
