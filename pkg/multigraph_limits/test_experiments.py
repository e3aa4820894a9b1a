"""
Tests for the verification experiments and their report writers
"""
import io
import json

import pandas as pd
import pytest
from pydantic import ValidationError

from multigraph_limits.config import THRESHOLDS, Settings, Thresholds
from multigraph_limits.errors import DomainError
from multigraph_limits.experiments import (
    EXPERIMENT_DEFAULTS,
    PLOT_COLUMNS,
    ExperimentRunner,
    density_patterns,
    emit_plot_data,
    pattern_label,
    render_report,
)
from multigraph_limits.models import ExperimentConfig, ExperimentName, ExperimentReport, OutputFormat, ReportRow


@pytest.fixture
def runner():
    return ExperimentRunner(THRESHOLDS, Settings(workers=1))


def make_config(name: ExperimentName, **overrides) -> ExperimentConfig:
    values = dict(EXPERIMENT_DEFAULTS[name])
    if "rho" in overrides:
        values.pop("m", None)
    if "m" in overrides:
        values.pop("rho", None)
    values.update(overrides)
    return ExperimentConfig(experiment=name, **values)


class TestExperimentConfig:
    def test_both_sizes_rejected(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(experiment="degree-gamma", n=10, m=5, rho=1.0)

    def test_one_size_required(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(experiment="degree-gamma", n=10)

    def test_exact_small_needs_m(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(experiment="exact-small", n=2, rho=1.0)

    def test_edge_count_from_density(self):
        config = ExperimentConfig(experiment="degree-gamma", n=7, rho=1.0)
        assert config.edge_count == 24
        assert config.density == 1.0

    def test_density_from_edge_count(self):
        config = ExperimentConfig(experiment="exact-small", n=4, m=4)
        assert config.density == pytest.approx(0.5)

    def test_sizes_from_string(self):
        config = ExperimentConfig(experiment="ui-diagnostic", n=10, rho=2.0, sizes="100, 200,400")
        assert config.sweep == [100, 200, 400]
        assert config.edge_count_for(200) == 40_000

    def test_too_sparse(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(experiment="degree-gamma", n=1, rho=1.0)

    def test_unknown_experiment(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(experiment="no-such-thing", n=2, m=1)


class TestExactSmall:
    @pytest.mark.parametrize("n,m,kappa", [(2, 2, 1.0), (3, 2, 0.5), (2, 3, 2.0)])
    def test_passes(self, runner, n, m, kappa):
        report = runner.run(ExperimentConfig(experiment="exact-small", n=n, m=m, kappa=kappa))
        assert report.passed
        assert {check.name for check in report.checks} >= {"tv_pag_vs_stationary", "kernel_commutation_gap"}
        assert all(row.value < 1e-10 for row in report.rows)

    def test_failing_threshold_fails_the_report(self):
        strict = ExperimentRunner(Thresholds(exact_tolerance=-1.0), Settings(workers=1))
        report = strict.run(ExperimentConfig(experiment="exact-small", n=2, m=1))
        assert not report.passed

    def test_provenance_records_merged_config(self, runner):
        report = runner.run(ExperimentConfig(experiment="exact-small", n=2, m=1, seed=7))
        assert report.provenance["seed"] == 7
        assert report.provenance["experiment"] == "exact-small"
        assert report.provenance["rho"] is None


class TestSampledExperiments:
    def test_config_model(self):
        relaxed = ExperimentRunner(Thresholds(sigma_multiplier=4.0), Settings(workers=1))
        report = relaxed.run(make_config(ExperimentName.CONFIG_MODEL, samples=6000, seed=3))
        assert report.passed
        values = {row.statistic: row.value for row in report.rows}
        assert values["double_edge_exact"] == pytest.approx(2 / 3, abs=1e-12)
        assert values["two_loops_exact"] == pytest.approx(1 / 3, abs=1e-12)

    def test_reports_are_reproducible(self, runner):
        config = make_config(ExperimentName.CONFIG_MODEL, samples=500, seed=11)
        first = render_report(runner.run(config), OutputFormat.JSON)
        second = render_report(runner.run(config), OutputFormat.JSON)
        assert first == second

    def test_worker_count_does_not_change_the_report(self, runner):
        config = make_config(ExperimentName.CONFIG_MODEL, samples=500, seed=11)
        pooled = ExperimentRunner(THRESHOLDS, Settings(workers=2)).run(config)
        assert pooled.rows == runner.run(config).rows

    def test_graphon_consistency(self, runner):
        report = runner.run(make_config(ExperimentName.GRAPHON_CONSISTENCY, samples=20))
        assert report.passed, [check for check in report.checks if not check.passed]

    def test_ui_diagnostic_small_sweep(self, runner):
        report = runner.run(make_config(ExperimentName.UI_DIAGNOSTIC, n=60, sizes=[40, 60]))
        assert report.passed
        assert {row.n for row in report.rows} == {40, 60}
        assert sum(row.statistic.startswith("offdiag_tail@") for row in report.rows) == 16

    def test_edge_poisson_needs_enough_pairs(self, runner):
        with pytest.raises(DomainError):
            runner.run(make_config(ExperimentName.EDGE_POISSON, n=2, m=1, samples=100))


@pytest.mark.slow
class TestAcceptanceRuns:
    @pytest.mark.parametrize(
        "name",
        [
            ExperimentName.DEGREE_GAMMA,
            ExperimentName.EDGE_POISSON,
            ExperimentName.DENSITY_CONVERGENCE,
            ExperimentName.SPAG_CHECK,
            ExperimentName.MOMENT_IDENTITY,
        ],
    )
    def test_default_configuration_passes(self, runner, name):
        report = runner.run(make_config(name))
        assert report.passed, [check for check in report.checks if not check.passed]

    def test_degree_gamma_sweep_decreases(self, runner):
        report = runner.run(make_config(ExperimentName.DEGREE_GAMMA, sizes=[100, 200, 400]))
        checks = {check.name: check for check in report.checks}
        assert checks["ks_median_decreasing"].passed, checks["ks_median_decreasing"].detail
        assert all(checks[f"ks_median_below_bound[n={n}]"].passed for n in (100, 200, 400))
        assert report.passed
        medians = {row.n: row.value for row in report.rows if row.statistic == "ks_median"}
        assert medians[100] > medians[200] > medians[400]


class TestReportWriters:
    def test_header_only_csv(self):
        assert emit_plot_data(ExperimentReport(experiment="exact-small")) == "experiment,n,statistic,value\n"

    def test_csv_parses_back(self):
        report = ExperimentReport(
            experiment="ui-diagnostic",
            rows=[
                ReportRow(experiment="ui-diagnostic", n=100, statistic="diag_tail@1", value=0.25),
                ReportRow(experiment="ui-diagnostic", n=200, statistic="diag_tail@1", value=0.125),
            ],
        )
        frame = pd.read_csv(io.StringIO(emit_plot_data(report)))
        assert list(frame.columns) == PLOT_COLUMNS
        assert frame["n"].tolist() == [100, 200]
        assert frame["value"].tolist() == [0.25, 0.125]

    def test_csv_format_is_plot_data(self, runner):
        report = runner.run(ExperimentConfig(experiment="exact-small", n=2, m=1))
        assert render_report(report, OutputFormat.CSV) == emit_plot_data(report)

    def test_json_round_trip(self, runner):
        report = runner.run(ExperimentConfig(experiment="exact-small", n=2, m=1))
        text = render_report(report, OutputFormat.JSON)
        assert text.endswith("\n")
        assert ExperimentReport.model_validate_json(text) == report
        assert json.loads(text)["experiment"] == "exact-small"


def test_density_patterns():
    patterns = density_patterns()
    assert len(patterns) == 36
    assert len(set(patterns)) == 36
    assert pattern_label(patterns[1]) == "[[0,0],[0,2]]"
