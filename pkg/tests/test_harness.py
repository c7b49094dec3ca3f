import json

import numpy as np
import pytest

from signopt import ConfigError, RunTable, load_config, run_experiment, slope_report
from signopt.harness import (ExperimentConfig, LearnerSpec, OptimizerSpec,
                             OracleSpec, Row, cell_seed, parse_config_text)
from signopt import make_tnc_problem

THRESHOLD_CFG = """
# adaptive learner on a quadratic-margin problem
kind = learn-threshold
id = demo
problem.lo = 0.0
problem.hi = 1.0
problem.t = 0.37
problem.k = 2.0
problem.mu = 1.0
problem.cap = 0.4
learner.name = adaptive
learner.c_delta = 2.0
sweep.budgets = 64, 128
sweep.replications = 2
sweep.base_seed = 5
report = csv
"""

OPTIMIZE_CFG = """
kind = optimize
id = opt-demo
problem.family = quadratic
problem.dim = 2
problem.a_diag = 1.0, 2.0
problem.x_star = 0.3, -0.2
problem.box_lo = -1.0
problem.box_hi = 1.0
oracle.mode = additive-gaussian
oracle.sigma = 1.0
optimizer.line_search = adaptive
learner.c_delta = 3.0
sweep.budgets = 256, 512
sweep.replications = 2
sweep.base_seed = 9
budget = 512
"""


def _load(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return load_config(path)


# ---------------------------------------------------------------------------
# config parsing

def test_parse_flat_keys_and_comments():
    raw = parse_config_text("a.b = 1  # trailing\n\n# full comment\nc = x\n")
    assert raw == {"a.b": "1", "c": "x"}


def test_parse_rejects_duplicates_and_garbage():
    with pytest.raises(ConfigError):
        parse_config_text("a = 1\na = 2\n")
    with pytest.raises(ConfigError):
        parse_config_text("just some words\n")


def test_load_threshold_config(tmp_path):
    config = _load(tmp_path, THRESHOLD_CFG)
    assert config.kind == "learn-threshold"
    assert config.experiment_id == "demo"
    assert config.budgets == [64, 128]
    assert config.problem.threshold == 0.37


def test_load_optimize_config(tmp_path):
    config = _load(tmp_path, OPTIMIZE_CFG)
    assert config.kind == "optimize"
    assert config.problem.dim == 2
    assert config.single_budget == 512


def test_unknown_key_is_an_error(tmp_path):
    with pytest.raises(ConfigError, match="problem.tt"):
        _load(tmp_path, THRESHOLD_CFG.replace("problem.t =", "problem.tt ="))


def test_budgets_must_increase(tmp_path):
    with pytest.raises(ConfigError, match="budgets"):
        _load(tmp_path, THRESHOLD_CFG.replace("64, 128", "128, 64"))


def test_bad_number_names_the_key(tmp_path):
    with pytest.raises(ConfigError, match="problem.mu"):
        _load(tmp_path, THRESHOLD_CFG.replace("problem.mu = 1.0",
                                              "problem.mu = one"))


def test_invalid_problem_is_reported(tmp_path):
    with pytest.raises(ConfigError, match="problem"):
        _load(tmp_path, THRESHOLD_CFG.replace("problem.t = 0.37",
                                              "problem.t = 1.37"))


def test_ridge_config_via_matrix_file(tmp_path):
    (tmp_path / "design.txt").write_text(
        "3 2\n1.0 0.0\n0.0 1.0\n1.0 1.0\n0.5 -0.5 0.25\n")
    text = """
kind = optimize
id = ridge-demo
problem.family = ridge
problem.matrix_file = design.txt
oracle.mode = exact
optimizer.line_search = bisect
optimizer.epoch_rule = 20
sweep.budgets = 400
sweep.replications = 1
"""
    config = _load(tmp_path, text)
    assert config.problem.dim == 2
    table = run_experiment(config)
    assert len(table.rows) == 1
    assert table.rows[0].error == ""
    assert table.rows[0].f_error <= 1e-6


# ---------------------------------------------------------------------------
# running sweeps

def _small_config(**overrides):
    problem = make_tnc_problem((0.0, 1.0), 0.37, 2.0, 1.0, 0.4)
    defaults = dict(kind="learn-threshold", problem=problem,
                    experiment_id="unit", learner=LearnerSpec(name="adaptive"),
                    budgets=[32, 64], replications=2, base_seed=1)
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


def test_cell_count_and_ordering():
    table = run_experiment(_small_config())
    assert len(table.rows) == 4
    assert [(r.budget, r.replication) for r in table.rows] == \
        [(32, 0), (32, 1), (64, 0), (64, 1)]


def test_identical_configs_give_identical_tables():
    a = run_experiment(_small_config()).csv_text(include_timing=False)
    b = run_experiment(_small_config()).csv_text(include_timing=False)
    assert a == b


def test_parallel_equals_serial():
    serial = run_experiment(_small_config(), n_jobs=1)
    parallel = run_experiment(_small_config(), n_jobs=2)
    assert serial.csv_text(include_timing=False) == \
        parallel.csv_text(include_timing=False)


def test_budget_honesty_column():
    table = run_experiment(_small_config())
    for row in table.rows:
        assert row.queries_used <= row.budget


def test_replication_streams_are_independent_of_each_other():
    wide = _small_config(replications=3)
    narrow = _small_config(replications=2)
    wide_rows = {(r.budget, r.replication): r.estimate
                 for r in run_experiment(wide).rows}
    for row in run_experiment(narrow).rows:
        assert wide_rows[(row.budget, row.replication)] == row.estimate


def test_error_rows_do_not_kill_the_sweep():
    # the default schedule needs 13+ epochs in d = 2 at these budgets, so
    # every cell fails, but each failure is recorded rather than raised
    config = ExperimentConfig(
        kind="optimize",
        problem=_opt_problem(),
        experiment_id="failing",
        oracle=OracleSpec(mode="exact"),
        optimizer=OptimizerSpec(),
        budgets=[8, 12], replications=2, base_seed=0)
    table = run_experiment(config)
    assert len(table.rows) == 4
    assert table.n_errors == 4
    assert all("epoch" in r.error for r in table.rows)


def _opt_problem():
    from signopt import Quadratic, box_from_bounds
    return Quadratic(np.diag([1.0, 2.0]), [0.2, -0.1],
                     box_from_bounds(-1.0, 1.0, dim=2))


def test_optimize_cells_record_vector_estimates():
    config = ExperimentConfig(
        kind="optimize", problem=_opt_problem(), experiment_id="vec",
        oracle=OracleSpec(mode="exact"),
        optimizer=OptimizerSpec(line_search="bisect", epoch_rule=20),
        budgets=[400], replications=1, base_seed=2)
    row = run_experiment(config).rows[0]
    vec = [float(tok) for tok in row.estimate.split()]
    assert len(vec) == 2
    assert row.f_error is not None and row.excess_risk is None


def test_cell_seed_is_stable():
    assert cell_seed(5, 0) == cell_seed(5, 0)
    assert cell_seed(5, 0) != cell_seed(5, 1)
    assert cell_seed(6, 0) != cell_seed(5, 0)


@pytest.mark.parametrize("name", ["passive", "bisect", "adaptive", "bz"])
def test_every_learner_runs_through_the_harness(name):
    spec = LearnerSpec(name=name)
    if name == "bz":
        spec = LearnerSpec(name=name, grid_size="auto", bz_k=2.0, bz_mu=1.0)
    table = run_experiment(_small_config(learner=spec, budgets=[128]))
    assert table.n_errors == 0
    for row in table.rows:
        assert 0.0 <= float(row.estimate) <= 1.0
        assert row.queries_used <= 128


def test_oracle_seed_override_fixes_the_label_stream():
    # same oracle.seed, different sweep seeds: label streams coincide, so the
    # only variation left is the learner's own sampling stream
    a = _small_config(base_seed=1, oracle=OracleSpec(seed=42))
    b = _small_config(base_seed=1)
    rows_a = run_experiment(a).rows
    rows_b = run_experiment(b).rows
    assert [r.estimate for r in rows_a] != [r.estimate for r in rows_b]
    again = run_experiment(_small_config(base_seed=1, oracle=OracleSpec(seed=42)))
    assert [r.estimate for r in again.rows] == [r.estimate for r in rows_a]


def test_oracle_budget_cap_records_error_rows():
    config = _small_config(learner=LearnerSpec(name="bisect"),
                           oracle=OracleSpec(budget=16), budgets=[64])
    table = run_experiment(config)
    assert table.n_errors == len(table.rows)
    assert all("Budget" in r.error for r in table.rows)


def test_jobs_env_var_sets_default_concurrency(monkeypatch):
    from signopt.harness import resolve_jobs
    monkeypatch.delenv("SIGNOPT_JOBS", raising=False)
    assert resolve_jobs(None) == 1
    monkeypatch.setenv("SIGNOPT_JOBS", "3")
    assert resolve_jobs(None) == 3
    assert resolve_jobs(2) == 2  # explicit argument wins


# ---------------------------------------------------------------------------
# serialization

def test_csv_roundtrip(tmp_path):
    table = run_experiment(_small_config())
    path = tmp_path / "out.csv"
    table.to_csv(path)
    text = path.read_text()
    assert text.startswith("# schema_version=1\n")
    back = RunTable.from_csv(path)
    assert len(back.rows) == len(table.rows)
    for a, b in zip(back.rows, table.rows):
        assert a.budget == b.budget and a.replication == b.replication
        assert a.point_error == pytest.approx(b.point_error, rel=1e-15)
        assert a.excess_risk == pytest.approx(b.excess_risk, rel=1e-15)


def test_json_mirrors_rows(tmp_path):
    table = run_experiment(_small_config())
    path = tmp_path / "out.json"
    table.to_json(path)
    rows = json.loads(path.read_text())
    assert len(rows) == len(table.rows)
    assert rows[0]["budget"] == 32
    assert set(rows[0]) == {"experiment_id", "kind", "budget", "replication",
                            "seed", "estimate", "point_error", "excess_risk",
                            "f_error", "queries_used", "error", "wall_time_ms"}


# ---------------------------------------------------------------------------
# slope reports

def _table_from(values):
    rows = []
    for budget, errs in values.items():
        for rep, err in enumerate(errs):
            rows.append(Row(experiment_id="t", kind="learn-threshold",
                            budget=budget, replication=rep, seed=rep,
                            estimate=0.0, point_error=err, excess_risk=err,
                            f_error=None, queries_used=budget, error="",
                            wall_time_ms=0.0))
    return RunTable(rows)


def test_slope_report_exact_line():
    table = _table_from({10: [1.0, 1.0], 100: [0.1, 0.1], 1000: [0.01, 0.01]})
    report = slope_report(table, "median", "excess_risk")
    assert report.slope == pytest.approx(-1.0, abs=1e-12)
    assert [b.budget for b in report.per_budget] == [10, 100, 1000]


def test_slope_report_single_budget_fails():
    with pytest.raises(ValueError):
        slope_report(_table_from({10: [1.0]}), "median", "excess_risk")


def test_slope_report_excludes_zero_median_budgets():
    table = _table_from({10: [1.0], 100: [0.1], 1000: [0.0]})
    report = slope_report(table, "median", "excess_risk")
    assert report.excluded_budgets == [1000]
    assert report.slope == pytest.approx(-1.0, abs=1e-12)


def test_slope_report_mean_statistic():
    table = _table_from({10: [1.0, 3.0], 100: [0.1, 0.3]})
    report = slope_report(table, "mean", "excess_risk")
    assert report.per_budget[0].value == pytest.approx(2.0)


def test_slope_report_rejects_unknown_column():
    with pytest.raises(ValueError):
        slope_report(_table_from({10: [1.0], 100: [0.1]}), "median", "elbow")
