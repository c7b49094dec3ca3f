"""Config-driven experiment runner: budget sweeps, seeded replications, tables.

Configs are flat ``key = value`` text files with dotted section keys
(``problem.*``, ``oracle.*``, ``learner.*``, ``optimizer.*``, ``sweep.*``).
Every (budget, replication) cell derives its random streams from
``(base_seed, replication, role)``, so tables are bit-reproducible and
independent of execution order or worker count.  Results are emitted as
versioned CSV (17 significant digits) or JSON mirroring the same rows.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .learners import (LearnerConfig, ORIENTATION_AUTO, adaptive_learner,
                       auto_grid_size, bisect_noiseless, bz_learner,
                       passive_erm)
from .metrics import error_record, fit_rate_slope
from .optimizer import (LINE_SEARCHES, OptimizerConfig, PAPER_DEFAULT,
                        rssgd)
from .oracles import (DirectBernoulli, ExactSign, GaussianNoise, LabelOracle,
                      QuantizedSign, ROLE_LABELS, ROLE_SAMPLING, SignOracle,
                      UniformNoise, seeded_rng)
from .problems import (Interval, ORIENTATIONS, Quadratic, Ridge,
                       SeparablePower, TncProblem, UcFunction, box_from_bounds,
                       load_ridge_text)

SCHEMA_VERSION = 1
JOBS_ENV_VAR = "SIGNOPT_JOBS"

KIND_THRESHOLD = "learn-threshold"
KIND_OPTIMIZE = "optimize"

CSV_COLUMNS = ("experiment_id", "kind", "budget", "replication", "seed",
               "estimate", "point_error", "excess_risk", "f_error",
               "queries_used", "error", "wall_time_ms")


class ConfigError(ValueError):
    """A config file failed validation; the message names the offending key."""


# ---------------------------------------------------------------------------
# config file parsing

_KNOWN_KEYS = {
    "kind", "id", "budget", "report", "output",
    "slope.column", "slope.statistic",
    "problem.lo", "problem.hi", "problem.t", "problem.k", "problem.mu",
    "problem.cap", "problem.orientation",
    "problem.family", "problem.dim", "problem.box_lo", "problem.box_hi",
    "problem.coeffs", "problem.x_star", "problem.a_diag", "problem.a",
    "problem.matrix_file",
    "oracle.mode", "oracle.sigma", "oracle.halfwidth", "oracle.slope",
    "oracle.cap", "oracle.decimals", "oracle.seed", "oracle.budget",
    "learner.name", "learner.confidence", "learner.c_delta",
    "learner.orientation", "learner.grid_size", "learner.bz_k", "learner.bz_mu",
    "optimizer.epoch_rule", "optimizer.line_search", "optimizer.x0",
    "sweep.budgets", "sweep.replications", "sweep.base_seed",
}


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blank lines skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _need(raw: dict, key: str) -> str:
    if key not in raw:
        raise ConfigError(f"{key}: required key is missing")
    return raw[key]


def _get_float(raw: dict, key: str, default=None):
    if key not in raw:
        if default is None:
            raise ConfigError(f"{key}: required key is missing")
        return default
    try:
        return float(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw[key]!r}") from None


def _get_int(raw: dict, key: str, default=None):
    if key not in raw:
        if default is None:
            raise ConfigError(f"{key}: required key is missing")
        return default
    try:
        return int(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw[key]!r}") from None


def _get_floats(raw: dict, key: str):
    try:
        return [float(tok) for tok in raw[key].replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {raw[key]!r}") from None


def _get_ints(raw: dict, key: str):
    try:
        return [int(tok) for tok in raw[key].replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{key}: expected integers, got {raw[key]!r}") from None


@dataclass
class LearnerSpec:
    name: str = "adaptive"
    confidence: float = 0.05
    c_delta: float = 2.0
    orientation: str = "positive-right"
    grid_size: int | str | None = None
    bz_k: float | None = None
    bz_mu: float | None = None


@dataclass
class OracleSpec:
    mode: str = "exact"
    sigma: float = 1.0
    halfwidth: float = 1.0
    slope: float = 1.0
    cap: float = 0.5
    decimals: int = 3
    # optional overrides: re-key the label stream independently of the sweep
    # seed, or cap oracle queries below the cell budget (cells that hit the
    # cap record error rows)
    seed: int | None = None
    budget: int | None = None

    def build(self):
        if self.mode == "additive-gaussian":
            return GaussianNoise(self.sigma)
        if self.mode == "additive-uniform":
            return UniformNoise(self.halfwidth)
        if self.mode == "direct-bernoulli":
            return DirectBernoulli(self.slope, self.cap)
        if self.mode == "exact":
            return ExactSign()
        if self.mode == "quantized":
            return QuantizedSign(self.decimals)
        raise ConfigError(f"oracle.mode: unknown mode {self.mode!r}")


@dataclass
class OptimizerSpec:
    epoch_rule: int | str = PAPER_DEFAULT
    line_search: str = "adaptive"
    x0: str | list[float] = "center"


@dataclass
class ExperimentConfig:
    kind: str
    problem: TncProblem | UcFunction
    experiment_id: str = "exp"
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    oracle: OracleSpec = field(default_factory=OracleSpec)
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    budgets: list[int] | None = None
    replications: int = 1
    base_seed: int = 0
    report: str = "csv"
    output: str | None = None
    slope_column: str = "excess_risk"
    slope_statistic: str = "median"
    single_budget: int | None = None

    def __post_init__(self):
        if self.kind not in (KIND_THRESHOLD, KIND_OPTIMIZE):
            raise ConfigError(f"kind: expected {KIND_THRESHOLD!r} or "
                              f"{KIND_OPTIMIZE!r}, got {self.kind!r}")
        if self.budgets is not None:
            if not self.budgets:
                raise ConfigError("sweep.budgets: must not be empty")
            if any(b < 1 for b in self.budgets):
                raise ConfigError("sweep.budgets: budgets must be positive")
            if any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])):
                raise ConfigError("sweep.budgets: budgets must be strictly increasing")
        if self.replications < 1:
            raise ConfigError("sweep.replications: must be at least 1")
        if self.report not in ("csv", "json", "slope-summary"):
            raise ConfigError(f"report: unknown report kind {self.report!r}")
        if self.slope_statistic not in ("median", "mean"):
            raise ConfigError("slope.statistic: expected 'median' or 'mean'")


def _build_tnc_problem(raw: dict) -> TncProblem:
    try:
        return TncProblem(
            interval=Interval(_get_float(raw, "problem.lo"), _get_float(raw, "problem.hi")),
            threshold=_get_float(raw, "problem.t"),
            exponent=_get_float(raw, "problem.k"),
            mu=_get_float(raw, "problem.mu"),
            cap=_get_float(raw, "problem.cap"),
            orientation=raw.get("problem.orientation", "positive-right"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"problem: {exc}") from exc


def _build_function(raw: dict, base_dir: Path) -> UcFunction:
    family = _need(raw, "problem.family")
    try:
        if family == "ridge":
            path = Path(_need(raw, "problem.matrix_file"))
            if not path.is_absolute():
                path = base_dir / path
            design, targets = load_ridge_text(path)
            box = None
            if "problem.box_lo" in raw and "problem.box_hi" in raw:
                box = box_from_bounds(_get_floats(raw, "problem.box_lo"),
                                      _get_floats(raw, "problem.box_hi"),
                                      dim=design.shape[1])
            return Ridge(design, targets, box)
        dim = _get_int(raw, "problem.dim")
        box = box_from_bounds(_get_floats(raw, "problem.box_lo"),
                              _get_floats(raw, "problem.box_hi"), dim=dim)
        x_star = np.asarray(_get_floats(raw, "problem.x_star"))
        if x_star.size == 1:
            x_star = np.full(dim, x_star[0])
        if family == "separable-power":
            coeffs = np.asarray(_get_floats(raw, "problem.coeffs"))
            if coeffs.size == 1:
                coeffs = np.full(dim, coeffs[0])
            return SeparablePower(coeffs, x_star, box,
                                  exponent=_get_float(raw, "problem.k", 2.0))
        if family == "quadratic":
            if "problem.a_diag" in raw:
                diag = _get_floats(raw, "problem.a_diag")
                matrix = np.diag(np.full(dim, diag[0]) if len(diag) == 1 else diag)
            elif "problem.a" in raw:
                rows = [[float(tok) for tok in row.replace(",", " ").split()]
                        for row in raw["problem.a"].split(";")]
                matrix = np.asarray(rows)
            else:
                raise ConfigError("problem.a_diag or problem.a: required for quadratic")
            return Quadratic(matrix, x_star, box)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"problem: {exc}") from exc
    raise ConfigError(f"problem.family: unknown family {family!r}")


def load_config(path) -> ExperimentConfig:
    """Load and validate an experiment config file."""
    path = Path(path)
    raw = parse_config_text(path.read_text())
    unknown = sorted(set(raw) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    kind = _need(raw, "kind")
    if kind == KIND_THRESHOLD:
        problem: TncProblem | UcFunction = _build_tnc_problem(raw)
    elif kind == KIND_OPTIMIZE:
        problem = _build_function(raw, path.parent)
    else:
        raise ConfigError(f"kind: expected {KIND_THRESHOLD!r} or {KIND_OPTIMIZE!r}, "
                          f"got {kind!r}")

    grid_size: int | str | None = None
    if "learner.grid_size" in raw:
        grid_size = raw["learner.grid_size"]
        if grid_size != "auto":
            grid_size = _get_int(raw, "learner.grid_size")
    learner = LearnerSpec(
        name=raw.get("learner.name", "adaptive"),
        confidence=_get_float(raw, "learner.confidence", 0.05),
        c_delta=_get_float(raw, "learner.c_delta", 2.0),
        orientation=raw.get("learner.orientation", "positive-right"),
        grid_size=grid_size,
        bz_k=_get_float(raw, "learner.bz_k", 0.0) or None,
        bz_mu=_get_float(raw, "learner.bz_mu", 0.0) or None,
    )
    if learner.name not in ("passive", "bz", "adaptive", "bisect"):
        raise ConfigError(f"learner.name: unknown learner {learner.name!r}")
    if learner.orientation not in ORIENTATIONS + (ORIENTATION_AUTO,):
        raise ConfigError(f"learner.orientation: unknown orientation "
                          f"{learner.orientation!r}")
    if learner.name in ("passive", "bisect") and learner.orientation == ORIENTATION_AUTO:
        raise ConfigError("learner.orientation: 'auto' is only supported by the "
                          "adaptive and bz learners")

    oracle = OracleSpec(
        mode=raw.get("oracle.mode", "exact"),
        sigma=_get_float(raw, "oracle.sigma", 1.0),
        halfwidth=_get_float(raw, "oracle.halfwidth", 1.0),
        slope=_get_float(raw, "oracle.slope", 1.0),
        cap=_get_float(raw, "oracle.cap", 0.5),
        decimals=_get_int(raw, "oracle.decimals", 3),
        seed=_get_int(raw, "oracle.seed") if "oracle.seed" in raw else None,
        budget=_get_int(raw, "oracle.budget") if "oracle.budget" in raw else None,
    )
    oracle.build()  # validates the mode name and parameters

    epoch_rule: int | str = raw.get("optimizer.epoch_rule", PAPER_DEFAULT)
    if epoch_rule != PAPER_DEFAULT:
        epoch_rule = _get_int(raw, "optimizer.epoch_rule")
    x0: str | list[float] = raw.get("optimizer.x0", "center")
    if x0 != "center":
        x0 = _get_floats(raw, "optimizer.x0")
    optimizer = OptimizerSpec(
        epoch_rule=epoch_rule,
        line_search=raw.get("optimizer.line_search", "adaptive"),
        x0=x0,
    )
    if optimizer.line_search not in LINE_SEARCHES:
        raise ConfigError(f"optimizer.line_search: expected one of {LINE_SEARCHES}")

    budgets = _get_ints(raw, "sweep.budgets") if "sweep.budgets" in raw else None
    return ExperimentConfig(
        kind=kind,
        problem=problem,
        experiment_id=raw.get("id", path.stem),
        learner=learner,
        oracle=oracle,
        optimizer=optimizer,
        budgets=budgets,
        replications=_get_int(raw, "sweep.replications", 1),
        base_seed=_get_int(raw, "sweep.base_seed", 0),
        report=raw.get("report", "csv"),
        output=raw.get("output"),
        slope_column=raw.get("slope.column", "excess_risk"),
        slope_statistic=raw.get("slope.statistic", "median"),
        single_budget=_get_int(raw, "budget", 0) or None,
    )


# ---------------------------------------------------------------------------
# table rows and serialization

@dataclass
class Row:
    experiment_id: str
    kind: str
    budget: int
    replication: int
    seed: int
    estimate: float | str | None
    point_error: float | None
    excess_risk: float | None
    f_error: float | None
    queries_used: int | None
    error: str
    wall_time_ms: float


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


@dataclass
class RunTable:
    """Rows of one experiment sweep, ordered by (budget, replication)."""

    rows: list[Row]

    def csv_text(self, include_timing: bool = True) -> str:
        cols = CSV_COLUMNS if include_timing else CSV_COLUMNS[:-1]
        lines = [f"# schema_version={SCHEMA_VERSION}", ",".join(cols)]
        for row in self.rows:
            lines.append(",".join(_fmt(getattr(row, c)) for c in cols))
        return "\n".join(lines) + "\n"

    def to_csv(self, path, include_timing: bool = True) -> None:
        Path(path).write_text(self.csv_text(include_timing))

    def json_rows(self) -> list[dict]:
        return [{c: getattr(row, c) for c in CSV_COLUMNS} for row in self.rows]

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.json_rows(), indent=2) + "\n")

    @classmethod
    def from_csv(cls, path) -> "RunTable":
        lines = [ln for ln in Path(path).read_text().splitlines()
                 if ln and not ln.startswith("#")]
        header = lines[0].split(",")
        rows = []
        for line in lines[1:]:
            cells = dict(zip(header, line.split(",")))
            values = {c: _parse_cell(cells.get(c, "")) for c in CSV_COLUMNS}
            values["error"] = cells.get("error", "") or ""
            values["estimate"] = cells.get("estimate", "") or None
            if values["wall_time_ms"] is None:
                values["wall_time_ms"] = 0.0
            rows.append(Row(**values))
        return cls(rows)

    @property
    def n_errors(self) -> int:
        return sum(1 for r in self.rows if r.error)


# ---------------------------------------------------------------------------
# cell execution

def cell_seed(base_seed: int, replication: int) -> int:
    """Stable 64-bit key of the (base_seed, replication) stream family."""
    seq = np.random.SeedSequence((int(base_seed), int(replication)))
    return int(seq.generate_state(1, np.uint64)[0])


def _resolve_grid_size(spec: LearnerSpec, budget: int, replication: int = 0) -> int:
    if spec.grid_size == "auto" or spec.grid_size is None:
        if spec.bz_k is None:
            raise ConfigError("learner.bz_k: required to derive an automatic grid size")
        return auto_grid_size(budget, spec.bz_k, dither=replication)
    return int(spec.grid_size)


def _oracle_stream(config: ExperimentConfig, replication: int):
    seed = config.base_seed if config.oracle.seed is None else config.oracle.seed
    return seeded_rng(seed, replication, ROLE_LABELS)


def _oracle_budget(config: ExperimentConfig, budget: int) -> int:
    if config.oracle.budget is None:
        return budget
    return min(budget, config.oracle.budget)


def _threshold_estimate(config: ExperimentConfig, budget: int, replication: int):
    problem = config.problem
    oracle = LabelOracle(problem, _oracle_stream(config, replication),
                         budget=_oracle_budget(config, budget))
    rng = seeded_rng(config.base_seed, replication, ROLE_SAMPLING)
    spec = config.learner
    search = problem.interval
    if spec.name == "passive":
        point = passive_erm(oracle, search, budget, spec.orientation, rng)
    elif spec.name == "adaptive":
        cfg = LearnerConfig(budget=budget, confidence=spec.confidence,
                            c_delta=spec.c_delta, orientation=spec.orientation)
        point = adaptive_learner(oracle, search, cfg, rng).point
    elif spec.name == "bz":
        cfg = LearnerConfig(budget=budget, confidence=spec.confidence,
                            c_delta=spec.c_delta, orientation=spec.orientation,
                            grid_size=_resolve_grid_size(spec, budget, replication),
                            bz_k=spec.bz_k, bz_mu=spec.bz_mu)
        point = bz_learner(oracle, search, cfg).point
    elif spec.name == "bisect":
        point = bisect_noiseless(oracle, search, budget, spec.orientation)
    else:
        raise ConfigError(f"learner.name: unknown learner {spec.name!r}")
    return point, oracle.queries_used


def _line_search_options(config: ExperimentConfig, budget: int) -> dict:
    spec = config.learner
    name = config.optimizer.line_search
    if name == "adaptive":
        return {"confidence": spec.confidence, "c_delta": spec.c_delta}
    if name == "bz":
        epochs = OptimizerConfig(budget=budget,
                                 epoch_rule=config.optimizer.epoch_rule,
                                 line_search="bz").epoch_count(config.problem.dim)
        per_epoch = max(1, budget // epochs)
        return {"grid_size": _resolve_grid_size(spec, per_epoch),
                "bz_k": spec.bz_k, "bz_mu": spec.bz_mu}
    return {}


def _optimize_estimate(config: ExperimentConfig, budget: int, replication: int):
    fn = config.problem
    oracle = SignOracle(fn, config.oracle.build(),
                        _oracle_stream(config, replication),
                        budget=_oracle_budget(config, budget))
    opt = config.optimizer
    x0 = None if opt.x0 == "center" else np.asarray(opt.x0, dtype=float)
    cfg = OptimizerConfig(budget=budget, epoch_rule=opt.epoch_rule,
                          line_search=opt.line_search,
                          line_search_options=_line_search_options(config, budget),
                          seed=(config.base_seed, replication))
    result = rssgd(fn, oracle, cfg, x0)
    return result.x_final, result.queries_used


def run_cell(config: ExperimentConfig, budget: int, replication: int) -> Row:
    """Execute one (budget, replication) cell; failures become error rows."""
    start = time.perf_counter()
    seed = cell_seed(config.base_seed, replication)
    estimate: float | str | None = None
    point_error = risk = f_error = queries = None
    error = ""
    try:
        if config.kind == KIND_THRESHOLD:
            point, queries = _threshold_estimate(config, budget, replication)
            rec = error_record(config.problem, point)
            estimate = float(point)
            point_error, risk = rec.point_error, rec.excess_risk
        else:
            x_final, queries = _optimize_estimate(config, budget, replication)
            rec = error_record(config.problem, x_final)
            estimate = " ".join(f"{v:.17g}" for v in x_final)
            point_error, f_error = rec.point_error, rec.f_error
    except Exception as exc:  # noqa: BLE001 - a cell failure must not kill the sweep
        error = f"{type(exc).__name__}: {exc}"
    wall = (time.perf_counter() - start) * 1e3
    return Row(experiment_id=config.experiment_id, kind=config.kind, budget=budget,
               replication=replication, seed=seed, estimate=estimate,
               point_error=point_error, excess_risk=risk, f_error=f_error,
               queries_used=queries, error=error, wall_time_ms=wall)


def _run_cell_star(args) -> Row:
    return run_cell(*args)


def resolve_jobs(n_jobs: int | None) -> int:
    if n_jobs is not None:
        return max(1, int(n_jobs))
    env = os.environ.get(JOBS_ENV_VAR)
    return max(1, int(env)) if env else 1


def run_experiment(config: ExperimentConfig, n_jobs: int | None = None) -> RunTable:
    """Run every (budget, replication) cell of the sweep.

    Identical configs produce identical tables regardless of worker count;
    rows are assembled in (budget, replication) order.
    """
    if config.budgets is None:
        raise ConfigError("sweep.budgets: required to run a sweep")
    cells = [(config, budget, rep)
             for budget in config.budgets
             for rep in range(config.replications)]
    n_jobs = resolve_jobs(n_jobs)
    if n_jobs == 1:
        rows = [run_cell(*cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_run_cell_star, cells, chunksize=1))
    rows.sort(key=lambda r: (r.budget, r.replication))
    return RunTable(rows)


# ---------------------------------------------------------------------------
# slope reports

@dataclass
class BudgetSummary:
    budget: int
    value: float
    n_rows: int
    n_zero: int


@dataclass
class SlopeReport:
    slope: float
    intercept: float
    max_residual: float
    statistic: str
    error_column: str
    per_budget: list[BudgetSummary]
    excluded_budgets: list[int]
    n_error_rows: int
    n_excluded_zero: int

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
            "statistic": self.statistic,
            "error_column": self.error_column,
            "per_budget": [vars(b) for b in self.per_budget],
            "excluded_budgets": self.excluded_budgets,
            "n_error_rows": self.n_error_rows,
            "n_excluded_zero": self.n_excluded_zero,
        }


def slope_report(table: RunTable, statistic: str = "median",
                 error_column: str = "excess_risk") -> SlopeReport:
    """Aggregate one error column per budget and fit the log-log slope."""
    if statistic not in ("median", "mean"):
        raise ValueError("statistic must be 'median' or 'mean'")
    if error_column not in ("excess_risk", "f_error", "point_error"):
        raise ValueError(f"unknown error column {error_column!r}")
    if not table.rows:
        raise ValueError("empty table")
    groups: dict[int, list[float]] = {}
    n_error_rows = 0
    for row in table.rows:
        if row.error:
            n_error_rows += 1
            continue
        value = getattr(row, error_column)
        if value is None:
            n_error_rows += 1
            continue
        groups.setdefault(row.budget, []).append(float(value))
    if not groups:
        raise ValueError(f"no usable rows for column {error_column!r}")
    summaries = []
    for budget in sorted(groups):
        values = np.asarray(groups[budget])
        agg = float(np.median(values)) if statistic == "median" else float(values.mean())
        summaries.append(BudgetSummary(budget=budget, value=agg, n_rows=values.size,
                                       n_zero=int(np.count_nonzero(values == 0.0))))
    usable = [(s.budget, s.value) for s in summaries if s.value > 0.0]
    excluded = [s.budget for s in summaries if s.value <= 0.0]
    if len(usable) < 2:
        raise ValueError(f"need at least 2 budgets with positive {statistic} "
                         f"{error_column}, have {len(usable)}")
    fit = fit_rate_slope(usable)
    return SlopeReport(slope=fit.slope, intercept=fit.intercept,
                       max_residual=fit.max_residual, statistic=statistic,
                       error_column=error_column, per_budget=summaries,
                       excluded_budgets=excluded, n_error_rows=n_error_rows,
                       n_excluded_zero=fit.n_excluded)
