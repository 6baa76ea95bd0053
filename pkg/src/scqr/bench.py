"""Simulation benchmark: scenarios, timed replications, aggregate tables."""

from __future__ import annotations

import csv
import enum
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import Dataset
from .estimator import make_settings
from .simulate import (
    STREAM_DATA,
    STREAM_PILOT,
    ErrorLaw,
    ar1_design,
    default_beta_star,
    draw_errors,
    model_error,
    rng_for,
)
from .tuning import (
    METHOD_ADMM,
    METHOD_SCQR,
    FitSettings,
    LambdaGrid,
    cross_validate,
    default_lambda_grid,
    fit_path,
    fold_labels,
    pivotal_lambda,
    select_bic,
    DEFAULT_PIVOTAL_C,
)


class BenchMethod(str, enum.Enum):
    ADMM_LASSO = "cqr-admm-lasso"
    SCQR_LASSO = "scqr-lasso"
    SCQR_SCAD = "scqr-scad"
    SCQR_MCP = "scqr-mcp"

    @property
    def solver(self) -> str:
        return METHOD_ADMM if self is BenchMethod.ADMM_LASSO else METHOD_SCQR

    @property
    def penalty(self) -> str:
        return {"cqr-admm-lasso": "l1", "scqr-lasso": "l1",
                "scqr-scad": "scad", "scqr-mcp": "mcp"}[self.value]


class Tuning(str, enum.Enum):
    FIXED = "fixed"
    CV = "cv"
    BIC = "bic"
    PIVOTAL = "pivotal"
    ORACLE = "oracle-scan"


@dataclass(frozen=True)
class Scenario:
    """One benchmark cell.

    ``lam`` is required for fixed tuning. ``lambdas`` overrides the lambda
    sequence used by cv, bic and oracle-scan; when absent a geometric grid of
    ``num_lambdas`` values is anchored at the lambda_max of the first pilot (or
    first evaluation) data set. All lambdas live on the standardized scale.
    """

    n: int
    p: int
    error_law: ErrorLaw = ErrorLaw.NORMAL3
    method: BenchMethod = BenchMethod.SCQR_LASSO
    tuning: Tuning = Tuning.PIVOTAL
    replications: int = 20
    seed: int = 0
    rho: float = 0.5
    beta_star: Optional[Tuple[float, ...]] = None
    lam: Optional[float] = None
    lambdas: Optional[Tuple[float, ...]] = None
    num_lambdas: int = 50
    lambda_ratio: float = 0.01
    pilot_replications: int = 0
    q: int = 19
    folds: int = 5
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "error_law", ErrorLaw(self.error_law))
        object.__setattr__(self, "method", BenchMethod(self.method))
        object.__setattr__(self, "tuning", Tuning(self.tuning))
        if self.n < 2 or self.p < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got n={self.n}, p={self.p}")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        if self.replications < 0 or self.pilot_replications < 0:
            raise ValueError("replication counts must be nonnegative")
        if self.beta_star is None:
            object.__setattr__(self, "beta_star", tuple(float(b) for b in default_beta_star(self.p)))
        elif len(self.beta_star) != self.p:
            raise ValueError("beta_star must have length p")
        if self.tuning is Tuning.FIXED and self.lam is None:
            raise ValueError("fixed tuning needs lam")
        if self.tuning is Tuning.ORACLE and self.pilot_replications < 1:
            raise ValueError("oracle-scan needs at least one pilot replication")

    @property
    def id(self) -> str:
        if self.name:
            return self.name
        return f"{self.method.value}/{self.error_law.value}/n{self.n}p{self.p}/{self.tuning.value}"

    @property
    def true_support(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.beta_star) != 0)


class SimulatedData(NamedTuple):
    data: Dataset
    beta_star: np.ndarray
    rho: float


def generate(scenario: Scenario, index: int, pilot: bool = False) -> SimulatedData:
    """Draw replication ``index`` of ``scenario`` (raw, unstandardized scale).

    Pilot draws come from a separate stream so they never coincide with the
    evaluation replications.
    """
    rng = rng_for(scenario.seed, STREAM_PILOT if pilot else STREAM_DATA, index)
    beta = np.asarray(scenario.beta_star, dtype=float)
    X = ar1_design(rng, scenario.n, scenario.p, scenario.rho)
    eps = draw_errors(rng, scenario.error_law, scenario.n)
    return SimulatedData(Dataset(X @ beta + eps, X), beta, scenario.rho)


@dataclass
class BenchRecord:
    index: int
    me: float
    tp: int
    fp: int
    runtime_seconds: float
    lam: float
    converged: bool


@dataclass
class Aggregate:
    scenario_id: str
    method: str
    error_law: str
    n: int
    p: int
    ME_mean: float
    ME_se: float
    TP_mean: float
    FP_mean: float
    runtime_mean: float
    used: int
    excluded: int


@dataclass
class BenchResult:
    scenario: Scenario
    records: List[BenchRecord]
    aggregate: Optional[Aggregate]
    excluded: int = 0
    oracle_lambda: Optional[float] = None
    pilot_curve: Optional[List[Tuple[float, float]]] = None
    extras: Dict = field(default_factory=dict)


def _settings(scenario: Scenario, data: Dataset) -> FitSettings:
    m = scenario.method
    return make_settings(data.n, data.p, m.solver, m.penalty, scenario.q)


def _score(scenario: Scenario, sim: SimulatedData, std: Dataset, fit) -> Tuple[float, int, int]:
    _, beta = std.to_original_scale(fit.alpha_hat, fit.beta_hat)
    me = model_error(beta, sim.beta_star, sim.rho)
    selected = beta != 0
    truth = np.zeros(scenario.p, dtype=bool)
    truth[scenario.true_support] = True
    tp = int(np.count_nonzero(selected & truth))
    fp = int(np.count_nonzero(selected & ~truth))
    return me, tp, fp


def _lambda_sequence(scenario: Scenario, settings: FitSettings, anchor: Dataset) -> LambdaGrid:
    if scenario.lambdas is not None:
        return LambdaGrid(tuple(scenario.lambdas))
    return default_lambda_grid(anchor, settings, scenario.num_lambdas, scenario.lambda_ratio)


def _solve(scenario: Scenario, std: Dataset, settings: FitSettings, lam, lambdas, index: int):
    """Select lambda per the scenario's tuning mode and fit.

    Returns (lambda, final FitResult, all reweighting steps converged).
    """
    t = scenario.tuning
    if t is Tuning.PIVOTAL:
        lam = pivotal_lambda(std.X, settings.grid, DEFAULT_PIVOTAL_C[settings.family],
                             seed=scenario.seed)
    if t in (Tuning.FIXED, Tuning.ORACLE, Tuning.PIVOTAL):
        steps = fit_path(std, settings, [lam])[0]
        return lam, steps[-1], all(r.converged for r in steps)
    if t is Tuning.BIC:
        report = select_bic(std, settings, lambdas)
    else:
        folds = fold_labels(std.n, scenario.folds, scenario.seed, index)
        report = cross_validate(std, settings, lambdas, folds=folds)
    rec = next(r for r in report.records if r.lam == report.chosen_lambda)
    return report.chosen_lambda, report.chosen_fit, rec.converged


def _replicate(scenario: Scenario, index: int, lam, lambdas) -> BenchRecord:
    sim = generate(scenario, index)
    std = Dataset.from_arrays(sim.data.X, sim.data.y, standardize=True)
    settings = _settings(scenario, std)
    start = time.perf_counter()
    lam, fit, ok = _solve(scenario, std, settings, lam, lambdas, index)
    elapsed = time.perf_counter() - start
    me, tp, fp = _score(scenario, sim, std, fit)
    return BenchRecord(index, me, tp, fp, elapsed, float(lam), ok)


def oracle_scan(scenario: Scenario, lambdas: LambdaGrid) -> Tuple[float, List[Tuple[float, float]]]:
    """Lambda minimizing mean true model error over the pilot replications."""
    total = np.zeros(len(lambdas))
    for i in range(scenario.pilot_replications):
        sim = generate(scenario, i, pilot=True)
        std = Dataset.from_arrays(sim.data.X, sim.data.y, standardize=True)
        path = fit_path(std, _settings(scenario, std), lambdas)
        total += [_score(scenario, sim, std, steps[-1])[0] for steps in path]
    mean = total / scenario.pilot_replications
    return float(lambdas.values[int(np.argmin(mean))]), list(zip(lambdas.values, mean.tolist()))


def aggregate(scenario: Scenario, records: Sequence[BenchRecord]) -> Tuple[Optional[Aggregate], int]:
    """Summaries over converged replications; returns (aggregate or None, excluded count)."""
    used = [r for r in records if r.converged]
    excluded = len(records) - len(used)
    if not used:
        return None, excluded
    me = np.array([r.me for r in used])
    se = float(np.std(me, ddof=1) / math.sqrt(len(me))) if len(me) > 1 else 0.0
    return Aggregate(
        scenario_id=scenario.id, method=scenario.method.value,
        error_law=scenario.error_law.value, n=scenario.n, p=scenario.p,
        ME_mean=float(me.mean()), ME_se=se,
        TP_mean=float(np.mean([r.tp for r in used])),
        FP_mean=float(np.mean([r.fp for r in used])),
        runtime_mean=float(np.mean([r.runtime_seconds for r in used])),
        used=len(used), excluded=excluded,
    ), excluded


def run_benchmark(scenario: Scenario, threads: int = 1, warmup: bool = True) -> BenchResult:
    """Run all replications of ``scenario``.

    Statistical fields depend only on the scenario (including its seed);
    ``threads`` changes wall-clock behaviour only. Runtimes cover lambda
    selection plus fitting for cv/bic/pivotal and the final fit for
    fixed/oracle-scan, never data generation or the pilot scan.
    """
    if scenario.replications == 0:
        return BenchResult(scenario, [], None)
    lam = scenario.lam
    lambdas = None
    curve = None
    if scenario.tuning in (Tuning.CV, Tuning.BIC, Tuning.ORACLE):
        pilot = scenario.tuning is Tuning.ORACLE
        anchor = generate(scenario, 0, pilot=pilot).data
        anchor = Dataset.from_arrays(anchor.X, anchor.y, standardize=True)
        lambdas = _lambda_sequence(scenario, _settings(scenario, anchor), anchor)
        if pilot:
            lam, curve = oracle_scan(scenario, lambdas)
    if warmup:
        wl = lam if lam is not None else _warmup_lambda(scenario)
        _replicate(replace(scenario, tuning=Tuning.FIXED, lam=wl), 0, wl, None)

    def job(i):
        return _replicate(scenario, i, lam, lambdas)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(job, range(scenario.replications)))
    else:
        records = [job(i) for i in range(scenario.replications)]
    agg, excluded = aggregate(scenario, records)
    return BenchResult(scenario, records, agg, excluded, lam if curve else None, curve)


def _warmup_lambda(scenario: Scenario) -> float:
    sim = generate(scenario, 0)
    std = Dataset.from_arrays(sim.data.X, sim.data.y, standardize=True)
    settings = _settings(scenario, std)
    return pivotal_lambda(std.X, settings.grid, DEFAULT_PIVOTAL_C[settings.family],
                          B=50, seed=scenario.seed)


# ---------------------------------------------------------------- presets

TABLE_METHODS = (BenchMethod.ADMM_LASSO, BenchMethod.SCQR_LASSO, BenchMethod.SCQR_SCAD)
ALL_LAWS = tuple(ErrorLaw)


def _table(tuning: Tuning, sizes, replications: int, pilot: int = 0, num_lambdas: int = 50,
           ratio: float = 0.01, admm_pilot: Optional[int] = None,
           admm_num_lambdas: Optional[int] = None) -> List[Scenario]:
    out = []
    for n, p in sizes:
        for law in ALL_LAWS:
            for m in TABLE_METHODS:
                admm = m is BenchMethod.ADMM_LASSO
                out.append(Scenario(
                    n=n, p=p, error_law=law, method=m, tuning=tuning,
                    replications=replications,
                    pilot_replications=(admm_pilot if admm and admm_pilot is not None else pilot),
                    num_lambdas=(admm_num_lambdas if admm and admm_num_lambdas else num_lambdas),
                    lambda_ratio=ratio))
    return out


def _figure(ns, replications: int) -> List[Scenario]:
    return [Scenario(n=n, p=5 * n, error_law=ErrorLaw.NORMAL3, method=m,
                     tuning=Tuning.PIVOTAL, replications=replications)
            for n in ns for m in (BenchMethod.ADMM_LASSO, BenchMethod.SCQR_LASSO)]


PRESETS = {
    "table1-desk": lambda: _table(Tuning.ORACLE, [(100, 600)], 20, pilot=10, num_lambdas=20,
                                  ratio=0.05, admm_pilot=3, admm_num_lambdas=8),
    "table2-desk": lambda: _table(Tuning.CV, [(100, 600)], 5, num_lambdas=20, ratio=0.02),
    "table3-desk": lambda: _table(Tuning.BIC, [(100, 600)], 10, num_lambdas=25, ratio=0.02),
    "figure1-desk": lambda: _figure((20, 40, 60, 80, 100), 3),
    "table1": lambda: _table(Tuning.ORACLE, [(100, 600), (200, 1200)], 100, pilot=50),
    "table2": lambda: _table(Tuning.CV, [(100, 600), (200, 1200)], 100),
    "table3": lambda: _table(Tuning.BIC, [(100, 600), (200, 1200)], 200),
    "figure1": lambda: _figure(tuple(range(20, 201, 20)), 20),
}


def preset(name: str, seed: int = 0, replications: Optional[int] = None,
           pilot: Optional[int] = None) -> List[Scenario]:
    """Scenarios of a named preset, optionally with smaller replication counts."""
    if name not in PRESETS:
        raise KeyError(name)
    out = []
    for s in PRESETS[name]():
        changes = {"seed": seed}
        if replications is not None:
            changes["replications"] = replications
        if pilot is not None and s.tuning is Tuning.ORACLE:
            changes["pilot_replications"] = pilot
        out.append(replace(s, **changes))
    return out


# ---------------------------------------------------------------- output

AGGREGATE_COLUMNS = ("scenario_id", "method", "error_law", "n", "p", "ME_mean", "ME_se",
                     "TP_mean", "FP_mean", "runtime_mean")
FIGURE_COLUMNS = ("n", "p", "ME_admm", "ME_scqr", "runtime_admm", "runtime_scqr", "runtime_ratio")


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def aggregate_rows(results: Sequence[BenchResult]) -> List[List[str]]:
    rows = []
    for r in results:
        a = r.aggregate
        if a is None:
            s = r.scenario
            rows.append([s.id, s.method.value, s.error_law.value, str(s.n), str(s.p)]
                        + ["nan"] * 5)
        else:
            rows.append([_fmt(getattr(a, c)) for c in AGGREGATE_COLUMNS])
    return rows


def figure_rows(results: Sequence[BenchResult]) -> List[List[str]]:
    """One row per (n, p) pairing the two solvers' errors and runtimes."""
    by_size: Dict[Tuple[int, int], Dict[str, Aggregate]] = {}
    for r in results:
        if r.aggregate is not None:
            by_size.setdefault((r.scenario.n, r.scenario.p), {})[r.scenario.method.value] = r.aggregate
    rows = []
    for (n, p), aggs in sorted(by_size.items()):
        adm = aggs.get(BenchMethod.ADMM_LASSO.value)
        sc = aggs.get(BenchMethod.SCQR_LASSO.value)
        nan = float("nan")
        ra = adm.runtime_mean if adm else nan
        rs = sc.runtime_mean if sc else nan
        rows.append([str(n), str(p), _fmt(adm.ME_mean if adm else nan),
                     _fmt(sc.ME_mean if sc else nan), _fmt(ra), _fmt(rs),
                     _fmt(ra / rs if rs > 0 else nan)])
    return rows


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_jsonl(path, results: Sequence[BenchResult]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in results:
            for rec in r.records:
                row = {"scenario_id": r.scenario.id, **asdict(rec)}
                fh.write(json.dumps(row) + "\n")
