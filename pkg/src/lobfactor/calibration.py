"""Scenario matrix, grid search, and experiment tables.

Eight scenarios toggle three candidate components (Pareto cash, chartist
weight, mood weight). For each scenario the searchable parameters are the
grid dimensions whose component flag is on, plus risk aversion; the rest
are pinned to their off values. A combo's quality is the mean OT distance
of its pooled tail cloud to the reference clouds; calibration is argmin.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path

import numpy as np

from .agents import CashSpec
from .engine import SimulationConfig, run
from .metrics import (
    DegenerateSeriesError,
    PointCloud,
    StylizedFactReport,
    build_tail_cloud,
    hill_index,
    ot_distance,
    standardize,
    stylized_facts,
    theoretical_hill,
)
from .timegrid import TransactionPath, assign_calendar_time, bar_volumes, log_returns

# Component membership per scenario (columns of the scenario matrix)
_PARETO_SCENARIOS = frozenset({1, 4, 5, 7})
_CHARTIST_SCENARIOS = frozenset({2, 4, 6, 7})
_MOOD_SCENARIOS = frozenset({3, 5, 6, 7})


class CalibrationError(RuntimeError):
    """No usable combo survived evaluation."""


@dataclass(frozen=True)
class ScenarioSpec:
    scenario_no: int
    pareto_cash: bool
    chartist: bool
    mood: bool

    @classmethod
    def from_number(cls, scenario_no: int) -> "ScenarioSpec":
        if not 0 <= scenario_no <= 7:
            raise ValueError(f"scenario_no must be 0..7, got {scenario_no}")
        return cls(
            scenario_no=scenario_no,
            pareto_cash=scenario_no in _PARETO_SCENARIOS,
            chartist=scenario_no in _CHARTIST_SCENARIOS,
            mood=scenario_no in _MOOD_SCENARIOS,
        )


@dataclass(frozen=True)
class ParameterGrid:
    cash_options: tuple[CashSpec, ...] = (CashSpec(kind="uniform"), CashSpec(kind="pareto"))
    lambda_c: tuple[float, ...] = (0.0, 1.5, 1.75, 2.0, 2.25, 2.5)
    lambda_m: tuple[float, ...] = (0.0, 1e-5, 2e-5, 3e-5, 4e-5, 5e-5)
    nu: tuple[float, ...] = (0.3, 0.5, 0.7)
    alpha: tuple[float, ...] = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


@dataclass(frozen=True)
class Combo:
    """One grid point: the population-level knobs a scenario may search."""

    cash: CashSpec
    lambda_c: float
    lambda_m: float
    nu: float
    alpha: float

    def key(self) -> dict:
        return {
            "cash_kind": self.cash.kind,
            "c_max": self.cash.c_max,
            "c_min": self.cash.c_min,
            "beta": self.cash.beta,
            "lambda_c": self.lambda_c,
            "lambda_m": self.lambda_m,
            "nu": self.nu,
            "alpha": self.alpha,
        }

    def digest(self) -> str:
        blob = json.dumps(self.key(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ComboMetrics:
    combo: Combo
    hill: float | None
    k_used: int
    mean_ot: float | None
    ot_std: float | None
    n_trials: int
    n_degenerate: int
    n_pooled: int
    unstable: bool
    returns: np.ndarray | None = None  # pooled, only when collect_series
    volumes: np.ndarray | None = None


@dataclass
class CalibrationResult:
    scenario_no: int
    best: ComboMetrics
    per_combo: list[ComboMetrics]


def enumerate_combos(scenario: ScenarioSpec, grid: ParameterGrid) -> list[Combo]:
    """Cartesian product over searched dimensions; off components pinned.

    Zero entries in the lambda grids encode "component off", so an on flag
    enumerates only the nonzero values and an off flag pins zero. Mood off
    also pins nu to zero since no mood update can matter.
    """
    cash_opts = [c for c in grid.cash_options if c.kind == "pareto"] if scenario.pareto_cash \
        else [c for c in grid.cash_options if c.kind == "uniform"]
    lc_opts = [v for v in grid.lambda_c if v > 0] if scenario.chartist else [0.0]
    if scenario.mood:
        lm_opts = [v for v in grid.lambda_m if v > 0]
        nu_opts = list(grid.nu)
    else:
        lm_opts = [0.0]
        nu_opts = [0.0]
    return [
        Combo(cash=c, lambda_c=lc, lambda_m=lm, nu=nu, alpha=a)
        for c, lc, lm, nu, a in product(cash_opts, lc_opts, lm_opts, nu_opts, grid.alpha)
    ]


def build_config(base: SimulationConfig, combo: Combo) -> SimulationConfig:
    population = replace(
        base.population,
        cash=combo.cash,
        lambda_c=combo.lambda_c,
        lambda_m=combo.lambda_m,
        nu=combo.nu,
        alpha=combo.alpha,
    )
    return replace(base, population=population)


def trial_path_index(path_seed: int, trial_index: int, n_paths: int) -> int:
    """Per-trial reference-path choice on its own stream: stable under added trials."""
    return int(np.random.default_rng([path_seed, trial_index]).integers(0, n_paths))


def evaluate_combo(
    config: SimulationConfig,
    n_trials: int,
    base_seed: int,
    refs: list[PointCloud],
    paths: list[TransactionPath],
    path_seed: int = 7701,
    collect_series: bool = False,
    combo: Combo | None = None,
) -> ComboMetrics:
    """Run shared-seed trials of one configuration and score the pooled tail.

    Trials with zero executed trades are dropped and counted; a combo is
    unstable when they exceed half of n_trials or the pooled series is
    degenerate, and carries no metrics in that case.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    returns_parts = []
    volume_parts = []
    n_degenerate = 0
    for i in range(n_trials):
        cfg = replace(config, seed=base_seed + i)
        out = run(cfg)
        if not out.trades:
            n_degenerate += 1
            continue
        path = paths[trial_path_index(path_seed, i, len(paths))]
        bars = assign_calendar_time(out, path, cfg.p0, day_id=f"seed{cfg.seed}")
        returns_parts.append(log_returns(bars))
        if collect_series:
            volume_parts.append(np.asarray(bar_volumes(out, path)[1:], dtype=float))
    if combo is None:
        pop = config.population
        combo = Combo(cash=pop.cash, lambda_c=pop.lambda_c, lambda_m=pop.lambda_m,
                      nu=pop.nu, alpha=pop.alpha)
    if n_degenerate == n_trials:
        raise CalibrationError(f"all {n_trials} trials degenerate for combo {combo.key()}")

    def unusable() -> ComboMetrics:
        return ComboMetrics(combo=combo, hill=None, k_used=0, mean_ot=None, ot_std=None,
                            n_trials=n_trials, n_degenerate=n_degenerate, n_pooled=0,
                            unstable=True)

    if n_degenerate > n_trials // 2:
        return unusable()
    pooled = np.concatenate(returns_parts)
    try:
        abs_std = np.abs(standardize(pooled))
        stats = hill_index(abs_std)
        cloud = build_tail_cloud(abs_std)
    except DegenerateSeriesError:
        return unusable()
    ot_values = [ot_distance(cloud, ref) for ref in refs]
    return ComboMetrics(
        combo=combo,
        hill=stats.hill,
        k_used=stats.k_used,
        mean_ot=float(np.mean(ot_values)) if ot_values else None,
        ot_std=float(np.std(ot_values)) if ot_values else None,
        n_trials=n_trials,
        n_degenerate=n_degenerate,
        n_pooled=pooled.size,
        returns=pooled if collect_series else None,
        volumes=np.concatenate(volume_parts) if collect_series and volume_parts else None,
        unstable=False,
    )


def _evaluate_task(args) -> ComboMetrics:
    return evaluate_combo(*args)


class ComboLedger:
    """Append-only JSONL record of finished combos, keyed for safe resume."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self._done: dict[tuple, dict] = {}
        if self.path and self.path.exists():
            with open(self.path) as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    self._done[self._key(rec)] = rec

    @staticmethod
    def _key(rec: dict) -> tuple:
        return (rec["scenario"], rec["combo_digest"], rec["base_seed"], rec["n_trials"])

    def lookup(self, scenario_no: int, combo: Combo, base_seed: int, n_trials: int) -> dict | None:
        return self._done.get((scenario_no, combo.digest(), base_seed, n_trials))

    def record(self, scenario_no: int, base_seed: int, metrics: ComboMetrics) -> None:
        rec = {
            "scenario": scenario_no,
            "combo_digest": metrics.combo.digest(),
            "base_seed": base_seed,
            "n_trials": metrics.n_trials,
            "combo": metrics.combo.key(),
            "hill": metrics.hill,
            "k_used": metrics.k_used,
            "mean_ot": metrics.mean_ot,
            "ot_std": metrics.ot_std,
            "n_degenerate": metrics.n_degenerate,
            "n_pooled": metrics.n_pooled,
            "unstable": metrics.unstable,
        }
        self._done[self._key(rec)] = rec
        if self.path:
            with open(self.path, "a") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def to_metrics(self, rec: dict) -> ComboMetrics:
        c = rec["combo"]
        combo = Combo(
            cash=CashSpec(kind=c["cash_kind"], c_max=c["c_max"], c_min=c["c_min"], beta=c["beta"]),
            lambda_c=c["lambda_c"], lambda_m=c["lambda_m"], nu=c["nu"], alpha=c["alpha"],
        )
        return ComboMetrics(
            combo=combo, hill=rec["hill"], k_used=rec["k_used"], mean_ot=rec["mean_ot"],
            ot_std=rec["ot_std"], n_trials=rec["n_trials"], n_degenerate=rec["n_degenerate"],
            n_pooled=rec["n_pooled"], unstable=rec["unstable"],
        )


def calibrate(
    scenario: ScenarioSpec,
    grid: ParameterGrid,
    n_trials: int,
    refs: list[PointCloud],
    paths: list[TransactionPath],
    base: SimulationConfig | None = None,
    base_seed: int = 1000,
    path_seed: int = 7701,
    ledger: ComboLedger | None = None,
    workers: int = 1,
) -> CalibrationResult:
    """Evaluate every combo of a scenario and pick the minimum mean OT.

    Ties break toward the Hill index nearest 3, then toward the earlier
    combo in enumeration (lexicographic grid order). Unstable combos stay
    in the table but never win.
    """
    base = base or SimulationConfig()
    combos = enumerate_combos(scenario, grid)
    ledger = ledger or ComboLedger(None)
    results: list[ComboMetrics | None] = [None] * len(combos)
    pending = []
    for idx, combo in enumerate(combos):
        rec = ledger.lookup(scenario.scenario_no, combo, base_seed, n_trials)
        if rec is not None:
            results[idx] = ledger.to_metrics(rec)
        else:
            pending.append((idx, combo))
    tasks = [
        (build_config(base, combo), n_trials, base_seed, refs, paths, path_seed, False, combo)
        for _, combo in pending
    ]
    if workers > 1 and tasks:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            fresh = list(pool.map(_evaluate_task, tasks))
    else:
        fresh = [ _evaluate_task(t) for t in tasks ]
    for (idx, _), metrics in zip(pending, fresh):
        results[idx] = metrics
        ledger.record(scenario.scenario_no, base_seed, metrics)
    usable = [(i, m) for i, m in enumerate(results) if not m.unstable]
    if not usable:
        raise CalibrationError(f"scenario {scenario.scenario_no}: every combo unstable")
    best_idx, best = min(usable, key=lambda im: (im[1].mean_ot, abs(im[1].hill - 3.0), im[0]))
    return CalibrationResult(scenario_no=scenario.scenario_no, best=best, per_combo=results)


def make_student_t_refs(
    m_refs: int = 18,
    n_samples: int = 30_000,
    df: float = 3.0,
    refs_seed: int = 777,
) -> list[PointCloud]:
    """Synthetic stand-ins for real tail clouds: Student-t return samples."""
    refs = []
    for m in range(m_refs):
        rng = np.random.default_rng([refs_seed, m])
        returns = rng.standard_t(df, size=n_samples)
        refs.append(build_tail_cloud(np.abs(standardize(returns)), source_id=f"t{df:g}-{m}"))
    return refs


@dataclass
class ScenarioReport:
    calibration: CalibrationResult
    stylized: StylizedFactReport


def scenario_stylized_facts(
    result: CalibrationResult,
    n_trials: int,
    paths: list[TransactionPath],
    base: SimulationConfig | None = None,
    base_seed: int = 1000,
    path_seed: int = 7701,
) -> StylizedFactReport:
    """Stylized facts at a scenario's best combo, on pooled returns and volumes.

    Per-minute volumes align with the return of the interval they close.
    """
    base = base or SimulationConfig()
    metrics = evaluate_combo(
        build_config(base, result.best.combo), n_trials, base_seed, refs=[],
        paths=paths, path_seed=path_seed, collect_series=True, combo=result.best.combo,
    )
    return stylized_facts(metrics.returns, volumes=metrics.volumes)


def experiment_suite(
    grid: ParameterGrid,
    n_trials: int,
    refs: list[PointCloud],
    paths: list[TransactionPath],
    scenarios: tuple[int, ...] = tuple(range(8)),
    base: SimulationConfig | None = None,
    base_seed: int = 1000,
    path_seed: int = 7701,
    ledger: ComboLedger | None = None,
    workers: int = 1,
) -> dict:
    """Calibrate each scenario and emit result-table rows plus the synergy check."""
    reports: dict[int, ScenarioReport] = {}
    for scenario_no in scenarios:
        result = calibrate(
            ScenarioSpec.from_number(scenario_no), grid, n_trials, refs, paths,
            base=base, base_seed=base_seed, path_seed=path_seed, ledger=ledger,
            workers=workers,
        )
        stylized = scenario_stylized_facts(
            result, n_trials, paths, base=base, base_seed=base_seed, path_seed=path_seed,
        )
        reports[scenario_no] = ScenarioReport(calibration=result, stylized=stylized)
    out: dict = {"scenarios": reports}
    if {0, 1, 2, 4} <= set(scenarios):
        hills = {n: reports[n].calibration.best.hill for n in (0, 1, 2, 4)}
        theoretical = theoretical_hill(hills[0], hills[1], hills[2])
        out["synergy"] = {
            "observed_hill_4": hills[4],
            "theoretical_hill_4": theoretical,
            "observed_lower": hills[4] < theoretical,
        }
    return out


def sweep_lambda_c(
    grid: ParameterGrid,
    n_trials: int,
    paths: list[TransactionPath],
    base: SimulationConfig | None = None,
    base_seed: int = 1000,
    path_seed: int = 7701,
) -> list[dict]:
    """Hill index versus chartist intensity for the chartist scenarios.

    For each nonzero lambda_c: pooled Hill per alpha for scenario 2 (uniform
    cash) and scenario 4 (Pareto cash), plus the additive prediction built
    per alpha from scenarios 0, 1, 2; each series reported as mean and std
    across the alpha grid. Degenerate-unstable combos drop out of the
    aggregation.
    """
    base = base or SimulationConfig()
    uniform = next(c for c in grid.cash_options if c.kind == "uniform")
    pareto = next(c for c in grid.cash_options if c.kind == "pareto")

    def pooled_hill(cash: CashSpec, lambda_c: float, alpha: float) -> float | None:
        combo = Combo(cash=cash, lambda_c=lambda_c, lambda_m=0.0, nu=0.0, alpha=alpha)
        try:
            metrics = evaluate_combo(
                build_config(base, combo), n_trials, base_seed, refs=[], paths=paths,
                path_seed=path_seed, combo=combo,
            )
        except CalibrationError:
            return None
        return metrics.hill  # None when unstable

    z0 = {a: pooled_hill(uniform, 0.0, a) for a in grid.alpha}
    z1 = {a: pooled_hill(pareto, 0.0, a) for a in grid.alpha}
    rows = []
    for lc in [v for v in grid.lambda_c if v > 0]:
        z2 = {a: pooled_hill(uniform, lc, a) for a in grid.alpha}
        z4 = {a: pooled_hill(pareto, lc, a) for a in grid.alpha}
        theo = [
            theoretical_hill(z0[a], z1[a], z2[a])
            for a in grid.alpha
            if None not in (z0[a], z1[a], z2[a])
        ]
        for series, values in (
            ("sim2", [v for v in z2.values() if v is not None]),
            ("sim4", [v for v in z4.values() if v is not None]),
            ("theoretical", theo),
        ):
            rows.append({
                "lambda_c": lc,
                "series": series,
                "hill_mean": float(np.mean(values)) if values else None,
                "hill_std": float(np.std(values)) if values else None,
                "n_points": len(values),
            })
    return rows
