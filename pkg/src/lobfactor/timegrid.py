"""Calendar-time resampling of event-time simulation output.

A trial's trades carry step indices, not wall-clock times. To compare
against one-minute market data, each trial is laid onto a 300-minute day
by matching cumulative transaction counts: a reference path says what
fraction of the day's transactions is done by each minute, and the bar
for minute m is the mid price recorded at the step of the trade whose
index corresponds to that fraction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

MINUTES_PER_DAY = 300


class DegenerateDayError(ValueError):
    """A reference day carries no transactions."""


class DegenerateTrialError(ValueError):
    """A trial produced no trades and cannot be resampled."""


@dataclass(frozen=True)
class TransactionPath:
    """Cumulative fraction of the day's transactions completed by each minute."""

    fractions: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.fractions) != MINUTES_PER_DAY:
            raise ValueError(f"path must have {MINUTES_PER_DAY} minutes, got {len(self.fractions)}")
        prev = 0.0
        for f in self.fractions:
            if f < prev - 1e-12 or not (0.0 <= f <= 1.0):
                raise ValueError("fractions must be nondecreasing within [0, 1]")
            prev = f
        if self.fractions[-1] != 1.0:
            raise ValueError("final fraction must be exactly 1")


@dataclass(frozen=True)
class BarSeries:
    """One synthetic trading day: 300 one-minute bar prices."""

    mid_prices: tuple[float, ...]
    day_id: str

    def __post_init__(self) -> None:
        if len(self.mid_prices) != MINUTES_PER_DAY:
            raise ValueError(f"bar series must have {MINUTES_PER_DAY} bars, got {len(self.mid_prices)}")
        if any(p <= 0 for p in self.mid_prices):
            raise ValueError("bar prices must be positive")


def scaled_path_from_counts(counts) -> TransactionPath:
    arr = np.asarray(counts, dtype=np.int64)
    if arr.shape != (MINUTES_PER_DAY,):
        raise ValueError(f"expected {MINUTES_PER_DAY} per-minute counts, got shape {arr.shape}")
    if (arr < 0).any():
        raise ValueError("counts must be nonnegative")
    total = int(arr.sum())
    if total == 0:
        raise DegenerateDayError("day has zero transactions")
    cum = np.cumsum(arr)
    fractions = cum / total
    fractions[-1] = 1.0  # exact by construction; pin against float division
    return TransactionPath(tuple(float(f) for f in fractions))


def bar_indices(path: TransactionPath, t_total: int) -> list[int]:
    """Trade index targeted by each minute: round-half-up of fraction*t_total."""
    if t_total < 1:
        raise DegenerateTrialError("no trades to index")
    return [int(np.floor(f * t_total + 0.5)) for f in path.fractions]


def assign_calendar_time(sim, path: TransactionPath, p0: float,
                         day_id: str = "day0") -> BarSeries:
    """Resample a trial onto one-minute bars along a transaction-count path.

    Minute m's bar is the mid price recorded at the step of trade number
    i_m = round(fractions[m] * t_total) (1-based trade numbering). Minutes
    before the first targeted trade take p0; repeated indices carry the
    last price forward.
    """
    trades = sim.trades
    if not trades:
        raise DegenerateTrialError("trial produced no trades")
    prices = []
    for i in bar_indices(path, len(trades)):
        if i == 0:
            prices.append(p0)
        else:
            step = trades[i - 1].step
            prices.append(sim.mid_prices[step - 1])  # mid recorded at that step
    return BarSeries(tuple(prices), day_id=day_id)


def bar_volumes(sim, path: TransactionPath) -> tuple[int, ...]:
    """Executed shares per minute under the same trade-index assignment."""
    trades = sim.trades
    if not trades:
        raise DegenerateTrialError("trial produced no trades")
    idx = bar_indices(path, len(trades))
    vols = []
    prev = 0
    for i in idx:
        vols.append(sum(t.volume for t in trades[prev:i]))
        prev = max(prev, i)
    return tuple(vols)


def log_returns(bars: BarSeries) -> np.ndarray:
    p = np.asarray(bars.mid_prices, dtype=float)
    return np.diff(np.log(p))


def synthetic_reference_path(rng: np.random.Generator, shape: str = "uniform",
                             mean_total: int = 30000) -> TransactionPath:
    """Stand-in reference path: Poisson per-minute counts under a day profile.

    "uniform" spreads intensity evenly; "ushape" concentrates it near the
    open and close via the symmetric quadratic 1 + 8(x - 1/2)^2.
    """
    x = (np.arange(MINUTES_PER_DAY) + 0.5) / MINUTES_PER_DAY
    if shape == "uniform":
        intensity = np.ones(MINUTES_PER_DAY)
    elif shape == "ushape":
        intensity = 1.0 + 8.0 * (x - 0.5) ** 2
    else:
        raise ValueError(f"unknown path shape {shape!r}")
    lam = mean_total * intensity / intensity.sum()
    while True:
        counts = rng.poisson(lam)
        if counts.sum() > 0:
            return scaled_path_from_counts(counts)


def read_count_paths_csv(path) -> list[TransactionPath]:
    """Load reference days from CSV: one row per day, 300 integer columns."""
    out = []
    with open(path, newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or (row_no == 1 and not _is_int(row[0])):
                continue  # permit a header line
            if len(row) != MINUTES_PER_DAY:
                raise ValueError(f"{path}: row {row_no} has {len(row)} columns, expected {MINUTES_PER_DAY}")
            try:
                counts = [int(c) for c in row]
            except ValueError as exc:
                raise ValueError(f"{path}: row {row_no}: non-integer count ({exc})") from None
            out.append(scaled_path_from_counts(counts))
    if not out:
        raise ValueError(f"{path}: no count rows found")
    return out


def _is_int(cell: str) -> bool:
    try:
        int(cell)
    except ValueError:
        return False
    return True


BARS_CSV_HEADER = ("day_id",) + tuple(f"m{m:03d}" for m in range(1, MINUTES_PER_DAY + 1))


def write_bars_csv(bars_list: list[BarSeries], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BARS_CSV_HEADER)
        for bars in bars_list:
            writer.writerow([bars.day_id] + [repr(float(p)) for p in bars.mid_prices])


def read_bars_csv(path) -> list[BarSeries]:
    out = []
    with open(path, newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if row_no == 1 and row and row[0] == "day_id":
                continue
            if len(row) != MINUTES_PER_DAY + 1:
                raise ValueError(f"{path}: row {row_no} has {len(row)} columns, expected {MINUTES_PER_DAY + 1}")
            try:
                prices = tuple(float(c) for c in row[1:])
            except ValueError as exc:
                raise ValueError(f"{path}: row {row_no}: non-numeric price ({exc})") from None
            out.append(BarSeries(prices, day_id=row[0]))
    if not out:
        raise ValueError(f"{path}: no bar rows found")
    return out
