"""Single-market simulation loop.

Each step: one uniformly chosen agent forecasts and may submit one order
(matching suppressed inside the configured no-execution windows), stale
orders expire, then every agent reconsiders its mood sequentially in a
fresh random order against live camp counts. Each trial owns one master
generator seeded from the config seed; all randomness is pre-drawn from it
in a fixed order (population, then agent choices, then noise, then mood
permutations, then mood uniforms), so a (config, seed) pair fully pins the
output.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .agents import (
    Agent,
    AgentState,
    Mood,
    PopulationConfig,
    decide_order,
    init_population,
    predict_price,
    predict_return,
)
from .orderbook import Book, Order, Side, Trade


class ConfigurationError(ValueError):
    """A simulation config failed validation."""


@dataclass
class SimulationConfig:
    population: PopulationConfig = field(default_factory=PopulationConfig)
    t_sim: int = 2110
    no_exec_windows: tuple = ((1, 100), (1100, 1110))
    p0: float = 300.0
    fundamental_price: float = 300.0
    tick_size: float = 1e-4
    v_max: int = 50  # per-order volume cap
    sigma_sq_order: float = 1e-4  # return-variance belief in the sizing rule
    seed: int = 0


@dataclass(slots=True)
class TickRecord:
    step: int
    event: str  # "OrderPlaced" | "TradeExecuted"
    market_price: float | None  # last trade price; the trade price on trade rows
    mid_price: float
    best_bid: float | None
    best_ask: float | None
    order_volume: int  # submitted size on order rows, 0 on trade rows
    exec_volume: int  # trade size on trade rows, 0 on order rows
    n_optimists: int


@dataclass
class SimulationOutput:
    ticks: list[TickRecord]
    trades: list[Trade]
    mid_prices: list[float]  # entry t-1 = mid after step t; p0 precedes entry 0
    optimists_rate: list[float]  # recorded after each step's mood pass
    final_states: list[AgentState]


def validate_config(config: SimulationConfig) -> None:
    pop = config.population
    checks = [
        (config.t_sim >= 1, "t_sim must be >= 1"),
        (config.p0 > 0, "p0 must be positive"),
        (config.fundamental_price > 0, "fundamental_price must be positive"),
        (config.tick_size > 0, "tick_size must be positive"),
        (config.v_max >= 1, "v_max must be >= 1"),
        (config.sigma_sq_order > 0, "sigma_sq_order must be positive"),
        (pop.n_agents >= 1, "n_agents must be >= 1"),
        (pop.lambda_f >= 0 and pop.lambda_c >= 0 and pop.lambda_m >= 0
         and pop.lambda_n >= 0, "weight means must be >= 0"),
        (pop.sigma_n >= 0, "sigma_n must be >= 0"),
        (0.0 <= pop.nu <= 1.0, "nu must lie in [0, 1]"),
        (pop.alpha > 0, "alpha must be positive"),
        (0.0 <= pop.p_optimist_init <= 1.0, "p_optimist_init must lie in [0, 1]"),
        (pop.tau_f >= 1, "tau_f must be >= 1"),
        (pop.w_max >= 0, "w_max must be >= 0"),
        (pop.cash.kind in ("uniform", "pareto"), f"unknown cash kind {pop.cash.kind!r}"),
        (pop.cash.c_max > 0 and pop.cash.c_min > 0, "cash bounds must be positive"),
        (pop.cash.beta > 0, "cash beta must be positive"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigurationError(msg)
    for lo, hi in config.no_exec_windows:
        if not (1 <= lo <= hi):
            raise ConfigurationError(f"bad no-exec window ({lo}, {hi})")


def in_no_exec_window(step: int, windows) -> bool:
    return any(lo <= step <= hi for lo, hi in windows)


class Engine:
    """One trial's mutable state; exposed to per-step callbacks for inspection."""

    def __init__(self, config: SimulationConfig):
        validate_config(config)
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.agents: list[Agent] = init_population(config.population, self.rng)
        self.book = Book(tick=config.tick_size)
        self.n_opt = sum(a.state.mood is Mood.OPTIMISTIC for a in self.agents)
        # commitments for live buy orders, in integer (tick x volume) units so
        # that releases cancel additions exactly
        self._comm_ticks = [0] * config.population.n_agents
        self._order_owner: dict[int, tuple[Order, Agent]] = {}
        self._expiry_buckets: dict[int, list[tuple[Order, Agent]]] = {}
        self._next_order_id = 1

    def _sync_committed(self, agent: Agent) -> None:
        agent.state.committed_cash = self._comm_ticks[agent.agent_id] * self.config.tick_size

    def _limit_ticks(self, order: Order) -> int:
        return int(round(order.limit_price / self.config.tick_size))

    def _commit(self, agent: Agent, order: Order) -> None:
        if order.side is Side.BUY:
            self._comm_ticks[agent.agent_id] += order.volume * self._limit_ticks(order)
            self._sync_committed(agent)
        else:
            agent.state.committed_shares += order.volume

    def _release(self, agent: Agent, order: Order, volume: int) -> None:
        if order.side is Side.BUY:
            self._comm_ticks[agent.agent_id] -= volume * self._limit_ticks(order)
            self._sync_committed(agent)
        else:
            agent.state.committed_shares -= volume

    def _settle(self, trade: Trade) -> None:
        buy_order, buyer = self._order_owner[trade.buy_order_id]
        sell_order, seller = self._order_owner[trade.sell_order_id]
        cost = trade.price * trade.volume
        buyer.state.cash -= cost
        buyer.state.shares += trade.volume
        self._release(buyer, buy_order, trade.volume)
        seller.state.cash += cost
        seller.state.shares -= trade.volume
        self._release(seller, sell_order, trade.volume)

    def run(self, on_step: Callable | None = None) -> SimulationOutput:
        cfg = self.config
        pop = cfg.population
        n = pop.n_agents
        t_sim = cfg.t_sim
        rng = self.rng

        # fixed pre-draw order; unused rows (e.g. mood rows when nu = 0) still
        # consume from the stream so the layout never depends on branching
        choices = rng.integers(0, n, t_sim)
        eps = rng.standard_normal(t_sim) * pop.sigma_n
        mood_perms = rng.permuted(np.tile(np.arange(n), (t_sim, 1)), axis=1)
        mood_unifs = rng.random((t_sim, n))

        exec_ok = np.array(
            [not in_no_exec_window(t, cfg.no_exec_windows) for t in range(1, t_sim + 1)]
        )

        book = self.book
        agents = self.agents
        price_hist = [cfg.p0]
        ticks: list[TickRecord] = []
        all_trades: list[Trade] = []
        optimists_rate: list[float] = []
        mood_on = pop.nu > 0.0

        for t in range(1, t_sim + 1):
            agent = agents[choices[t - 1]]
            params = agent.params
            p_t = price_hist[-1]
            p_lag = price_hist[max(0, t - params.tau)]
            r_hat = predict_return(
                params, agent.state, p_t, cfg.fundamental_price, p_lag, float(eps[t - 1])
            )
            if r_hat is not None:
                p_hat = predict_price(p_t, params.tau, r_hat)
                order = decide_order(
                    agent, p_t, p_hat, t, cfg.sigma_sq_order, cfg.v_max,
                    cfg.tick_size, self._next_order_id,
                )
                if order is not None:
                    self._next_order_id += 1
                    submitted_volume = order.volume
                    self._order_owner[order.order_id] = (order, agent)
                    self._commit(agent, order)
                    ticks.append(TickRecord(
                        t, "OrderPlaced", book.last_trade_price, book.mid_price(cfg.p0),
                        book.best_bid(), book.best_ask(), submitted_volume, 0, self.n_opt,
                    ))
                    trades = book.submit(order, execution_enabled=bool(exec_ok[t - 1]))
                    for trade in trades:
                        self._settle(trade)
                    if trades:
                        bb, ba = book.best_bid(), book.best_ask()
                        mid = book.mid_price(cfg.p0)
                        for trade in trades:
                            ticks.append(TickRecord(
                                t, "TradeExecuted", trade.price, mid, bb, ba,
                                0, trade.volume, self.n_opt,
                            ))
                        all_trades.extend(trades)
                    if order.volume > 0:
                        self._expiry_buckets.setdefault(order.expiry_step, []).append(
                            (order, agent)
                        )

            for order, owner in self._expiry_buckets.pop(t, ()):
                if order.volume > 0:
                    self._release(owner, order, order.volume)
            book.expire(t)

            if mood_on and 0 < self.n_opt < n:
                n_opt = self.n_opt
                nu = pop.nu
                urow = mood_unifs[t - 1]
                for k in mood_perms[t - 1].tolist():
                    state = agents[k].state
                    if state.mood is Mood.PESSIMISTIC:
                        if urow[k] < nu * n_opt / n:
                            state.mood = Mood.OPTIMISTIC
                            n_opt += 1
                    elif urow[k] < nu * (n - n_opt) / n:
                        state.mood = Mood.PESSIMISTIC
                        n_opt -= 1
                self.n_opt = n_opt

            price_hist.append(book.mid_price(cfg.p0))
            optimists_rate.append(self.n_opt / n)
            if on_step is not None:
                on_step(self, t)

        return SimulationOutput(
            ticks=ticks,
            trades=all_trades,
            mid_prices=price_hist[1:],
            optimists_rate=optimists_rate,
            final_states=[a.state for a in agents],
        )


def run(config: SimulationConfig, on_step: Callable | None = None) -> SimulationOutput:
    """Run one trial. Byte-identical outputs for identical (config, seed)."""
    return Engine(config).run(on_step=on_step)


def daily_mood_change_rate(optimists_rate: list[float]) -> float:
    """Spread of the optimist share over a run: max minus min."""
    if not optimists_rate:
        raise ValueError("optimists_rate is empty")
    return max(optimists_rate) - min(optimists_rate)


TICKS_CSV_COLUMNS = (
    "step", "event", "market_price", "mid_price", "best_bid", "best_ask",
    "order_volume", "exec_volume", "n_optimists",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_ticks_csv(ticks: list[TickRecord], path) -> None:
    """Stable column order and shortest-roundtrip float formatting, so equal
    runs serialize to identical bytes."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TICKS_CSV_COLUMNS)
        for r in ticks:
            writer.writerow([
                r.step, r.event, _cell(r.market_price), _cell(r.mid_price),
                _cell(r.best_bid), _cell(r.best_ask), r.order_volume,
                r.exec_volume, r.n_optimists,
            ])
