"""Heterogeneous trading agents with weighted return forecasts.

Each agent blends four forecast components — mean reversion toward a
fundamental price, trend extrapolation over its own lookback horizon, a
market-mood bias, and idiosyncratic noise — with weights drawn once per
agent from exponential distributions. The blended log-return forecast is
compounded over the agent's horizon into a target price, and a constant
absolute risk aversion rule with Gaussian beliefs turns the target into a
desired holding, hence an order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .orderbook import Order, Side, align_to_tick

RETURN_HORIZON_CLAMP = 10.0  # bound on tau * r_hat inside exp()


class Mood(Enum):
    OPTIMISTIC = "optimistic"
    PESSIMISTIC = "pessimistic"


@dataclass
class CashSpec:
    """Initial cash endowment: "uniform" on (0, c_max) or "pareto" (c_min, beta)."""

    kind: str = "uniform"
    c_max: float = 30_000.0
    c_min: float = 5_000.0
    beta: float = 1.5

    def mean(self) -> float:
        if self.kind == "uniform":
            return self.c_max / 2.0
        return self.beta * self.c_min / (self.beta - 1.0)


@dataclass
class PopulationConfig:
    n_agents: int = 200
    lambda_f: float = 10.0  # mean fundamental weight
    lambda_c: float = 0.0  # mean chartist weight; 0 disables the component
    lambda_m: float = 0.0  # mean mood weight; 0 disables the component
    lambda_n: float = 1.0  # mean noise weight
    sigma_n: float = 0.01  # std of the per-decision noise draw
    nu: float = 0.0  # mood contagion strength; 0 freezes moods
    alpha: float = 0.1  # base risk aversion
    cash: CashSpec = field(default_factory=CashSpec)
    w_max: int = 50  # initial shares ~ uniform integer on [0, w_max]
    tau_f: int = 200  # fundamentalist mean-reversion horizon, steps
    p_optimist_init: float = 0.5


@dataclass
class AgentParams:
    w_f: float
    w_c: float
    w_m: float
    w_n: float
    tau: int  # forecast horizon and order lifetime, steps
    tau_f: int
    alpha_j: float


@dataclass
class AgentState:
    cash: float
    shares: int
    mood: Mood
    # cash/shares pledged to resting orders; keeps fills from ever driving
    # holdings negative while several orders are live
    committed_cash: float = 0.0
    committed_shares: int = 0


@dataclass
class Agent:
    agent_id: int
    params: AgentParams
    state: AgentState


def sample_pareto(c_min: float, beta: float, u):
    """Inverse-CDF Pareto draw(s) with scale c_min and shape beta, from u in (0, 1).

    A scalar u gives a float; an array gives elementwise draws.
    """
    x = np.asarray(u, dtype=float)
    if not np.all((x > 0.0) & (x < 1.0)):
        raise ValueError(f"u must lie strictly inside (0, 1), got {u!r}")
    draws = c_min * x ** (-1.0 / beta)
    return float(draws) if x.ndim == 0 else draws


def horizon(w_f: float, w_c: float) -> int:
    """tau = round(100 * (1 + w_f) / (1 + w_c)), never below 1. Half rounds up."""
    return max(1, int(100.0 * (1.0 + w_f) / (1.0 + w_c) + 0.5))


def init_population(config: PopulationConfig, rng: np.random.Generator) -> list[Agent]:
    """Draw a fresh population. Consumes the generator in a fixed order:
    w_f, w_c, w_m, w_n vectors, then cash, then shares, then initial moods.
    """
    n = config.n_agents
    w_f = rng.exponential(config.lambda_f, n) if config.lambda_f > 0 else np.zeros(n)
    w_c = rng.exponential(config.lambda_c, n) if config.lambda_c > 0 else np.zeros(n)
    w_m = rng.exponential(config.lambda_m, n) if config.lambda_m > 0 else np.zeros(n)
    w_n = rng.exponential(config.lambda_n, n) if config.lambda_n > 0 else np.zeros(n)

    if config.cash.kind == "uniform":
        cash = rng.uniform(0.0, config.cash.c_max, n)
    elif config.cash.kind == "pareto":
        u = rng.random(n)
        while (zero := u == 0.0).any():  # open-interval contract
            u[zero] = rng.random(int(zero.sum()))
        cash = config.cash.c_min * u ** (-1.0 / config.cash.beta)
    else:
        raise ValueError(f"unknown cash kind {config.cash.kind!r}")

    shares = rng.integers(0, config.w_max + 1, n)
    optimist = rng.random(n) < config.p_optimist_init

    agents = []
    for j in range(n):
        params = AgentParams(
            w_f=float(w_f[j]),
            w_c=float(w_c[j]),
            w_m=float(w_m[j]),
            w_n=float(w_n[j]),
            tau=horizon(float(w_f[j]), float(w_c[j])),
            tau_f=config.tau_f,
            alpha_j=config.alpha * (1.0 + float(w_f[j])) / (1.0 + float(w_c[j])),
        )
        state = AgentState(
            cash=float(cash[j]),
            shares=int(shares[j]),
            mood=Mood.OPTIMISTIC if optimist[j] else Mood.PESSIMISTIC,
        )
        agents.append(Agent(j, params, state))
    return agents


def predict_return(
    params: AgentParams,
    state: AgentState,
    p_t: float,
    p_f: float,
    p_lag: float,
    eps: float,
) -> float | None:
    """Weighted-average one-step log-return forecast; None if all weights are zero."""
    total = params.w_f + params.w_c + params.w_m + params.w_n
    if total == 0.0:
        return None
    acc = 0.0
    if params.w_f > 0.0:
        acc += params.w_f / params.tau_f * math.log(p_f / p_t)
    if params.w_c > 0.0:
        acc += params.w_c / params.tau * math.log(p_t / p_lag)
    if params.w_m > 0.0:
        acc += params.w_m * (1.0 if state.mood is Mood.OPTIMISTIC else -1.0)
    if params.w_n > 0.0:
        acc += params.w_n * eps
    return acc / total


def predict_price(p_t: float, tau: int, r_hat: float) -> float:
    """Compound the forecast over the horizon: p_t * exp(tau * r_hat), exponent clamped."""
    g = tau * r_hat
    if g > RETURN_HORIZON_CLAMP:
        g = RETURN_HORIZON_CLAMP
    elif g < -RETURN_HORIZON_CLAMP:
        g = -RETURN_HORIZON_CLAMP
    return p_t * math.exp(g)


def decide_order(
    agent: Agent,
    p_t: float,
    p_hat: float,
    step: int,
    sigma_sq: float,
    v_max: int,
    tick: float,
    order_id: int,
) -> Order | None:
    """CARA/Gaussian myopic sizing: desired holding ln(p_hat/p_t) / (alpha_j sigma^2 p_t).

    The gap between desired and current shares sets side and size; size is
    capped by v_max, by uncommitted cash at the limit price (no borrowing),
    and by uncommitted shares (no short selling). Returns None when the
    agent has nothing to do.
    """
    params, state = agent.params, agent.state
    limit = align_to_tick(p_hat, tick)
    if limit < tick:
        return None
    pi_star = math.log(p_hat / p_t) / (params.alpha_j * sigma_sq * p_t)
    delta = round(pi_star) - state.shares
    if delta > 0:
        affordable = int((state.cash - state.committed_cash) / limit)
        volume = min(delta, v_max, affordable)
        side = Side.BUY
    elif delta < 0:
        volume = min(-delta, v_max, state.shares - state.committed_shares)
        side = Side.SELL
    else:
        return None
    if volume < 1:
        return None
    return Order(order_id, agent.agent_id, side, limit, volume, step, step + params.tau)


def update_mood(
    state: AgentState,
    n_opt: int,
    n_pes: int,
    n_total: int,
    nu: float,
    u: float,
) -> AgentState:
    """One conformity draw: flip toward the opposite camp with probability
    nu * (opposite camp size) / n_total. All-optimist and all-pessimist
    states are absorbing. Mutates and returns the state."""
    if state.mood is Mood.PESSIMISTIC:
        if u < nu * n_opt / n_total:
            state.mood = Mood.OPTIMISTIC
    else:
        if u < nu * n_pes / n_total:
            state.mood = Mood.PESSIMISTIC
    return state
