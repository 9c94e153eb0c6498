"""Agent sampling, forecast arithmetic, order sizing caps, mood dynamics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lobfactor.agents import (
    Agent,
    AgentParams,
    AgentState,
    CashSpec,
    Mood,
    PopulationConfig,
    decide_order,
    horizon,
    init_population,
    predict_price,
    predict_return,
    sample_pareto,
    update_mood,
)
from lobfactor.orderbook import Side


def make_agent(
    alpha_j=0.1, tau=100, cash=1e12, shares=0, mood=Mood.OPTIMISTIC,
    w_f=0.0, w_c=0.0, w_m=0.0, w_n=0.0, tau_f=200,
    committed_cash=0.0, committed_shares=0,
):
    params = AgentParams(w_f, w_c, w_m, w_n, tau, tau_f, alpha_j)
    state = AgentState(cash, shares, mood, committed_cash, committed_shares)
    return Agent(0, params, state)


# ---------------------------------------------------------------- pareto cash

def test_pareto_u_near_one_gives_scale():
    assert sample_pareto(5000.0, 1.5, 1.0 - 1e-15) == pytest.approx(5000.0, rel=1e-12)


def test_pareto_boundary_u_rejected():
    for u in (0.0, 1.0, -0.1, 1.1):
        with pytest.raises(ValueError):
            sample_pareto(5000.0, 1.5, u)


def test_pareto_sample_mean_and_ks():
    rng = np.random.default_rng(42)
    u = rng.random(100_000)
    u[u == 0.0] = 0.5
    x = np.array([sample_pareto(5000.0, 1.5, float(ui)) for ui in u[:10_000]])
    # closed-form mean beta*c_min/(beta-1) = 15000; heavy tail so loose band
    assert x.min() >= 5000.0
    # KS distance of the full vectorized draw against the exact CDF
    x_all = 5000.0 * u ** (-1.0 / 1.5)
    xs = np.sort(x_all)
    cdf = 1.0 - (5000.0 / xs) ** 1.5
    ecdf_hi = np.arange(1, xs.size + 1) / xs.size
    ecdf_lo = np.arange(0, xs.size) / xs.size
    ks = max(np.abs(ecdf_hi - cdf).max(), np.abs(ecdf_lo - cdf).max())
    assert ks < 0.01


# ------------------------------------------------------------ derived params

def test_horizon_and_risk_aversion_scaling():
    cfg = PopulationConfig(n_agents=500, lambda_f=10.0, lambda_c=2.0, alpha=0.2)
    agents = init_population(cfg, np.random.default_rng(7))
    for a in agents:
        expected_tau = max(1, int(100.0 * (1 + a.params.w_f) / (1 + a.params.w_c) + 0.5))
        assert a.params.tau == expected_tau
        assert a.params.alpha_j == pytest.approx(
            0.2 * (1 + a.params.w_f) / (1 + a.params.w_c)
        )
        assert a.params.tau_f == 200


def test_horizon_edge_values():
    assert horizon(0.0, 0.0) == 100
    assert horizon(10.0, 0.0) == 1100
    assert horizon(0.0, 1e6) == 1  # floor at one step


def test_init_population_draw_statistics():
    cfg = PopulationConfig(n_agents=100_000, lambda_f=10.0, lambda_c=0.0)
    agents = init_population(cfg, np.random.default_rng(3))
    w_f = np.array([a.params.w_f for a in agents])
    assert abs(w_f.mean() - 10.0) < 0.2
    assert all(a.params.w_c == 0.0 for a in agents[:100])
    frac_opt = np.mean([a.state.mood is Mood.OPTIMISTIC for a in agents])
    assert abs(frac_opt - 0.5) < 0.01
    cash = np.array([a.state.cash for a in agents])
    assert cash.min() > 0.0 and cash.max() < 30_000.0
    assert abs(cash.mean() - 15_000.0) < 300.0
    shares = np.array([a.state.shares for a in agents])
    assert shares.min() >= 0 and shares.max() <= 50


def test_init_population_pareto_cash():
    cfg = PopulationConfig(
        n_agents=200_000, cash=CashSpec(kind="pareto", c_min=5000.0, beta=1.5)
    )
    agents = init_population(cfg, np.random.default_rng(11))
    cash = np.array([a.state.cash for a in agents])
    assert cash.min() >= 5000.0
    assert abs(np.median(cash) - 5000.0 * 2 ** (1 / 1.5)) < 100.0


# ------------------------------------------------------------------ forecasts

def test_fundamental_only_forecast():
    a = make_agent(w_f=1.0)
    r = predict_return(a.params, a.state, 270.0, 300.0, 270.0, 0.0)
    assert r == pytest.approx(math.log(300.0 / 270.0) / 200.0)
    assert r == pytest.approx(5.268e-4, rel=1e-3)


def test_mood_only_forecast_is_plus_minus_one():
    a = make_agent(w_m=2.5, mood=Mood.OPTIMISTIC)
    assert predict_return(a.params, a.state, 300.0, 300.0, 300.0, 0.0) == 1.0
    a.state.mood = Mood.PESSIMISTIC
    assert predict_return(a.params, a.state, 300.0, 300.0, 300.0, 0.0) == -1.0


def test_all_zero_weights_abstains():
    a = make_agent()
    assert predict_return(a.params, a.state, 300.0, 300.0, 300.0, 0.0) is None


@given(
    w_f=st.floats(0.01, 50), w_c=st.floats(0.01, 10), w_n=st.floats(0.01, 5),
    eps=st.floats(-0.05, 0.05), p_t=st.floats(100, 500), p_lag=st.floats(100, 500),
)
def test_zero_mood_weight_matches_three_term_form(w_f, w_c, w_n, eps, p_t, p_lag):
    a = make_agent(w_f=w_f, w_c=w_c, w_n=w_n, tau=horizon(w_f, w_c))
    r = predict_return(a.params, a.state, p_t, 300.0, p_lag, eps)
    expected = (
        w_f / 200.0 * math.log(300.0 / p_t)
        + w_c / a.params.tau * math.log(p_t / p_lag)
        + w_n * eps
    ) / (w_f + w_c + w_n)
    assert r == pytest.approx(expected, rel=1e-12)


def test_predict_price_compounds_over_horizon():
    assert predict_price(300.0, 100, 0.001) == pytest.approx(300.0 * math.e**0.1)


def test_predict_price_clamps_exponent():
    assert predict_price(300.0, 10_000, 0.5) == pytest.approx(300.0 * math.e**10)
    assert predict_price(300.0, 10_000, -0.5) == pytest.approx(300.0 * math.e**-10)


# --------------------------------------------------------------- order sizing

def test_desired_holding_arithmetic():
    # closed form: pi* = ln(303/300) / (0.1 * 1e-4 * 300) = 3.31678
    pi = math.log(303.0 / 300.0) / (0.1 * 1e-4 * 300.0)
    assert round(pi) == 3

    buyer = make_agent(alpha_j=0.1, shares=0, cash=1e12)
    order = decide_order(buyer, 300.0, 303.0, 5, 1e-4, 10**9, 1e-4, 1)
    assert order.side is Side.BUY and order.volume == 3
    assert order.expiry_step == 5 + buyer.params.tau

    seller = make_agent(alpha_j=0.1, shares=17, cash=1e12)
    order = decide_order(seller, 300.0, 303.0, 5, 1e-4, 10**9, 1e-4, 1)
    assert order.side is Side.SELL and order.volume == 17 - 3


def test_buy_capped_by_uncommitted_cash():
    a = make_agent(alpha_j=0.1, cash=1000.0, committed_cash=400.0)
    order = decide_order(a, 300.0, 330.0, 1, 1e-4, 50, 1e-4, 1)
    assert order.side is Side.BUY
    assert order.volume == int(600.0 / order.limit_price)
    assert order.volume * order.limit_price <= 600.0


def test_sell_capped_by_uncommitted_shares():
    a = make_agent(alpha_j=0.1, cash=0.0, shares=30, committed_shares=12)
    order = decide_order(a, 300.0, 270.0, 1, 1e-4, 50, 1e-4, 1)
    assert order.side is Side.SELL and order.volume == 18


def test_volume_cap_applies():
    a = make_agent(alpha_j=0.01, cash=1e12)  # pi* ~ 318 shares, far above cap
    order = decide_order(a, 300.0, 330.0, 1, 1e-4, 50, 1e-4, 1)
    assert order.volume == 50


def test_tiny_gap_or_no_funds_abstains():
    a = make_agent(alpha_j=0.1, cash=0.0, shares=0)
    assert decide_order(a, 300.0, 330.0, 1, 1e-4, 50, 1e-4, 1) is None  # no cash
    b = make_agent(alpha_j=1e6)
    assert decide_order(b, 300.0, 300.0001, 1, 1e-4, 50, 1e-4, 1) is None  # pi* ~ 0


@settings(max_examples=200)
@given(
    cash=st.floats(0, 50_000), shares=st.integers(0, 200),
    committed_cash=st.floats(0, 20_000), committed_shares=st.integers(0, 100),
    p_hat=st.floats(10.0, 3000.0), alpha_j=st.floats(0.01, 5.0),
)
def test_orders_never_overdraw(cash, shares, committed_cash, committed_shares, p_hat, alpha_j):
    committed_cash = min(committed_cash, cash)
    committed_shares = min(committed_shares, shares)
    a = make_agent(
        alpha_j=alpha_j, cash=cash, shares=shares,
        committed_cash=committed_cash, committed_shares=committed_shares,
    )
    order = decide_order(a, 300.0, p_hat, 1, 1e-4, 50, 1e-4, 1)
    if order is None:
        return
    assert 1 <= order.volume <= 50
    if order.side is Side.BUY:
        assert order.volume * order.limit_price <= cash - committed_cash + 1e-9
    else:
        assert order.volume <= shares - committed_shares


# ----------------------------------------------------------------------- mood

def test_mood_flip_frequency_matches_probability():
    rng = np.random.default_rng(5)
    flips = 0
    trials = 100_000
    for u in rng.random(trials):
        s = AgentState(0.0, 0, Mood.PESSIMISTIC)
        update_mood(s, 150, 50, 200, 0.5, float(u))
        flips += s.mood is Mood.OPTIMISTIC
    assert flips / trials == pytest.approx(0.375, abs=0.005)


def test_consensus_states_absorb():
    s = AgentState(0.0, 0, Mood.OPTIMISTIC)
    for u in np.linspace(0.0, 0.999, 50):
        update_mood(s, 200, 0, 200, 0.7, float(u))
        assert s.mood is Mood.OPTIMISTIC
    s = AgentState(0.0, 0, Mood.PESSIMISTIC)
    for u in np.linspace(0.0, 0.999, 50):
        update_mood(s, 0, 200, 200, 0.7, float(u))
        assert s.mood is Mood.PESSIMISTIC


def test_zero_nu_freezes_moods():
    s = AgentState(0.0, 0, Mood.PESSIMISTIC)
    update_mood(s, 199, 1, 200, 0.0, 0.0)
    assert s.mood is Mood.PESSIMISTIC
