import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ilhedge import amm
from ilhedge.amm import Kind, PositionSpec
from ilhedge.bsm import BsmParams, ValuationContext, bsm_vanilla, pv_v3
from ilhedge.replication import (HedgePortfolio, MissingStrikesError, OptionChain, Quote,
                                 StrikeGrid, build_portfolio, call_weights,
                                 carr_madan_portfolio, delta_il, four_sqrt_value,
                                 portfolio_cost, portfolio_payoff, put_weights, replicate,
                                 replication_residual, write_portfolio)
import oracles

TAU = 14 / 365
RESIDUAL_PRICES = np.linspace(1000, 3000, 20001)


def linear(p):
    return 2.0 * np.asarray(p)


def test_delta_il_examples():
    k = np.array([1.0, 2.5, 4.0, 7.0])
    np.testing.assert_allclose(delta_il(linear, k), 2.0)
    np.testing.assert_array_equal(delta_il(lambda p: np.full_like(p, 3.0), k), 0.0)
    v2 = PositionSpec.v2(1.0, 2000.0, Kind.FUNDED)
    s = delta_il(lambda p: amm.il(v2, p), [1000.0, 2000.0])
    assert s[0] == pytest.approx((1 - math.sqrt(0.5)) / 1000, rel=1e-12)


@pytest.mark.parametrize("grid", [[1.0, 1.0, 2.0], [2.0, 1.0, 3.0], [1.0]])
def test_bad_grids_rejected(grid):
    with pytest.raises(ValueError):
        delta_il(linear, grid)


def test_put_weights_linear_and_quadratic():
    w = put_weights(linear, [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(w, [0, 0, 0, 2.0])
    w = put_weights(lambda p: np.asarray(p) ** 2, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(w, [0.0, -2.0, 5.0])
    with pytest.raises(ValueError):
        put_weights(linear, [1.0, 2.0])


def test_call_weights_linear_and_quadratic():
    w = call_weights(linear, [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(w, [-2.0, 0, 0, 0])
    w = call_weights(lambda p: np.asarray(p) ** 2, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(w, [-3.0, -2.0, 0.0])


def test_concave_il_gives_long_interior_options(v2_ref):
    il = lambda p: amm.il(v2_ref, p)
    k = np.arange(1000.0, 2001.0, 50.0)
    assert np.all(put_weights(il, k)[1:-1] > 0)
    k = np.arange(2000.0, 4001.0, 50.0)
    assert np.all(call_weights(il, k)[1:-1] > 0)


@given(st.lists(st.floats(0.1, 5.0), min_size=3, max_size=12), st.floats(-3, 3),
       st.floats(0.5, 2.0))
def test_weights_interpolate_any_function_at_nodes(gaps, curvature, start):
    k = start + np.cumsum(gaps)
    f = lambda p: curvature * np.sqrt(np.asarray(p)) + np.sin(np.asarray(p))
    wp, wc = put_weights(f, k), call_weights(f, k)
    puts = (np.maximum(k[None, :] - k[:, None], 0) * wp).sum(axis=1)
    calls = (np.maximum(k[:, None] - k[None, :], 0) * wc).sum(axis=1)
    scale = 1 + np.abs(f(k)).max()
    np.testing.assert_allclose(puts, f(k[-1]) - f(k), atol=1e-10 * scale)
    np.testing.assert_allclose(calls, f(k[0]) - f(k), atol=1e-10 * scale)


def test_portfolio_payoff_examples():
    assert portfolio_payoff(HedgePortfolio([], []), 1234.0) == 0.0
    assert portfolio_payoff(HedgePortfolio([(2000.0, 1.0)], []), 1500.0) == 500.0
    p = HedgePortfolio([(2000.0, 1.0)], [(2100.0, 2.0)], cash=-3.0)
    np.testing.assert_allclose(portfolio_payoff(p, [1500.0, 2050.0, 2200.0]),
                               [497.0, -3.0, 197.0])


def test_linear_target_is_replicated_exactly():
    grid = StrikeGrid.around(100.0, 5.0)
    port = replicate(linear, grid, scale=3.0)
    assert all(w == pytest.approx(0.0, abs=1e-12)
               for _, w in port.put_legs[:-1] + port.call_legs[1:])
    p = np.linspace(10.0, 400.0, 777)
    np.testing.assert_allclose(portfolio_payoff(port, p), -3.0 * linear(p), atol=1e-9)


def test_reference_grid_residual(v3_ref):
    port = build_portfolio(v3_ref, 50.0)
    mx, _ = replication_residual(v3_ref, port, RESIDUAL_PRICES)
    assert mx <= 2.5e-4
    strikes = [k for k, _ in port.put_legs + port.call_legs]
    at_nodes, _ = replication_residual(v3_ref, port, strikes)
    assert at_nodes <= 1e-8


def test_otm_only_and_split(v3_ref):
    port = build_portfolio(v3_ref, 50.0)
    assert max(k for k, _ in port.put_legs) == 2000.0 == min(k for k, _ in port.call_legs)
    assert port.put_legs[0][1] == 0.0 and port.call_legs[-1][1] == 0.0
    assert port.metadata["span"] == [1000.0, 4000.0]
    assert port.cash == 0.0


def test_snap_distance_reported():
    spec = PositionSpec.v3(1e6, 2010.0, 1490.0, 2530.0)
    port = build_portfolio(spec, 50.0)
    assert port.metadata["split"] == 2000.0
    assert port.metadata["snap_distance"] == {"p0": 10.0, "pa": 10.0, "pb": 20.0}
    strikes = [k for k, _ in port.put_legs + port.call_legs]
    assert replication_residual(spec, port, strikes)[0] <= 1e-8


@pytest.mark.parametrize("kind", [Kind.FUNDED, Kind.BORROWED])
def test_refinement_halves_residual(kind):
    spec = PositionSpec.v3(1e6, 2000.0, 1500.0, 2500.0, kind)
    res = [replication_residual(spec, build_portfolio(spec, w), RESIDUAL_PRICES)[0]
           for w in (100.0, 50.0, 25.0)]
    assert res[1] <= res[0] / 2 and res[2] <= res[1] / 2


def test_negated_portfolio(v3_ref):
    port = build_portfolio(v3_ref, 50.0)
    neg = port.negated()
    p = np.linspace(1200, 2800, 5)
    np.testing.assert_allclose(portfolio_payoff(neg, p), -portfolio_payoff(port, p))


def test_grid_needs_room_on_both_sides():
    with pytest.raises(ValueError):
        StrikeGrid.around(2000.0, 50.0, span=(1950.0, 3000.0))
    with pytest.raises(ValueError):
        StrikeGrid.around(2000.0, 0.0)


# -- continuous strip -------------------------------------------------------------------

def test_four_sqrt_form_is_value_per_liquidity(v3_ref):
    p = np.geomspace(500, 8000, 301)
    np.testing.assert_allclose(four_sqrt_value(v3_ref.range, p) * v3_ref.liquidity,
                               amm.position_value(v3_ref, p), rtol=1e-12)


def test_strip_second_order_in_step(v3_ref):
    f = v3_ref.with_kind(Kind.FUNDED)
    exact = four_sqrt_value(f.range, 2000.0)
    e1 = carr_madan_portfolio(f, 20.0).value(2000.0) - exact
    e2 = carr_madan_portfolio(f, 10.0).value(2000.0) - exact
    assert e1 / e2 == pytest.approx(4.0, rel=0.05)


def test_strip_with_printed_third_term_is_off_by_constant(v3_ref):
    """Using pa as the strike of the pb-weighted forward shifts the value by (pa-pb)/(2 sqrt pb)."""
    strip = carr_madan_portfolio(v3_ref, 1.0)
    p = np.linspace(1000, 3000, 11)
    printed = strip.value(p) + ((1500 - p) - (2500 - p)) / (2 * 50)
    gap = printed - four_sqrt_value(v3_ref.range, p)
    np.testing.assert_allclose(gap, (1500 - 2500) / 100, atol=1e-5)


def test_strip_density_vanishes_for_degenerate_range():
    sums = []
    for half in (1e-1, 1e-3):
        spec = PositionSpec.v3(1.0, 2000.0, 2000.0 - half, 2000.0 + half)
        sums.append(carr_madan_portfolio(spec, half / 10).weights.sum())
        assert sums[-1] == pytest.approx(0.25 * 2 * half * 2000.0 ** -1.5, rel=1e-6)
    assert sums[1] < sums[0] / 50


def test_strip_and_discrete_portfolio_agree_in_range(v3_ref):
    f = v3_ref.with_kind(Kind.FUNDED)
    p = np.linspace(1500, 2500, 2001)
    strip = carr_madan_portfolio(f, 5.0)
    strip_il = strip.value(p) / f.value_per_liquidity - 1
    strip_err = np.max(np.abs(strip_il - amm.il(f, p)))
    port = build_portfolio(f, 50.0)
    disc_err, res = replication_residual(f, port, p)
    disc_il = -portfolio_payoff(port, p) / f.notional
    assert np.max(np.abs(strip_il - disc_il)) <= strip_err + disc_err + 1e-12


# -- chains and cost -------------------------------------------------------------------

def bsm_chain(strikes, sigma=0.5, tau=TAU, spread=0.0):
    recs = []
    for k in strikes:
        for side, omega in (("put", -1), ("call", 1)):
            mid = float(bsm_vanilla(2000.0, k, omega, BsmParams(sigma), tau))
            recs.append(Quote(k, side, max(mid - spread, 0.0), mid + spread, mid))
    return OptionChain(tau, recs)


def test_cost_examples():
    zero = OptionChain(TAU, [Quote(2000.0, "put", 0, 0, 0), Quote(2000.0, "call", 0, 0, 0)])
    assert portfolio_cost(HedgePortfolio([(2000.0, 1.0)], [(2000.0, 3.0)]), zero) == 0.0
    one = OptionChain(TAU, [Quote(2000.0, "put", 9, 11, 10)])
    assert portfolio_cost(HedgePortfolio([(2000.0, 2.0)], []), one) == 20.0
    assert portfolio_cost(HedgePortfolio([(2000.0, 2.0)], []), one, "ask") == 22.0


def test_missing_strikes_listed(v3_ref):
    port = build_portfolio(v3_ref, 50.0)
    chain = bsm_chain(np.arange(1000.0, 3001.0, 50.0))
    with pytest.raises(MissingStrikesError) as info:
        portfolio_cost(port, chain)
    assert ("call", 3050.0) in info.value.missing and "call 4000" in str(info.value)


def test_cost_consistent_with_model_pv(v3_ref):
    port = build_portfolio(v3_ref, 50.0)
    strikes = np.arange(1000.0, 4001.0, 50.0)
    cost = portfolio_cost(port, bsm_chain(strikes))
    # the chain prices every leg, so the cost is the model value of the option payoff
    model = oracles.gbm_expectation(lambda s: portfolio_payoff(port, s, include_cash=False),
                                    2000.0, 0.5, TAU, breaks=tuple(strikes))
    assert cost == pytest.approx(model, rel=1e-9)
    pv = pv_v3(v3_ref, ValuationContext.for_spec(v3_ref, TAU), BsmParams(0.5))
    bound, _ = replication_residual(v3_ref, port, np.linspace(100, 20000, 200001))
    assert abs(cost + port.cash - v3_ref.notional * pv) <= bound * v3_ref.notional


def test_cost_invariant_to_regridding(v3_ref):
    costs, bounds = [], []
    for w in (50.0, 25.0):
        port = build_portfolio(v3_ref, w)
        costs.append(portfolio_cost(port, bsm_chain(np.arange(1000.0, 4001.0, w))))
        bounds.append(replication_residual(v3_ref, port, RESIDUAL_PRICES)[0])
    assert abs(costs[0] - costs[1]) <= (bounds[0] + bounds[1]) * v3_ref.notional


def test_chain_validation_and_csv(tmp_path):
    with pytest.raises(ValueError):
        OptionChain(TAU, [Quote(100.0, "put", 2.0, 1.0, 1.5)])
    with pytest.raises(ValueError):
        OptionChain(TAU, [Quote(100.0, "straddle", 1.0, 2.0, 1.5)])
    chain = bsm_chain([1900.0, 2000.0], spread=0.5)
    path = tmp_path / "chain.csv"
    chain.to_csv(path)
    assert path.read_text().splitlines()[0] == "strike,side,bid,ask,mid"
    back = OptionChain.from_csv(path, TAU)
    assert back.records == chain.records
    bad = tmp_path / "bad.csv"
    bad.write_text("k,side,bid,ask,mid\n")
    with pytest.raises(ValueError):
        OptionChain.from_csv(bad, TAU)


def test_portfolio_export(tmp_path, v3_ref):
    port = build_portfolio(v3_ref, 50.0)
    write_portfolio(port, tmp_path / "p.csv", tmp_path / "p.json", {"residual_max": 1.0})
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "side,strike,weight"
    assert len(lines) == 1 + len(port.put_legs) + len(port.call_legs)
    assert '"residual_max": 1.0' in (tmp_path / "p.json").read_text()
