import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ilhedge import amm
from ilhedge.amm import Kind, PositionSpec, PriceRange, Protocol
import oracles
from strategies import log_moves, v2_specs, v3_specs


# -- V2 ----------------------------------------------------------------------------------

@pytest.mark.parametrize("p, x, y", [(2000, 250, 500000), (1500, 288.68, 433013),
                                     (2500, 223.61, 559017)])
def test_v2_reserves_match_reference_units(p, x, y):
    r = amm.v2_reserves(11180.3399, p)
    assert r.x == pytest.approx(x, abs=0.5)
    assert r.y == pytest.approx(y, abs=10)


def test_v2_reserves_identity():
    r = amm.v2_reserves(1.0, 1.0)
    assert (r.x, r.y) == (1.0, 1.0)


@pytest.mark.parametrize("n, p0, expected", [(1e6, 2000, 1e6 / (2 * math.sqrt(2000))),
                                             (2, 1, 1.0), (1e6, 8000, 5590.169943749474)])
def test_v2_liquidity_from_notional(n, p0, expected):
    L = amm.v2_liquidity_from_notional(n, p0)
    assert L == pytest.approx(expected, rel=1e-12)
    r = amm.v2_reserves(L, p0)
    assert p0 * r.x + r.y == pytest.approx(n, rel=1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_v2_rejects_nonpositive(bad):
    with pytest.raises(ValueError):
        amm.v2_reserves(bad, 1.0)
    with pytest.raises(ValueError):
        amm.v2_reserves(1.0, bad)
    with pytest.raises(ValueError):
        amm.v2_liquidity_from_notional(bad, 1.0)


def test_v2_value_is_two_l_sqrt_p_on_log_grid(v2_ref):
    p = np.geomspace(1e-3, 1e7, 1000)
    r = amm.v2_reserves(v2_ref.liquidity, p)
    np.testing.assert_allclose(r.x * r.y, v2_ref.liquidity ** 2, rtol=1e-14)
    np.testing.assert_allclose(amm.position_value(v2_ref, p),
                               2 * v2_ref.liquidity * np.sqrt(p), rtol=1e-14)


def test_v2_pnl_and_il_examples(v2_ref):
    b = v2_ref
    assert amm.pnl(b, 2000.0) == 0.0
    assert amm.pnl(b, 8000.0) == pytest.approx(-b.liquidity * math.sqrt(2000), rel=1e-12)
    assert amm.pnl(b, 8000.0) == pytest.approx(-500000, rel=1e-9)
    assert amm.il(b.with_kind(Kind.FUNDED), 8000.0) == pytest.approx(1.0, rel=1e-12)
    assert amm.il(b.with_kind(Kind.BORROWED_RELATIVE), 8000.0) == pytest.approx(-0.2, rel=1e-12)


@given(v2_specs(), log_moves)
def test_v2_protection_payoff_matches_branchwise(spec, move):
    p = spec.p0 * math.exp(move)
    expected = oracles.v2_protection_branchwise(spec.kind.value, spec.p0, p)
    assert amm.protection_payoff(spec, p) == pytest.approx(expected, rel=1e-10, abs=1e-12)
    assert amm.protection_payoff(spec, p) == pytest.approx(-amm.il(spec, p), rel=1e-10,
                                                           abs=1e-12)


# -- V3 reserves -------------------------------------------------------------------------

L_REF = 93345.53114807632  # root search on the branch-wise value, tests/oracles.py


def test_v3_liquidity_matches_root_search(v3_ref):
    assert v3_ref.liquidity == pytest.approx(L_REF, rel=1e-13)


@pytest.mark.parametrize("p, x, y", [(2000, 220.36, 559282), (1500, 543.26, 0.0),
                                     (1000, 543.26, 0.0), (2500, 0.0, 1052020),
                                     (3000, 0.0, 1052020)])
def test_v3_reserves_match_reference_units(v3_ref, p, x, y):
    r = v3_ref.reserves(p)
    assert r.x == pytest.approx(x, abs=0.5)
    assert r.y == pytest.approx(y, abs=10)


def test_v3_value_at_upper_bound(v3_ref):
    assert amm.position_value(v3_ref, 2500.0) == pytest.approx(1052020, abs=10)


def test_v3_narrow_range_round_trip():
    spec = PositionSpec.v3(1e6, 2000, 1999, 2001)
    assert spec.liquidity == pytest.approx(oracles.liquidity_by_root(1e6, 2000, 1999, 2001),
                                           rel=1e-10)
    assert spec.liquidity == pytest.approx(4.4726946e7, rel=1e-7)
    assert amm.position_value(spec, 2000.0) == pytest.approx(1e6, rel=1e-8)


def test_v3_entry_at_lower_bound():
    # y0 = 0 but the value per unit liquidity stays positive
    spec = PositionSpec.v3(1.0, 1.0, 1.0, 4.0)
    assert spec.liquidity == pytest.approx(1.0 / (2 - 0.5 - 1), rel=1e-14)


def test_v3_out_of_range_entry_is_single_asset():
    spec = PositionSpec.v3(1e6, 1000.0, 1500.0, 2500.0)
    r = spec.initial_reserves
    assert r.y == 0.0
    assert 1000.0 * r.x == pytest.approx(1e6, rel=1e-12)
    assert spec.liquidity == pytest.approx(oracles.liquidity_by_root(1e6, 1000, 1500, 2500),
                                           rel=1e-10)


@pytest.mark.parametrize("pa, pb", [(2000, 2000), (2500, 1500), (0, 10), (-1, 10)])
def test_invalid_range_rejected(pa, pb):
    with pytest.raises(ValueError):
        PriceRange(pa, pb)


def test_spec_protocol_consistency():
    with pytest.raises(ValueError):
        PositionSpec(Protocol.V3, 1.0, 1.0)
    with pytest.raises(ValueError):
        PositionSpec(Protocol.V2, 1.0, 1.0, range=PriceRange(0.5, 2))
    with pytest.raises(ValueError):
        PositionSpec(Protocol.V2, 1.0, 0.0)


@given(v3_specs(in_range=False), log_moves)
def test_v3_reserves_match_branchwise_oracle(spec, move):
    p = spec.p0 * math.exp(move)
    r = spec.reserves(p)
    x, y = oracles.reserves_branchwise(spec.liquidity, p, spec.range.pa, spec.range.pb)
    assert r.x >= 0 and r.y >= 0
    assert r.x == pytest.approx(x, rel=1e-12, abs=1e-12 * spec.liquidity / math.sqrt(spec.range.pb))
    assert r.y == pytest.approx(y, rel=1e-12, abs=1e-12 * spec.liquidity * math.sqrt(spec.range.pa))


@given(v3_specs(), st.floats(min_value=0.0, max_value=1.0))
def test_v3_virtual_reserve_invariant(spec, t):
    pa, pb, L = spec.range.pa, spec.range.pb, spec.liquidity
    p = pa * (pb / pa) ** t
    r = spec.reserves(p)
    assert (r.x + L / math.sqrt(pb)) * (r.y + L * math.sqrt(pa)) == pytest.approx(L * L,
                                                                                   rel=1e-10)


@given(v3_specs())
def test_v3_reserves_continuous_at_bounds(spec):
    for b in (spec.range.pa, spec.range.pb):
        lo, hi = spec.reserves(b * (1 - 1e-13)), spec.reserves(b * (1 + 1e-13))
        scale = spec.notional / b + spec.notional
        assert abs(lo.x - hi.x) * b <= 1e-9 * scale
        assert abs(lo.y - hi.y) <= 1e-9 * scale


@given(v3_specs(in_range=False))
def test_value_at_entry_is_notional(spec):
    assert amm.position_value(spec, spec.p0) == pytest.approx(spec.notional, rel=1e-10)


# -- P&L, IL, payoff ---------------------------------------------------------------------

def test_v3_funded_constant_above_upper_bound(v3_ref):
    f = v3_ref.with_kind(Kind.FUNDED)
    expected = L_REF * (50 + 2000 / 50 - 2 * math.sqrt(2000))
    assert expected == pytest.approx(52020, abs=10)
    for p in (2500.0, 3000.0, 1e5):
        assert amm.pnl(f, p) == pytest.approx(expected, rel=1e-12)


def test_v3_borrowed_il_at_lower_bound(v3_ref):
    expected = -L_REF * math.sqrt(2000) * (math.sqrt(1500 / 2000) - 1) ** 2 / 1e6
    assert amm.il(v3_ref, 1500.0) == pytest.approx(expected, rel=1e-12)
    assert amm.il(v3_ref, 1500.0) == pytest.approx(-0.07492960491458711, rel=1e-12)
    assert amm.protection_payoff_compact(v3_ref, 1500.0) == pytest.approx(-expected,
                                                                             rel=1e-12)


def test_v3_funded_payoff_below_range(v3_ref):
    f = v3_ref.with_kind(Kind.FUNDED)
    sa, sb, s0 = math.sqrt(1500), math.sqrt(2500), math.sqrt(2000)
    clamp = (1000 / sa + sa - 1000 / sb - sa) / (2000 / s0 + s0 - 2000 / sb - sa) - 1
    assert amm.protection_payoff(f, 1000.0) == pytest.approx(-clamp, rel=1e-12)
    assert amm.protection_payoff(f, 1000.0) == pytest.approx(0.4567393724322913, rel=1e-12)


def test_v3_borrowed_payoff_zero_at_entry(v3_ref):
    assert amm.protection_payoff(v3_ref, 2000.0) == 0.0


@given(v3_specs(in_range=False), log_moves)
def test_closed_form_pnl_equals_value_difference(spec, move):
    p = spec.p0 * math.exp(move)
    closed = amm.pnl_closed_form(spec, p)
    direct = amm.pnl_from_reserves(spec, p)
    assert closed == pytest.approx(direct, rel=1e-10, abs=1e-10 * spec.notional * (1 + p / spec.p0))


@given(v3_specs(in_range=False), log_moves)
def test_il_matches_branchwise_oracle(spec, move):
    p = spec.p0 * math.exp(move)
    expected = oracles.il_branchwise(spec.kind.value, spec.notional, spec.p0, spec.range.pa,
                                     spec.range.pb, p)
    assert amm.il(spec, p) == pytest.approx(expected, rel=1e-8, abs=1e-9 * (1 + p / spec.p0))


@given(v3_specs(in_range=False), log_moves)
def test_compact_payoff_equals_minus_il(spec, move):
    p = spec.p0 * math.exp(move)
    compact = amm.protection_payoff_compact(spec, p)
    assert compact == pytest.approx(-amm.il(spec, p), rel=1e-10, abs=1e-10 * (1 + p / spec.p0))


@given(st.one_of(v3_specs(kinds=st.just(Kind.BORROWED), in_range=False),
                 v2_specs(kinds=st.just(Kind.BORROWED))), log_moves)
def test_borrowed_payoff_nonnegative(spec, move):
    assert amm.protection_payoff(spec, spec.p0 * math.exp(move)) >= -1e-12


@pytest.mark.parametrize("kind", [Kind.FUNDED, Kind.BORROWED])
def test_v3_converges_to_v2_for_wide_range(kind):
    p0 = 2000.0
    v2 = PositionSpec.v2(1e6, p0, kind)
    p = np.geomspace(p0 / 4, p0 * 4, 201)
    v3 = PositionSpec.v3(1e6, p0, p0 * 1e-6, p0 * 1e6, kind)
    np.testing.assert_allclose(amm.il(v3, p), amm.il(v2, p), atol=1e-3)
    # the gap is O(sqrt(pa/p0) + sqrt(p0/pb)) relative to |IL|
    gaps = []
    for w in (1e-4, 1e-6, 1e-8):
        v3 = PositionSpec.v3(1e6, p0, p0 * w, p0 / w, kind)
        gaps.append(np.max(np.abs(amm.il(v3, p) - amm.il(v2, p))))
    assert gaps[1] < gaps[0] / 8 and gaps[2] < gaps[1] / 8


def test_relative_kind_excluded_from_pnl_and_payoff(v3_ref):
    rel = v3_ref.with_kind(Kind.BORROWED_RELATIVE)
    with pytest.raises(ValueError):
        amm.pnl(rel, 2100.0)
    with pytest.raises(ValueError):
        amm.protection_payoff(rel, 2100.0)
    hold = 2100 * v3_ref.initial_reserves.x + v3_ref.initial_reserves.y
    expected = (amm.position_value(v3_ref, 2100.0) - hold) / hold
    assert amm.il(rel, 2100.0) == pytest.approx(expected, rel=1e-12)


def test_vectorised_inputs_keep_shape(v3_ref):
    p = np.linspace(1000, 3000, 7)
    assert np.shape(amm.il(v3_ref, p)) == (7,)
    assert isinstance(amm.il(v3_ref, 2100.0), float)
