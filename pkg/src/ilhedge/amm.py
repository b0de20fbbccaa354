"""Reserve math and impermanent-loss formulas for Uniswap V2/V3 positions.

All amounts are in token-2 (quote) units, prices are token-2 per token-1.
Functions accept scalar or array prices and return the same shape.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


class Protocol(enum.Enum):
    V2 = "v2"
    V3 = "v3"


class Kind(enum.Enum):
    FUNDED = "funded"
    BORROWED = "borrowed"  # nominal borrowed IL
    BORROWED_RELATIVE = "borrowed_relative"


@dataclass(frozen=True)
class PriceRange:
    pa: float
    pb: float

    def __post_init__(self):
        if not (self.pa > 0 and self.pb > 0):
            raise ValueError(f"range bounds must be positive, got [{self.pa}, {self.pb}]")
        if not self.pa < self.pb:
            raise ValueError(f"need pa < pb, got [{self.pa}, {self.pb}]")

    @classmethod
    def from_multiple(cls, p0: float, m: float) -> "PriceRange":
        """Symmetric log-range [e^-m p0, e^m p0]."""
        return cls(p0 * math.exp(-m), p0 * math.exp(m))

    def clamp(self, p: ArrayLike) -> ArrayLike:
        return np.clip(p, self.pa, self.pb)


@dataclass(frozen=True)
class Reserves:
    x: ArrayLike
    y: ArrayLike


@dataclass(frozen=True)
class PositionSpec:
    """A liquidity position: protocol, entry price, range (V3 only), liquidity and IL kind."""

    protocol: Protocol
    p0: float
    liquidity: float
    kind: Kind = Kind.BORROWED
    range: Optional[PriceRange] = None

    def __post_init__(self):
        if not self.p0 > 0:
            raise ValueError(f"p0 must be positive, got {self.p0}")
        if not self.liquidity > 0:
            raise ValueError(f"liquidity must be positive, got {self.liquidity}")
        if self.protocol is Protocol.V3 and self.range is None:
            raise ValueError("V3 position needs a price range")
        if self.protocol is Protocol.V2 and self.range is not None:
            raise ValueError("V2 position carries no price range")

    @classmethod
    def v2(cls, notional: float, p0: float, kind: Kind = Kind.BORROWED) -> "PositionSpec":
        return cls(Protocol.V2, p0, v2_liquidity_from_notional(notional, p0), kind)

    @classmethod
    def v3(cls, notional: float, p0: float, pa: float, pb: float,
           kind: Kind = Kind.BORROWED) -> "PositionSpec":
        rng = PriceRange(pa, pb)
        return cls(Protocol.V3, p0, v3_liquidity_from_notional(notional, p0, rng), kind, rng)

    def with_kind(self, kind: Kind) -> "PositionSpec":
        return PositionSpec(self.protocol, self.p0, self.liquidity, kind, self.range)

    def reserves(self, p: ArrayLike) -> Reserves:
        if self.protocol is Protocol.V2:
            return v2_reserves(self.liquidity, p)
        return v3_reserves(self.liquidity, p, self.range)

    @property
    def initial_reserves(self) -> Reserves:
        return self.reserves(self.p0)

    @property
    def notional(self) -> float:
        """Initial position value V0 = p0 x0 + y0."""
        return float(position_value(self, self.p0))

    @property
    def value_per_liquidity(self) -> float:
        """V0 / L; the IL normalisation (2 sqrt(p0) for V2)."""
        return self.notional / self.liquidity


def _check_positive(name: str, v: ArrayLike) -> None:
    if np.any(np.asarray(v) <= 0) or np.any(~np.isfinite(np.asarray(v, dtype=float))):
        raise ValueError(f"{name} must be positive and finite")


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def v2_reserves(L: float, p: ArrayLike) -> Reserves:
    _check_positive("L", L)
    _check_positive("p", p)
    p = np.asarray(p, dtype=float)
    return Reserves(_out(L / np.sqrt(p)), _out(L * np.sqrt(p)))


def v2_liquidity_from_notional(N: float, p0: float) -> float:
    _check_positive("N", N)
    _check_positive("p0", p0)
    return N / (2.0 * math.sqrt(p0))


def v3_reserves(L: float, p: ArrayLike, rng: PriceRange) -> Reserves:
    """Token units of a V3 position; p <= pa is all token-1, p >= pb all token-2."""
    _check_positive("L", L)
    _check_positive("p", p)
    p = np.asarray(p, dtype=float)
    sa, sb = math.sqrt(rng.pa), math.sqrt(rng.pb)
    sf = np.sqrt(np.clip(p, rng.pa, rng.pb))
    # the clamp reproduces the three branches exactly
    x = L * (1.0 / sf - 1.0 / sb)
    y = L * (sf - sa)
    x = np.where(p >= rng.pb, 0.0, x)
    y = np.where(p <= rng.pa, 0.0, y)
    return Reserves(_out(x), _out(y))


def v3_liquidity_from_notional(N: float, p0: float, rng: PriceRange) -> float:
    """Liquidity L so that the position is worth N at p0.

    For p0 outside the range the single-asset value is used.
    """
    _check_positive("N", N)
    _check_positive("p0", p0)
    denom = _v3_value_per_liquidity(p0, rng)
    if not denom > 0:
        raise ValueError(
            f"position value per unit liquidity is {denom!r} at p0={p0} for range "
            f"[{rng.pa}, {rng.pb}]; cannot size liquidity")
    return N / denom


def _v3_value_per_liquidity(p: ArrayLike, rng: PriceRange) -> ArrayLike:
    # p/sqrt(f) + sqrt(f) - p/sqrt(pb) - sqrt(pa), f the clamped price
    sf = np.sqrt(np.clip(p, rng.pa, rng.pb))
    return p / sf + sf - p / math.sqrt(rng.pb) - math.sqrt(rng.pa)


def position_value(spec: PositionSpec, p: ArrayLike) -> ArrayLike:
    """LP value p*x(p) + y(p) in token-2 units."""
    r = spec.reserves(p)
    return _out(np.asarray(p, dtype=float) * r.x + r.y)


def _hold_value(spec: PositionSpec, p: ArrayLike) -> ArrayLike:
    """Buy-and-hold value p*x0 + y0 of the initial stake."""
    r0 = spec.initial_reserves
    return np.asarray(p, dtype=float) * r0.x + r0.y


def pnl_from_reserves(spec: PositionSpec, p_t: ArrayLike) -> ArrayLike:
    """P&L from first principles: value difference, plus the short hedge for borrowed."""
    _require_nominal(spec)
    v = position_value(spec, p_t)
    if spec.kind is Kind.FUNDED:
        return _out(v - spec.notional)
    return _out(v - _hold_value(spec, p_t))


def pnl_closed_form(spec: PositionSpec, p_t: ArrayLike) -> ArrayLike:
    _require_nominal(spec)
    _check_positive("p_t", p_t)
    p = np.asarray(p_t, dtype=float)
    L, p0 = spec.liquidity, spec.p0
    s0 = math.sqrt(p0)
    if spec.protocol is Protocol.V2:
        if spec.kind is Kind.FUNDED:
            return _out(2 * L * s0 * (np.sqrt(p / p0) - 1))
        return _out(-L * s0 * (np.sqrt(p / p0) - 1) ** 2)

    pa, pb = spec.range.pa, spec.range.pb
    sa, sb = math.sqrt(pa), math.sqrt(pb)
    if not pa < p0 < pb:
        # branch formulas below assume an in-range entry; use the clamp form
        return _out(spec.liquidity * spec.value_per_liquidity * _il_compact(spec, p))
    if spec.kind is Kind.FUNDED:
        inside = 2 * (np.sqrt(p) - s0) + (p0 - p) / sb
        below = p * (1 / sa - 1 / sb) + p0 / sb - 2 * s0 + sa
        above = np.full_like(p, sb + p0 / sb - 2 * s0)
    else:
        inside = -s0 * (np.sqrt(p / p0) - 1) ** 2
        below = p * (1 / sa - 1 / s0) - (s0 - sa)
        above = (sb - s0) - p * (1 / s0 - 1 / sb)
    out = np.where(p <= pa, below, np.where(p >= pb, above, inside))
    return _out(L * out)


def pnl(spec: PositionSpec, p_t: ArrayLike) -> ArrayLike:
    """Token-2 P&L of a funded or nominal-borrowed position at price p_t."""
    closed = pnl_closed_form(spec, p_t)
    if __debug__:
        direct = pnl_from_reserves(spec, p_t)
        scale = spec.notional * (1.0 + np.asarray(p_t) / spec.p0)
        assert np.all(np.abs(np.asarray(closed) - direct) <= 1e-9 * scale), \
            "closed-form P&L disagrees with reserve-based P&L"
    return closed


def il(spec: PositionSpec, p_t: ArrayLike) -> ArrayLike:
    """Dimensionless impermanent loss of the position at p_t."""
    _check_positive("p_t", p_t)
    v0 = spec.notional
    if not v0 > 0:
        raise ValueError("initial position value is zero")
    if spec.kind is Kind.BORROWED_RELATIVE:
        hold = _hold_value(spec, p_t)
        return _out((position_value(spec, p_t) - hold) / hold)
    return _out(np.asarray(pnl(spec, p_t)) / v0)


def _il_compact(spec: PositionSpec, p: ArrayLike) -> ArrayLike:
    """IL via the clamp formulas; valid for any entry price."""
    rng = spec.range
    p = np.asarray(p, dtype=float)
    sb, sa = math.sqrt(rng.pb), math.sqrt(rng.pa)
    sf = np.sqrt(rng.clamp(p))
    sf0 = math.sqrt(min(max(spec.p0, rng.pa), rng.pb))
    denom = spec.p0 / sf0 + sf0 - spec.p0 / sb - sa
    if spec.kind is Kind.FUNDED:
        return (p / sf + sf - p / sb - sa) / denom - 1.0
    return (p / sf + sf - p / sf0 - sf0) / denom


def protection_payoff_compact(spec: PositionSpec, p_T: ArrayLike) -> ArrayLike:
    """V3 protection payoff from the clamp formulas."""
    _require_nominal(spec)
    if spec.protocol is not Protocol.V3:
        raise ValueError("compact clamp formula applies to V3 positions")
    return _out(-_il_compact(spec, p_T))


def protection_payoff(spec: PositionSpec, p_T: ArrayLike) -> ArrayLike:
    """Payoff of the IL protection claim, -IL(p_T), per unit of initial notional."""
    _require_nominal(spec)
    _check_positive("p_T", p_T)
    p = np.asarray(p_T, dtype=float)
    if spec.protocol is Protocol.V2:
        r = np.sqrt(p / spec.p0)
        out = 1.0 - r if spec.kind is Kind.FUNDED else 0.5 * (r - 1.0) ** 2
        return _out(out)
    out = -np.asarray(il(spec, p))
    if __debug__:
        compact = -_il_compact(spec, p)
        assert np.all(np.abs(out - compact) <= 1e-9 * (1 + np.abs(compact) + p / spec.p0)), \
            "compact payoff disagrees with -IL"
    return _out(out)


def _require_nominal(spec: PositionSpec) -> None:
    if spec.kind is Kind.BORROWED_RELATIVE:
        raise ValueError("P&L and protection payoff are defined for funded and nominal "
                         "borrowed kinds only; use il() for the relative kind")
