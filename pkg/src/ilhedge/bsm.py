"""Closed-form Black-Scholes-Merton values and deltas of IL protection claims.

PVs and deltas are per unit of initial notional, matching amm.il normalisation.
Normal CDF is scipy.special.ndtr (erfc based, ~1e-16 absolute).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from . import amm
from .amm import Kind, PositionSpec, PriceRange, Protocol
from .decomposition import decompose

YEAR_DAYS = 365.0


def _npdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class BsmParams:
    sigma: float
    r: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (math.isfinite(self.r) and math.isfinite(self.q)):
            raise ValueError("rates must be finite")

    @property
    def mu(self) -> float:
        return self.r - self.q


@dataclass(frozen=True)
class ValuationContext:
    """Time to maturity, current price and realised log-performance since entry."""

    tau: float
    p_t: float
    x_t: float = 0.0

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")
        if not self.p_t > 0:
            raise ValueError(f"p_t must be positive, got {self.p_t}")

    @classmethod
    def for_spec(cls, spec: PositionSpec, tau: float,
                 p_t: Optional[float] = None) -> "ValuationContext":
        p_t = spec.p0 if p_t is None else p_t
        return cls(tau, p_t, math.log(p_t / spec.p0))

    def with_price(self, p_t: float, p0: float) -> "ValuationContext":
        return ValuationContext(self.tau, p_t, math.log(p_t / p0))


def _d_pm(p, k, params, tau):
    sd = params.sigma * math.sqrt(tau)
    d_minus = (np.log(p / k) + params.mu * tau) / sd - 0.5 * sd
    return d_minus + sd, d_minus


def bsm_vanilla(p_t, k, omega: int, params: BsmParams, tau: float):
    """Call (omega=+1) or put (omega=-1) value."""
    if tau == 0:
        return np.maximum(omega * (np.asarray(p_t) - k), 0.0)
    dp, dm = _d_pm(p_t, k, params, tau)
    return (math.exp(-params.q * tau) * p_t * ndtr(omega * dp)
            - k * math.exp(-params.r * tau) * ndtr(omega * dm)) * omega


def bsm_digital(p_t, k, omega: int, params: BsmParams, tau: float):
    """Cash-or-nothing digital paying 1 if omega*(p_T - k) >= 0."""
    if tau == 0:
        return (omega * (np.asarray(p_t) - k) >= 0).astype(float)
    _, dm = _d_pm(p_t, k, params, tau)
    return math.exp(-params.r * tau) * ndtr(omega * dm)


def bsm_vanilla_delta(p_t, k, omega: int, params: BsmParams, tau: float):
    dp, _ = _d_pm(p_t, k, params, tau)
    return omega * math.exp(-params.q * tau) * ndtr(omega * dp)


def bsm_digital_delta(p_t, k, omega: int, params: BsmParams, tau: float):
    _, dm = _d_pm(p_t, k, params, tau)
    return omega * math.exp(-params.r * tau) * _npdf(dm) / (p_t * params.sigma * math.sqrt(tau))


def _sqrt_bounds(p_t, rng: PriceRange, params: BsmParams, tau: float):
    sd = params.sigma * math.sqrt(tau)
    zb = (np.log(rng.pb / p_t) - params.mu * tau) / sd
    za = (np.log(rng.pa / p_t) - params.mu * tau) / sd
    return za, zb, sd


def sqrt_claim(p_t, rng: PriceRange, params: BsmParams, tau: float, coefficient: float = 2.0):
    """Value of coefficient * sqrt(p_T) 1{pa < p_T < pb}."""
    p_t = np.asarray(p_t, dtype=float)
    if tau == 0:
        return coefficient * np.sqrt(p_t) * ((p_t > rng.pa) & (p_t < rng.pb))
    za, zb, _ = _sqrt_bounds(p_t, rng, params, tau)
    growth = math.exp(0.5 * params.mu * tau - params.sigma ** 2 * tau / 8.0)
    return (coefficient * math.exp(-params.r * tau) * np.sqrt(p_t) * growth
            * (ndtr(zb) - ndtr(za)))


def sqrt_claim_delta(p_t, rng: PriceRange, params: BsmParams, tau: float,
                     coefficient: float = 2.0):
    p_t = np.asarray(p_t, dtype=float)
    za, zb, sd = _sqrt_bounds(p_t, rng, params, tau)
    growth = math.exp(0.5 * params.mu * tau - params.sigma ** 2 * tau / 8.0)
    sp = np.sqrt(p_t)
    return coefficient * math.exp(-params.r * tau) * growth * (
        (ndtr(zb) - ndtr(za)) / (2.0 * sp) - (_npdf(zb) - _npdf(za)) / (sd * sp))


def pv_v2(spec: PositionSpec, ctx: ValuationContext, params: BsmParams) -> float:
    if spec.protocol is not Protocol.V2:
        raise ValueError("pv_v2 needs a V2 position")
    tau, x_t, mu = ctx.tau, ctx.x_t, params.mu
    if tau == 0:
        return float(amm.protection_payoff(spec, ctx.p_t))
    g_half = math.exp(0.5 * (mu - 0.5 * params.sigma ** 2) * tau + params.sigma ** 2 * tau / 8.0)
    return v2_pv_from_mgf(spec.kind, x_t, g_half, params.r, mu, tau)


def v2_pv_from_mgf(kind: Kind, x_t: float, g_half: float, r: float, mu: float,
                   tau: float) -> float:
    """V2 protection PV given E[exp(x_tau / 2)]."""
    df = math.exp(-r * tau)
    if kind is Kind.FUNDED:
        return df * (1.0 - math.exp(0.5 * x_t) * g_half)
    if kind is Kind.BORROWED:
        return 0.5 * df * (math.exp(x_t + mu * tau) - 2.0 * math.exp(0.5 * x_t) * g_half + 1.0)
    raise ValueError("relative IL is not priced")


def v3_legs(spec: PositionSpec, ctx: ValuationContext, params: BsmParams):
    """Discounted leg values (U0, U_half, U1) per unit liquidity."""
    c = decompose(spec)
    p, tau = ctx.p_t, ctx.tau
    rng = spec.range
    u0 = c.u0_slope * p * math.exp(-params.q * tau) + c.u0_intercept * math.exp(-params.r * tau)
    uh = sqrt_claim(p, rng, params, tau, c.sqrt_coefficient)
    u1 = (-c.put_weight * bsm_vanilla(p, rng.pa, -1, params, tau)
          + c.call_weight * bsm_vanilla(p, rng.pb, +1, params, tau)
          + c.digital_put_weight * bsm_digital(p, rng.pa, -1, params, tau)
          + c.digital_call_weight * bsm_digital(p, rng.pb, +1, params, tau))
    return u0, uh, u1


def pv_v3(spec: PositionSpec, ctx: ValuationContext, params: BsmParams):
    """PV of the V3 protection claim per unit initial notional."""
    if spec.protocol is not Protocol.V3:
        raise ValueError("pv_v3 needs a V3 position")
    if ctx.tau == 0:
        return amm.protection_payoff(spec, ctx.p_t)
    u0, uh, u1 = v3_legs(spec, ctx, params)
    return -(u0 + uh + u1) / spec.value_per_liquidity


def delta_v3(spec: PositionSpec, ctx: ValuationContext, params: BsmParams):
    """dPV/dp_t per unit initial notional (token-1 units per unit notional)."""
    if spec.protocol is not Protocol.V3:
        raise ValueError("delta_v3 needs a V3 position")
    if ctx.tau == 0:
        raise ValueError("delta undefined at tau=0; payoff has kinks")
    c = decompose(spec)
    p, tau, rng = ctx.p_t, ctx.tau, spec.range
    d0 = c.u0_slope * math.exp(-params.q * tau)
    dh = sqrt_claim_delta(p, rng, params, tau, c.sqrt_coefficient)
    d1 = (-c.put_weight * bsm_vanilla_delta(p, rng.pa, -1, params, tau)
          + c.call_weight * bsm_vanilla_delta(p, rng.pb, +1, params, tau)
          + c.digital_put_weight * bsm_digital_delta(p, rng.pa, -1, params, tau)
          + c.digital_call_weight * bsm_digital_delta(p, rng.pb, +1, params, tau))
    return -(d0 + dh + d1) / spec.value_per_liquidity


def delta_v2(spec: PositionSpec, ctx: ValuationContext, params: BsmParams) -> float:
    tau, p = ctx.tau, ctx.p_t
    g_half = math.exp(0.5 * (params.mu - 0.5 * params.sigma ** 2) * tau
                      + params.sigma ** 2 * tau / 8.0)
    df = math.exp(-params.r * tau)
    half = 0.5 * math.exp(0.5 * ctx.x_t) * g_half / p
    if spec.kind is Kind.FUNDED:
        return -df * half
    return 0.5 * df * (math.exp(ctx.x_t + params.mu * tau) / p - 2.0 * half)


def pv(spec: PositionSpec, ctx: ValuationContext, params: BsmParams):
    return pv_v2(spec, ctx, params) if spec.protocol is Protocol.V2 else pv_v3(spec, ctx, params)
