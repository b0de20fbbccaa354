"""Split V3 impermanent loss into a linear leg, a square-root range leg and an option leg.

Per unit of liquidity the IL numerator is

    u0(p) + c * sqrt(p) 1{pa < p < pb}
          - put(pa) / sqrt(pa) + call(pb) / sqrt(pb)
          + 2 sqrt(pa) 1{p <= pa} + 2 sqrt(pb) 1{p >= pb}

with c = 2; dividing by V0/L gives the dimensionless IL.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .amm import Kind, PositionSpec, Protocol


@dataclass(frozen=True)
class ILComponents:
    kind: Kind
    p0: float
    pa: float
    pb: float
    u0_slope: float
    u0_intercept: float
    value_per_liquidity: float
    sqrt_coefficient: float = 2.0

    @property
    def put_weight(self) -> float:
        return 1.0 / math.sqrt(self.pa)

    @property
    def call_weight(self) -> float:
        return 1.0 / math.sqrt(self.pb)

    @property
    def digital_put_weight(self) -> float:
        return 2.0 * math.sqrt(self.pa)

    @property
    def digital_call_weight(self) -> float:
        return 2.0 * math.sqrt(self.pb)

    def with_sqrt_coefficient(self, c: float) -> "ILComponents":
        return replace(self, sqrt_coefficient=c)


class LegValues(NamedTuple):
    u0: np.ndarray
    u_half: np.ndarray
    u1: np.ndarray
    total: np.ndarray


def decompose(spec: PositionSpec) -> ILComponents:
    if spec.protocol is not Protocol.V3:
        raise ValueError("decomposition applies to V3 positions; V2 IL is a single sqrt claim")
    if spec.kind is Kind.BORROWED_RELATIVE:
        raise ValueError("relative IL is not decomposed")
    pa, pb, p0 = spec.range.pa, spec.range.pb, spec.p0
    sa, sb = math.sqrt(pa), math.sqrt(pb)
    d = spec.value_per_liquidity
    if spec.kind is Kind.FUNDED:
        # u0 = -p/sqrt(pb) - sqrt(pa) - V0/L
        slope, intercept = -1.0 / sb, -sa - d
    else:
        # u0 = -p/sqrt(pb) - sqrt(pa) - (p x0 + y0)/L
        sf0 = math.sqrt(min(max(p0, pa), pb))
        slope = -1.0 / sb - (1.0 / sf0 - 1.0 / sb)
        intercept = -sa - (sf0 - sa)
    return ILComponents(spec.kind, p0, pa, pb, slope, intercept, d)


def evaluate(c: ILComponents, p) -> LegValues:
    """Leg values in IL units (already divided by V0/L)."""
    p = np.asarray(p, dtype=float)
    u0 = c.u0_slope * p + c.u0_intercept
    u_half = c.sqrt_coefficient * np.sqrt(p) * ((p > c.pa) & (p < c.pb))
    u1 = (-c.put_weight * np.maximum(c.pa - p, 0.0)
          + c.call_weight * np.maximum(p - c.pb, 0.0)
          + c.digital_put_weight * (p <= c.pa)
          + c.digital_call_weight * (p >= c.pb))
    s = 1.0 / c.value_per_liquidity
    u0, u_half, u1 = u0 * s, u_half * s, u1 * s
    return LegValues(u0, u_half, u1, u0 + u_half + u1)
