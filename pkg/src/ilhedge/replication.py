"""Static replication of IL protection with out-of-the-money vanilla options.

The hedger buys puts on strikes at or below the split node k* (p0 snapped to the strike
grid) and calls at or above it. Between grid strikes the option payoff is the piecewise
linear interpolant of the protection payoff, so the residual vanishes at every strike.

Weights are stored as option counts for the position's notional: a put leg (k, w) pays
w * (k - p)^+ token-2 units.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import amm
from .amm import Kind, PositionSpec, Protocol

ILFunction = Callable[[np.ndarray], np.ndarray]


def _check_grid(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if k.ndim != 1 or k.size < 2:
        raise ValueError("need at least 2 grid points")
    if np.any(k <= 0):
        raise ValueError("strikes must be positive")
    if np.any(np.diff(k) <= 0):
        raise ValueError("strikes must be strictly ascending without duplicates")
    return k


def delta_il(il_fn: ILFunction, grid) -> np.ndarray:
    """Backward-difference slopes (IL(k_n) - IL(k_{n-1})) / (k_n - k_{n-1}) for n = 2..N.

    Element i is the slope on the segment ending at grid[i + 1]; equivalently the
    forward-difference slope starting at grid[i].
    """
    k = _check_grid(grid)
    v = np.asarray(il_fn(k), dtype=float)
    return np.diff(v) / np.diff(k)


def put_weights(il_fn: ILFunction, put_strikes) -> np.ndarray:
    """Put weights w_1..w_N with w_N = slope into k_N and w_1 = 0.

    sum_n w_n (k_n - p)^+ equals IL(k_N) - IL(p) at every grid strike.
    """
    k = _check_grid(put_strikes)
    if k.size < 3:
        raise ValueError("put recursion needs at least 3 strikes")
    s = delta_il(il_fn, k)  # s[j] is the slope on [k_j, k_{j+1}]
    w = np.zeros(k.size)
    w[-1] = s[-1]
    w[1:-1] = -(s[1:] - s[:-1])
    return w


def call_weights(il_fn: ILFunction, call_strikes) -> np.ndarray:
    """Call weights w_1..w_M with w_1 = -(slope out of k_1) and w_M = 0.

    sum_m w_m (p - k_m)^+ equals IL(k_1) - IL(p) at every grid strike.
    """
    k = _check_grid(call_strikes)
    if k.size < 3:
        raise ValueError("call recursion needs at least 3 strikes")
    s = delta_il(il_fn, k)
    w = np.zeros(k.size)
    w[0] = -s[0]
    w[1:-1] = -(s[1:] - s[:-1])
    return w


@dataclass(frozen=True)
class StrikeGrid:
    put_strikes: Tuple[float, ...]
    call_strikes: Tuple[float, ...]
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("strike width must be positive")
        _check_grid(self.put_strikes)
        _check_grid(self.call_strikes)
        if self.put_strikes[-1] > self.call_strikes[0]:
            raise ValueError("put strikes must lie at or below call strikes")

    @property
    def split(self) -> float:
        return self.put_strikes[-1]

    @classmethod
    def around(cls, p0: float, width: float, span: Optional[Tuple[float, float]] = None
               ) -> "StrikeGrid":
        """Exchange-style grid of multiples of ``width``; the split node is p0 snapped."""
        if not width > 0:
            raise ValueError("strike width must be positive")
        lo, hi = span if span is not None else (0.5 * p0, 2.0 * p0)
        j_split = max(round(p0 / width), 1)
        j_lo = max(math.ceil(lo / width - 1e-9), 1)
        j_hi = math.floor(hi / width + 1e-9)
        if not j_lo + 2 <= j_split <= j_hi - 2:
            raise ValueError(f"span [{lo}, {hi}] with width {width} leaves fewer than 3 "
                             "strikes on one side of p0")
        puts = tuple(width * j for j in range(j_lo, j_split + 1))
        calls = tuple(width * j for j in range(j_split, j_hi + 1))
        return cls(puts, calls, width)

    def snap_distance(self, p: float) -> float:
        return abs(p - self.width * round(p / self.width))


@dataclass
class HedgePortfolio:
    put_legs: List[Tuple[float, float]]
    call_legs: List[Tuple[float, float]]
    cash: float = 0.0
    metadata: Dict = field(default_factory=dict)

    @property
    def strikes(self) -> List[Tuple[str, float]]:
        return [("put", k) for k, _ in self.put_legs] + [("call", k) for k, _ in self.call_legs]

    def negated(self) -> "HedgePortfolio":
        meta = dict(self.metadata, sign=-self.metadata.get("sign", 1))
        return HedgePortfolio([(k, -w) for k, w in self.put_legs],
                              [(k, -w) for k, w in self.call_legs], -self.cash, meta)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["side", "strike", "weight"])
        for side, legs in (("put", self.put_legs), ("call", self.call_legs)):
            for k, w in legs:
                wr.writerow([side, repr(float(k)), repr(float(w))])
        return buf.getvalue()


def portfolio_payoff(portfolio: HedgePortfolio, p, include_cash: bool = True):
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    for k, w in portfolio.put_legs:
        out = out + w * np.maximum(k - p, 0.0)
    for k, w in portfolio.call_legs:
        out = out + w * np.maximum(p - k, 0.0)
    if include_cash:
        out = out + portfolio.cash
    return float(out) if out.ndim == 0 else out


def replicate(il_fn: ILFunction, grid: StrikeGrid, scale: float = 1.0) -> HedgePortfolio:
    """Portfolio whose payoff plus cash matches -scale * il_fn at every grid strike."""
    wp = put_weights(il_fn, grid.put_strikes) * scale
    wc = call_weights(il_fn, grid.call_strikes) * scale
    level = float(il_fn(np.array([grid.split]))[0])
    return HedgePortfolio(list(zip(grid.put_strikes, wp.tolist())),
                          list(zip(grid.call_strikes, wc.tolist())),
                          cash=-scale * level,
                          metadata={"split": grid.split, "width": grid.width, "sign": 1})


def build_portfolio(spec: PositionSpec, width: float,
                    span: Optional[Tuple[float, float]] = None) -> HedgePortfolio:
    """Option portfolio the hedger buys to offset the position's IL P&L."""
    if spec.kind is Kind.BORROWED_RELATIVE:
        raise ValueError("replication targets funded or nominal-borrowed IL")
    grid = StrikeGrid.around(spec.p0, width, span)
    port = replicate(lambda p: amm.il(spec, p), grid, scale=spec.notional)
    snaps = {"p0": grid.snap_distance(spec.p0)}
    if spec.protocol is Protocol.V3:
        snaps.update(pa=grid.snap_distance(spec.range.pa), pb=grid.snap_distance(spec.range.pb))
    port.metadata.update(
        protocol=spec.protocol.value, kind=spec.kind.value, p0=spec.p0,
        notional=spec.notional, pa=spec.range.pa if spec.range else None,
        pb=spec.range.pb if spec.range else None, snap_distance=snaps,
        span=[grid.put_strikes[0], grid.call_strikes[-1]])
    return port


def replication_residual(spec: PositionSpec, portfolio: HedgePortfolio, prices):
    """P&L of the position plus the hedge payoff (cash included), per unit notional.

    Returns (max |residual|, residuals) with the max as a fraction of notional.
    """
    if "p0" in portfolio.metadata and not math.isclose(portfolio.metadata["p0"], spec.p0):
        raise ValueError("portfolio was built for a different entry price")
    p = np.asarray(prices, dtype=float)
    res = (np.asarray(amm.pnl(spec, p)) + portfolio_payoff(portfolio, p)) / spec.notional
    return float(np.max(np.abs(res))), res


# -- continuous strip ----------------------------------------------------------------

def four_sqrt_value(rng: amm.PriceRange, p):
    """Funded V3 value per unit liquidity as four square-root payoffs."""
    p = np.asarray(p, dtype=float)
    sa, sb, sp = math.sqrt(rng.pa), math.sqrt(rng.pb), np.sqrt(p)
    out = (p * np.maximum(1 / sp - 1 / sb, 0) - p * np.maximum(1 / sp - 1 / sa, 0)
           + np.maximum(sp - sa, 0) - np.maximum(sp - sb, 0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class StripPortfolio:
    """Straddle strip with density k^{-3/2}/4 on [pa, pb] plus two forward legs.

    Value per unit liquidity:
        -sum w_j |p - k_j| + (p - pa) / (2 sqrt(pa)) + (pb - p) / (2 sqrt(pb))
    """

    strikes: np.ndarray
    weights: np.ndarray
    pa: float
    pb: float

    def value(self, p):
        p = np.asarray(p, dtype=float)
        strip = np.abs(p[..., None] - self.strikes) @ self.weights
        out = (-strip + (p - self.pa) / (2 * math.sqrt(self.pa))
               + (self.pb - p) / (2 * math.sqrt(self.pb)))
        return float(out) if out.ndim == 0 else out


def carr_madan_portfolio(spec: PositionSpec, step: float) -> StripPortfolio:
    """Midpoint discretisation of the strip density for a funded V3 position."""
    if spec.protocol is not Protocol.V3:
        raise ValueError("the strip representation applies to V3 positions")
    if not step > 0:
        raise ValueError("step must be positive")
    pa, pb = spec.range.pa, spec.range.pb
    n = max(int(math.ceil((pb - pa) / step)), 1)
    edges = np.linspace(pa, pb, n + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    w = 0.25 * mids ** -1.5 * np.diff(edges)
    return StripPortfolio(mids, w, pa, pb)


# -- option chains and costing --------------------------------------------------------

CHAIN_HEADER = ["strike", "side", "bid", "ask", "mid"]


@dataclass(frozen=True)
class Quote:
    strike: float
    side: str
    bid: float
    ask: float
    mid: float


class MissingStrikesError(ValueError):
    def __init__(self, missing: Sequence[Tuple[str, float]]):
        self.missing = list(missing)
        listed = ", ".join(f"{s} {k:g}" for s, k in self.missing)
        super().__init__(f"option chain lacks strikes: {listed}")


@dataclass
class OptionChain:
    maturity: float
    records: List[Quote]

    def __post_init__(self):
        for q in self.records:
            if q.side not in ("call", "put"):
                raise ValueError(f"side must be call or put, got {q.side!r}")
            if not q.strike > 0:
                raise ValueError(f"non-positive strike {q.strike}")
            if not q.bid <= q.mid <= q.ask:
                raise ValueError(f"need bid <= mid <= ask at {q.side} {q.strike}")
        self._index = {(q.side, _key(q.strike)): q for q in self.records}

    def quote(self, side: str, strike: float) -> Optional[Quote]:
        return self._index.get((side, _key(strike)))

    @classmethod
    def from_csv(cls, path, maturity: float) -> "OptionChain":
        with open(path, newline="") as fh:
            rd = csv.DictReader(fh)
            if rd.fieldnames is None or [f.strip() for f in rd.fieldnames] != CHAIN_HEADER:
                raise ValueError(f"chain header must be {','.join(CHAIN_HEADER)}")
            recs = [Quote(float(r["strike"]), r["side"].strip().lower(), float(r["bid"]),
                          float(r["ask"]), float(r["mid"])) for r in rd]
        return cls(maturity, recs)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(CHAIN_HEADER)
            for q in self.records:
                wr.writerow([repr(q.strike), q.side, repr(q.bid), repr(q.ask), repr(q.mid)])


def _key(k: float) -> float:
    return round(float(k), 8)


def portfolio_cost(portfolio: HedgePortfolio, chain: OptionChain, side: str = "mid") -> float:
    """Option-leg cost sum(weight * quote); cash is not included."""
    if side not in ("mid", "ask"):
        raise ValueError("side must be 'mid' or 'ask'")
    missing, total = [], 0.0
    for opt, legs in (("put", portfolio.put_legs), ("call", portfolio.call_legs)):
        for k, w in legs:
            q = chain.quote(opt, k)
            if q is None:
                missing.append((opt, k))
            else:
                total += w * getattr(q, side)
    if missing:
        raise MissingStrikesError(missing)
    return total


def write_portfolio(portfolio: HedgePortfolio, csv_path, json_path=None,
                    extra: Optional[Dict] = None) -> None:
    Path(csv_path).write_text(portfolio.to_csv())
    if json_path is not None:
        meta = dict(portfolio.metadata, cash=portfolio.cash, **(extra or {}))
        Path(json_path).write_text(json.dumps(meta, indent=2, default=float))
