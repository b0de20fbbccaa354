"""Fourier pricing of IL protection claims for any model with a moment generating function.

Conventions: E(tau; phi) = E[exp(-phi * x_tau)] is the MGF of the log-price increment
over the remaining life, drift included, so E(tau; -1) = exp((r - q) tau).  For a
payoff u of the increment,

    e^{-r tau} E[u(x_tau)] = e^{-r tau} / pi * Re int_0^inf u_hat(phi) E(tau; phi) dy,
    u_hat(phi) = int e^{phi z} u(z) dz,   phi = i y - 1/2.

All five legs of the V3 decomposition are evaluated on one shared y-grid.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from . import amm
from .amm import PositionSpec, PriceRange, Protocol
from .bsm import BsmParams, ValuationContext, v2_pv_from_mgf
from .decomposition import decompose

CONTOUR = -0.5


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float = float("nan"), leg: str = ""):
        super().__init__(message)
        self.achieved = achieved
        self.leg = leg


class MgfModel(abc.ABC):
    """Provider of the increment MGF E(tau; phi) for complex phi."""

    r: float = 0.0
    q: float = 0.0

    @property
    def mu(self) -> float:
        return self.r - self.q

    @abc.abstractmethod
    def mgf(self, tau: float, phi: np.ndarray) -> np.ndarray:
        ...

    @abc.abstractmethod
    def variance_scale(self, tau: float) -> float:
        """Rough total variance of x_tau; sets the initial truncation of the y-grid."""


@dataclass(frozen=True)
class BsmMgf(MgfModel):
    params: BsmParams

    @property
    def r(self) -> float:
        return self.params.r

    @property
    def q(self) -> float:
        return self.params.q

    def mgf(self, tau, phi):
        phi = np.asarray(phi, dtype=complex)
        s2 = self.params.sigma ** 2
        return np.exp(-(self.params.mu - 0.5 * s2) * phi * tau + 0.5 * phi * phi * s2 * tau)

    def variance_scale(self, tau):
        return self.params.sigma ** 2 * tau


@dataclass(frozen=True)
class QuadratureConfig:
    """Composite Gauss-Legendre on [0, y_max] refined by panel doubling.

    ``y_max=None`` picks 10/sqrt(variance) and doubles it until the integrand tail is
    below ``tail_ratio`` of its peak.
    """

    offset: float = CONTOUR
    y_max: Optional[float] = None
    panels: int = 32
    nodes_per_panel: int = 16
    atol: float = 1e-13
    rtol: float = 1e-12
    tail_ratio: float = 1e-12
    max_panels: int = 8192
    max_extensions: int = 12


@dataclass
class QuadratureResult:
    values: Dict[str, float]
    y_max: float
    panels: int
    error: float
    tail_ratio: float
    diagnostics: dict = field(default_factory=dict)


# -- payoff transforms ------------------------------------------------------------

def _check_strip(phi, lo, hi):
    re = np.real(phi)
    if np.any(re <= lo) or np.any(re >= hi):
        raise ValueError(f"Re(phi) must lie in ({lo}, {hi}) for this transform")


def transform_capped(phi, x_star, k=1.0):
    """Transform of the capped payoff min(p_T, k) with x_star = ln(p_t/k).

    Returns -k e^{-phi x_star} / (phi (phi + 1)), finite for -1 < Re(phi) < 0.
    """
    phi = np.asarray(phi, dtype=complex)
    _check_strip(phi, -1.0, 0.0)
    return -k * np.exp(-phi * x_star) / (phi * (phi + 1.0))


def transform_digital_call(phi, x_star):
    """Transform of 1{p_T >= k}, x_star = ln(p_t/k)."""
    phi = np.asarray(phi, dtype=complex)
    _check_strip(phi, -np.inf, 0.0)
    return -np.exp(-phi * x_star) / phi


def transform_sqrt(phi, x_a, x_b):
    """Transform of e^{z/2} 1{x_a < z < x_b}; finite for any offset."""
    phi = np.asarray(phi, dtype=complex)
    w = phi + 0.5
    h = 0.5 * (x_b - x_a)
    m = 0.5 * (x_b + x_a)
    # (e^{w b} - e^{w a}) / w = e^{w m} 2 sinh(w h) / w, finite at w = 0
    small = np.abs(w * h) < 1e-8
    ws = np.where(small, 1.0, w)
    core = np.where(small, 2.0 * h * (1.0 + (w * h) ** 2 / 6.0), 2.0 * np.sinh(ws * h) / ws)
    return np.exp(w * m) * core


# -- quadrature -------------------------------------------------------------------

LegFn = Callable[[np.ndarray], np.ndarray]


def _gl_grid(y_max, panels, n):
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(0.0, y_max, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    y = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wy = (half[:, None] * w[None, :]).ravel()
    return y, wy


def integrate_legs(model: MgfModel, tau: float, legs: Dict[str, LegFn],
                   cfg: QuadratureConfig = QuadratureConfig()) -> QuadratureResult:
    """(1/pi) Re int_0^Ymax u_hat_leg(phi) E(tau; phi) dy for each leg, on a shared grid."""
    names = list(legs)
    off = cfg.offset

    def integrand(y):
        phi = 1j * y + off
        e = model.mgf(tau, phi)
        return np.stack([np.real(legs[k](phi) * e) for k in names])

    v = max(model.variance_scale(tau), 1e-300)
    y_max = cfg.y_max if cfg.y_max is not None else 10.0 / math.sqrt(v)
    # peak from a coarse scan of the initial window
    scan = np.linspace(0.0, y_max, 257)
    peak = np.max(np.abs(integrand(scan)), axis=1)
    peak = np.maximum(peak, 1e-300)
    tail = np.max(np.abs(integrand(np.array([y_max]))[:, 0]) / peak)
    ext = 0
    while tail > cfg.tail_ratio and cfg.y_max is None:
        ext += 1
        if ext > cfg.max_extensions:
            raise QuadratureError(
                f"integrand tail {tail:.2e} of peak at y_max={y_max:.3g}", achieved=tail)
        y_max *= 2.0
        tail = np.max(np.abs(integrand(np.array([y_max])))[:, 0] / peak)

    panels = cfg.panels
    y, wy = _gl_grid(y_max, panels, cfg.nodes_per_panel)
    prev = integrand(y) @ wy / math.pi
    err = np.inf
    while True:
        panels *= 2
        y, wy = _gl_grid(y_max, panels, cfg.nodes_per_panel)
        cur = integrand(y) @ wy / math.pi
        diff = np.abs(cur - prev)
        tol = cfg.atol + cfg.rtol * np.abs(cur)
        err = float(np.max(diff))
        if np.all(diff <= tol):
            break
        if panels >= cfg.max_panels:
            worst = names[int(np.argmax(diff - tol))]
            raise QuadratureError(
                f"quadrature did not converge for leg '{worst}': change {err:.2e} at "
                f"{panels} panels", achieved=err, leg=worst)
        prev = cur
    return QuadratureResult(dict(zip(names, map(float, cur))), y_max, panels, err, float(tail))


# -- single claims ----------------------------------------------------------------

def _cap_leg(p_t, k):
    xs = math.log(p_t / k)
    return lambda phi: transform_capped(phi, xs, 1.0)


def _dig_leg(p_t, k):
    xs = math.log(p_t / k)
    return lambda phi: transform_digital_call(phi, xs)


def _sqrt_leg(p_t, rng):
    xa, xb = math.log(rng.pa / p_t), math.log(rng.pb / p_t)
    return lambda phi: transform_sqrt(phi, xa, xb)


def capped_value(model: MgfModel, ctx: ValuationContext, k: float,
                 cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """e^{-r tau} E[min(p_T, k)]."""
    res = integrate_legs(model, ctx.tau, {"cap": _cap_leg(ctx.p_t, k)}, cfg)
    return k * math.exp(-model.r * ctx.tau) * res.values["cap"]


def price_vanilla(model: MgfModel, ctx: ValuationContext, k: float, omega: int,
                  cfg: QuadratureConfig = QuadratureConfig()) -> float:
    u = capped_value(model, ctx, k, cfg)
    if omega == 1:
        return math.exp(-model.q * ctx.tau) * ctx.p_t - u
    return math.exp(-model.r * ctx.tau) * k - u


def price_digital(model: MgfModel, ctx: ValuationContext, k: float, omega: int,
                  cfg: QuadratureConfig = QuadratureConfig()) -> float:
    res = integrate_legs(model, ctx.tau, {"dig": _dig_leg(ctx.p_t, k)}, cfg)
    df = math.exp(-model.r * ctx.tau)
    call = df * res.values["dig"]
    return call if omega == 1 else df - call


def price_sqrt_claim(model: MgfModel, ctx: ValuationContext, rng: PriceRange,
                     coefficient: float = 2.0,
                     cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Value of coefficient * sqrt(p_T) 1{pa < p_T < pb}."""
    res = integrate_legs(model, ctx.tau, {"sqrt": _sqrt_leg(ctx.p_t, rng)}, cfg)
    return coefficient * math.exp(-model.r * ctx.tau) * math.sqrt(ctx.p_t) * res.values["sqrt"]


# -- IL protection ----------------------------------------------------------------

def pv_v2_mgf(model: MgfModel, spec: PositionSpec, ctx: ValuationContext) -> float:
    if spec.protocol is not Protocol.V2:
        raise ValueError("pv_v2_mgf needs a V2 position")
    g_half = float(np.real(model.mgf(ctx.tau, np.array([-0.5 + 0j]))[0]))
    return v2_pv_from_mgf(spec.kind, ctx.x_t, g_half, model.r, model.mu, ctx.tau)


def v3_legs_mgf(model: MgfModel, spec: PositionSpec, ctx: ValuationContext,
                cfg: QuadratureConfig = QuadratureConfig()):
    """Discounted (U0, U_half, U1) per unit liquidity plus quadrature diagnostics."""
    c = decompose(spec)
    rng, p, tau = spec.range, ctx.p_t, ctx.tau
    legs = {
        "cap_pa": _cap_leg(p, rng.pa),
        "cap_pb": _cap_leg(p, rng.pb),
        "digital_pa": _dig_leg(p, rng.pa),
        "digital_pb": _dig_leg(p, rng.pb),
        "sqrt": _sqrt_leg(p, rng),
    }
    res = integrate_legs(model, tau, legs, cfg)
    v = res.values
    df, dq = math.exp(-model.r * tau), math.exp(-model.q * tau)
    put_a = df * rng.pa - rng.pa * df * v["cap_pa"]
    call_b = dq * p - rng.pb * df * v["cap_pb"]
    dput_a = df - df * v["digital_pa"]
    dcall_b = df * v["digital_pb"]
    u0 = c.u0_slope * p * dq + c.u0_intercept * df
    uh = c.sqrt_coefficient * df * math.sqrt(p) * v["sqrt"]
    u1 = (-c.put_weight * put_a + c.call_weight * call_b
          + c.digital_put_weight * dput_a + c.digital_call_weight * dcall_b)
    return (u0, uh, u1), res


def pv_v3_mgf(model: MgfModel, spec: PositionSpec, ctx: ValuationContext,
              cfg: QuadratureConfig = QuadratureConfig(), return_diagnostics: bool = False):
    if spec.protocol is not Protocol.V3:
        raise ValueError("pv_v3_mgf needs a V3 position")
    if ctx.tau == 0:
        val = float(amm.protection_payoff(spec, ctx.p_t))
        return (val, None) if return_diagnostics else val
    (u0, uh, u1), res = v3_legs_mgf(model, spec, ctx, cfg)
    val = -(u0 + uh + u1) / spec.value_per_liquidity
    return (val, res) if return_diagnostics else val


def pv_mgf(model: MgfModel, spec: PositionSpec, ctx: ValuationContext,
           cfg: QuadratureConfig = QuadratureConfig()) -> float:
    if spec.protocol is Protocol.V2:
        return pv_v2_mgf(model, spec, ctx)
    return pv_v3_mgf(model, spec, ctx, cfg)


def density(model: MgfModel, tau: float, x: Sequence[float],
            cfg: QuadratureConfig = QuadratureConfig()) -> np.ndarray:
    """Density of x_tau by Fourier inversion along the pricing contour."""
    x = np.asarray(x, dtype=float)
    legs = {f"x{i}": (lambda phi, xi=xi: np.exp(phi * xi) + 0j) for i, xi in enumerate(x)}
    res = integrate_legs(model, tau, legs, cfg)
    return np.array([res.values[f"x{i}"] for i in range(len(x))])
