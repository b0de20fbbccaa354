"""Log-normal stochastic volatility model and its first-order exponential-affine MGF.

Dynamics under Q (mu = r - q):
    dS/S     = mu dt + sigma dW0
    d sigma  = (kappa1 + kappa2 sigma)(theta - sigma) dt + beta sigma dW0 + epsilon sigma dW1

The first-order MGF is exp{A0 + A1 (sigma - theta) + A2 (sigma - theta)^2}, where
A = (A0, A1, A2) solves a quadratic ODE system in tau with A(0) = 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .bsm import BsmParams, bsm_vanilla
from .fourier import MgfModel, QuadratureConfig, integrate_legs, transform_capped

L2_VARIANTS = ("squared", "printed")


class OdeIntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class LogSvParams:
    sigma0: float
    theta: float
    kappa1: float
    kappa2: float
    beta: float
    epsilon: float

    def __post_init__(self):
        if not (self.sigma0 > 0 and self.theta > 0):
            raise ValueError("sigma0 and theta must be positive")
        if self.kappa1 < 0 or self.kappa2 < 0 or self.epsilon < 0:
            raise ValueError("kappa1, kappa2, epsilon must be non-negative")
        if self.kappa2 == 0 and not self.kappa1 > 0:
            raise ValueError("kappa1 > 0 is required when kappa2 = 0")

    @property
    def vartheta2(self) -> float:
        return self.beta ** 2 + self.epsilon ** 2

    @classmethod
    def from_dict(cls, d: dict) -> "LogSvParams":
        keys = ("sigma0", "theta", "kappa1", "kappa2", "beta", "epsilon")
        missing = [k for k in keys if k not in d]
        if missing:
            raise ValueError(f"missing log-SV parameters: {missing}")
        return cls(**{k: float(d[k]) for k in keys})

    @classmethod
    def from_json(cls, path) -> "LogSvParams":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


# base parameter set used for the smile and premium studies (epsilon varies)
BASE_PARAMS = dict(sigma0=0.5, theta=0.5, kappa1=2.21, kappa2=2.18, beta=0.0)


def ode_rhs(A, phi, params: LogSvParams, l2_variant: str = "squared", psi: complex = 0.0):
    """d/dtau of (A0, A1, A2); ``A`` has shape (3, ...) broadcasting against ``phi``.

    ``psi`` is the quadratic-variation transform variable; zero when only the price is priced.
    """
    if l2_variant not in L2_VARIANTS:
        raise ValueError(f"l2_variant must be one of {L2_VARIANTS}")
    a0, a1, a2 = A[0], A[1], A[2]
    th, b = params.theta, params.beta
    k1, k2 = params.kappa1, params.kappa2
    v2 = params.vartheta2
    v_l2 = v2 if l2_variant == "squared" else math.sqrt(v2)
    ff = phi * phi + phi
    kk = k1 + k2 * th
    d0 = (0.5 * th * th * v2 * a1 * a1
          - th * th * b * phi * a1 + th * th * v2 * a2
          + 0.5 * th * th * ff)
    d1 = (th * v2 * a1 * a1 + 2.0 * th * th * v2 * a1 * a2
          + (-kk - 2.0 * th * b * phi) * a1 + 2.0 * (th * v2 - th * th * b * phi) * a2
          + th * (ff - 2.0 * psi))
    d2 = (0.5 * v2 * a1 * a1 + 4.0 * th * v2 * a1 * a2 + 2.0 * th * th * v2 * a2 * a2
          + (-b * phi - k2) * a1 + (v_l2 - 2.0 * kk - 4.0 * th * b * phi) * a2
          + 0.5 * ff)
    # a0 does not feed back; keep the shape
    return np.stack([d0 + 0 * a0, d1, d2])


def solve_coefficients(tau: float, phi, params: LogSvParams, l2_variant: str = "squared",
                       rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """A(tau; phi) for an array of phi; returns complex array of shape (3, n)."""
    phi = np.atleast_1d(np.asarray(phi, dtype=complex))
    n = phi.size
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau == 0:
        return np.zeros((3, n), dtype=complex)

    def rhs(_t, y):
        return ode_rhs(y.reshape(3, n), phi, params, l2_variant).ravel()

    sol = solve_ivp(rhs, (0.0, tau), np.zeros(3 * n, dtype=complex), method="RK45",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise OdeIntegrationError(f"ODE integration failed at tau={tau}: {sol.message}")
    out = sol.y[:, -1].reshape(3, n)
    if not np.all(np.isfinite(out)):
        bad = phi[~np.all(np.isfinite(out), axis=0)]
        raise OdeIntegrationError(f"non-finite MGF coefficients for phi={bad[:3]} ...")
    return out


def mgf(tau: float, phi, params: LogSvParams, sigma_current: Optional[float] = None,
        l2_variant: str = "squared", rtol: float = 1e-10, atol: float = 1e-12):
    """First-order MGF of the driftless log-price increment, E[exp(-phi x_tau)]."""
    sigma = params.sigma0 if sigma_current is None else sigma_current
    A = solve_coefficients(tau, phi, params, l2_variant, rtol, atol)
    y = sigma - params.theta
    out = np.exp(A[0] + A[1] * y + A[2] * y * y)
    return out if np.ndim(phi) else out[0]


@dataclass(frozen=True)
class LogSvMgf(MgfModel):
    params: LogSvParams
    r: float = 0.0
    q: float = 0.0
    sigma_current: Optional[float] = None
    l2_variant: str = "squared"
    rtol: float = 1e-10
    atol: float = 1e-12

    def mgf(self, tau, phi):
        phi = np.asarray(phi, dtype=complex)
        core = mgf(tau, phi.ravel(), self.params, self.sigma_current, self.l2_variant,
                   self.rtol, self.atol).reshape(phi.shape)
        return np.exp(-phi * self.mu * tau) * core

    def variance_scale(self, tau):
        s = min(self.params.sigma0 if self.sigma_current is None else self.sigma_current,
                self.params.theta)
        return s * s * tau


def implied_vol(price: float, p_t: float, k: float, omega: int, tau: float,
                r: float = 0.0, q: float = 0.0, tol: float = 1e-10) -> float:
    df, dq = math.exp(-r * tau), math.exp(-q * tau)
    lo_bound = max(omega * (dq * p_t - df * k), 0.0)
    hi_bound = dq * p_t if omega == 1 else df * k
    if not lo_bound < price < hi_bound:
        raise ValueError(f"price {price} outside no-arbitrage bounds ({lo_bound}, {hi_bound}) "
                         f"for strike {k}")

    def f(s):
        return bsm_vanilla(p_t, k, omega, BsmParams(s, r, q), tau) - price

    return brentq(f, 1e-6, 20.0, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)


def implied_vol_curve(params: LogSvParams, tau: float, strikes: Sequence[float],
                      p_t: float = 1.0, r: float = 0.0, q: float = 0.0,
                      cfg: QuadratureConfig = QuadratureConfig(),
                      l2_variant: str = "squared") -> np.ndarray:
    """BSM implied vols of Fourier-priced out-of-the-money options."""
    strikes = np.asarray(strikes, dtype=float)
    if np.any(strikes <= 0):
        raise ValueError("strikes must be positive")
    model = LogSvMgf(params, r, q, l2_variant=l2_variant)
    legs = {f"k{i}": (lambda phi, xs=math.log(p_t / k): transform_capped(phi, xs, 1.0))
            for i, k in enumerate(strikes)}
    res = integrate_legs(model, tau, legs, cfg)
    df, dq = math.exp(-r * tau), math.exp(-q * tau)
    fwd = p_t * math.exp((r - q) * tau)
    out, errors = [], []
    for i, k in enumerate(strikes):
        cap = k * df * res.values[f"k{i}"]
        omega = 1 if k >= fwd else -1
        price = dq * p_t - cap if omega == 1 else df * k - cap
        try:
            out.append(implied_vol(price, p_t, k, omega, tau, r, q))
        except ValueError as e:
            errors.append(str(e))
            out.append(float("nan"))
    if errors:
        raise ValueError("implied vol failed: " + "; ".join(errors))
    return np.array(out)
