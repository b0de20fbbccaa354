"""Monte Carlo referee for GBM and log-normal SV terminal log-returns.

Random numbers come from numpy's Philox counter-based generator. The path count is cut
into fixed-size blocks and block i draws from ``SeedSequence(seed).spawn(n)[i]``, so the
sample stream is the same whether blocks run serially or on a thread pool.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .bsm import BsmParams
from .logsv import LogSvParams


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    n_steps: int = 1
    seed: int = 0
    antithetic: bool = True
    block_size: int = 65536
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 2:
            raise ValueError("n_paths must be at least 2 for a standard error")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even n_paths")
        if self.n_steps < 1 or self.block_size < 2 or self.workers < 1:
            raise ValueError("n_steps, block_size and workers must be positive")

    @property
    def n_draws(self) -> int:
        """Independent normal vectors drawn; half the paths when antithetic."""
        return self.n_paths // 2 if self.antithetic else self.n_paths


@dataclass(frozen=True)
class TerminalSamples:
    """Terminal log-returns; shape (n_draws, 2) with antithetic pairs, else (n_paths,)."""

    x: np.ndarray
    paired: bool
    sigma: Optional[np.ndarray] = None  # terminal volatility, SV sampler only

    @property
    def flat(self) -> np.ndarray:
        return self.x.ravel()

    def __len__(self):
        return self.x.size


def _blocks(config: McConfig) -> List[Tuple[int, np.random.SeedSequence]]:
    n, bs = config.n_draws, config.block_size
    sizes = [min(bs, n - i) for i in range(0, n, bs)]
    seqs = np.random.SeedSequence(config.seed).spawn(len(sizes))
    return list(zip(sizes, seqs))


def _run_blocks(config: McConfig, draw: Callable[[int, np.random.Generator], np.ndarray]):
    def one(block):
        size, seq = block
        return draw(size, np.random.Generator(np.random.Philox(seq)))

    blocks = _blocks(config)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(one, blocks))
    else:
        parts = [one(b) for b in blocks]
    return np.concatenate(parts)


def sample_gbm_terminal(params: BsmParams, tau: float, config: McConfig) -> TerminalSamples:
    """Exact draws of x_tau ~ N((mu - sigma^2/2) tau, sigma^2 tau)."""
    drift = (params.mu - 0.5 * params.sigma ** 2) * tau
    sd = params.sigma * math.sqrt(tau)

    def draw(size, rng):
        z = rng.standard_normal(size)
        if config.antithetic:
            return np.stack([drift + sd * z, drift - sd * z], axis=1)
        return drift + sd * z

    return TerminalSamples(_run_blocks(config, draw), config.antithetic)


def sample_logsv_terminal(params: LogSvParams, mu: float, tau: float, config: McConfig,
                          sigma_current=None) -> TerminalSamples:
    """Log-Euler on x with full-truncation Euler on sigma."""
    dt = tau / config.n_steps
    sq = math.sqrt(dt)
    s0 = params.sigma0 if sigma_current is None else sigma_current
    th, k1, k2 = params.theta, params.kappa1, params.kappa2
    b, e = params.beta, params.epsilon

    def draw(size, rng):
        width = (size, 2) if config.antithetic else (size,)
        x = np.zeros(width)
        sig = np.full(width, float(s0))
        for _ in range(config.n_steps):
            z0 = rng.standard_normal(size)
            z1 = rng.standard_normal(size)
            if config.antithetic:
                z0 = np.stack([z0, -z0], axis=1)
                z1 = np.stack([z1, -z1], axis=1)
            sp = np.maximum(sig, 0.0)
            x += (mu - 0.5 * sp * sp) * dt + sp * sq * z0
            sig = sig + (k1 + k2 * sp) * (th - sp) * dt + sp * sq * (b * z0 + e * z1)
        return np.stack([x, sig], axis=-1)

    out = _run_blocks(config, draw)
    return TerminalSamples(out[..., 0], config.antithetic, out[..., 1])


def mc_price(payoff: Callable[[np.ndarray], np.ndarray], samples, r: float,
             tau: float) -> Tuple[float, float]:
    """Discounted mean of payoff(x_tau) and its standard error.

    With antithetic pairs the SE is computed from the pair averages.
    """
    if isinstance(samples, TerminalSamples):
        x, paired = samples.x, samples.paired
    else:
        x, paired = np.asarray(samples, dtype=float), False
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    vals = np.asarray(payoff(x.ravel()), dtype=float).reshape(x.shape)
    if paired:
        vals = vals.mean(axis=1)
    df = math.exp(-r * tau)
    n = vals.size
    return df * float(vals.mean()), df * float(vals.std(ddof=1)) / math.sqrt(n)
