"""Impermanent-loss analytics, static option replication and model pricing of IL protection."""

from .amm import Kind, PositionSpec, PriceRange, Protocol, il, pnl, protection_payoff
from .bsm import BsmParams, ValuationContext, delta_v3, pv, pv_v2, pv_v3
from .decomposition import ILComponents, decompose, evaluate
from .fourier import BsmMgf, MgfModel, QuadratureConfig, pv_mgf, pv_v2_mgf, pv_v3_mgf
from .logsv import LogSvMgf, LogSvParams, implied_vol_curve
from .montecarlo import McConfig, mc_price, sample_gbm_terminal, sample_logsv_terminal
from .replication import OptionChain, build_portfolio, portfolio_cost, replication_residual

__version__ = "0.1.0"

__all__ = [
    "Kind", "PositionSpec", "PriceRange", "Protocol", "il", "pnl", "protection_payoff",
    "BsmParams", "ValuationContext", "delta_v3", "pv", "pv_v2", "pv_v3",
    "ILComponents", "decompose", "evaluate",
    "BsmMgf", "MgfModel", "QuadratureConfig", "pv_mgf", "pv_v2_mgf", "pv_v3_mgf",
    "LogSvMgf", "LogSvParams", "implied_vol_curve",
    "McConfig", "mc_price", "sample_gbm_terminal", "sample_logsv_terminal",
    "OptionChain", "build_portfolio", "portfolio_cost", "replication_residual",
]
