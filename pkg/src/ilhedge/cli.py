"""Command-line entry point: ``ilhedge {position,il,replicate,price,delta}``.

Parameters resolve as defaults < ``--config`` JSON < explicit flags. Every run writes a
JSON document holding the resolved config and a schema tag; tables go to CSV when
``--format csv`` (the default) or inline in the JSON otherwise.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import amm, bsm, fourier, logsv, montecarlo, replication
from .amm import Kind, PositionSpec, PriceRange

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3


class UsageError(Exception):
    pass


COMMON_DEFAULTS = dict(
    protocol="v3", notional=1e6, p0=2000.0, pa=1500.0, pb=2500.0, range_multiple=None,
    kind="borrowed", out=".", format="csv", seed=0,
)
COMMAND_DEFAULTS = {
    "position": dict(p_min=1000.0, p_max=3000.0, points=201),
    "il": dict(p_min=1000.0, p_max=3000.0, points=201, range_multiples=None),
    "replicate": dict(strike_width=50.0, span_lo=None, span_hi=None, chain=None,
                      maturity=14 / 365, sign="protection", p_min=1000.0, p_max=3000.0,
                      points=2001, r=0.0),
    "price": dict(model="bsm", engine="closed", tau=14 / 365, sigma=0.5, r=0.0, q=0.0,
                  sigma0=0.5, theta=0.5, kappa1=2.21, kappa2=2.18, beta=0.0, epsilon=1.0,
                  logsv_params=None, range_multiples=None, paths=1_000_000, steps=512,
                  workers=1),
    "delta": dict(tau=14 / 365, sigma=0.5, r=0.0, q=0.0, p_min=1000.0, p_max=3000.0,
                  points=201, fd_step=1e-4),
}


def _floats(text: str) -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text}") from e


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--protocol", choices=["v2", "v3"], default=S)
    p.add_argument("--notional", type=float, default=S, help="initial value in token-2 units")
    p.add_argument("--p0", type=float, default=S, help="entry price")
    p.add_argument("--pa", type=float, default=S)
    p.add_argument("--pb", type=float, default=S)
    p.add_argument("--range-multiple", type=float, default=S,
                   help="symmetric range [p0 e^-m, p0 e^m]; overrides --pa/--pb")
    p.add_argument("--kind", choices=["funded", "borrowed"], default=S)


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--p-min", type=float, default=S)
    p.add_argument("--p-max", type=float, default=S)
    p.add_argument("--points", type=int, default=S)


def _add_bsm_flags(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--tau", type=float, default=S, help="time to maturity in years")
    p.add_argument("--sigma", type=float, default=S)
    p.add_argument("--r", type=float, default=S)
    p.add_argument("--q", type=float, default=S)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON parameter file")
    common.add_argument("--out", default=S, help="output directory")
    common.add_argument("--format", choices=["csv", "json"], default=S)
    common.add_argument("--seed", type=int, default=S)

    ap = argparse.ArgumentParser(prog="ilhedge", description="IL analytics and hedging")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("position", parents=[common], help="reserves and value over a grid")
    _add_spec_flags(p)
    _add_grid_flags(p)

    p = sub.add_parser("il", parents=[common], help="P&L and IL over a grid")
    _add_spec_flags(p)
    _add_grid_flags(p)
    p.add_argument("--range-multiples", type=_floats, default=S,
                   help="comma list; emits one series per multiple")

    p = sub.add_parser("replicate", parents=[common], help="static option hedge")
    _add_spec_flags(p)
    _add_grid_flags(p)
    p.add_argument("--strike-width", type=float, default=S)
    p.add_argument("--span-lo", type=float, default=S)
    p.add_argument("--span-hi", type=float, default=S)
    p.add_argument("--chain", type=Path, default=S, help="option chain CSV")
    p.add_argument("--maturity", type=float, default=S, help="chain maturity in years")
    p.add_argument("--sign", choices=["protection", "il"], default=S,
                   help="protection: portfolio bought to hedge; il: its negation")
    p.add_argument("--r", type=float, default=S, help="rate used to discount the cash leg")

    p = sub.add_parser("price", parents=[common], help="PV and APR of IL protection")
    _add_spec_flags(p)
    _add_bsm_flags(p)
    p.add_argument("--model", choices=["bsm", "logsv"], default=S)
    p.add_argument("--engine", choices=["closed", "fourier", "mc"], default=S)
    for name in ("sigma0", "theta", "kappa1", "kappa2", "beta", "epsilon"):
        p.add_argument(f"--{name}", type=float, default=S)
    p.add_argument("--logsv-params", type=Path, default=S, help="JSON log-SV parameters")
    p.add_argument("--range-multiples", type=_floats, default=S)
    p.add_argument("--paths", type=int, default=S)
    p.add_argument("--steps", type=int, default=S)
    p.add_argument("--workers", type=int, default=S)

    p = sub.add_parser("delta", parents=[common], help="BSM delta over a price grid")
    _add_spec_flags(p)
    _add_bsm_flags(p)
    _add_grid_flags(p)
    p.add_argument("--fd-step", type=float, default=S, help="relative central-difference step")
    return ap


def resolve_config(args: argparse.Namespace) -> Dict:
    cfg = dict(COMMON_DEFAULTS, **COMMAND_DEFAULTS[args.command])
    if args.config is not None:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from e
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        cfg.update(file_cfg)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    cfg.update(flags)
    cfg["command"] = args.command
    return cfg


def _spec(cfg: Dict, kind: Optional[str] = None) -> PositionSpec:
    kind = Kind(kind or cfg["kind"])
    if cfg["protocol"] == "v2":
        return PositionSpec.v2(cfg["notional"], cfg["p0"], kind)
    if cfg.get("range_multiple") is not None:
        rng = PriceRange.from_multiple(cfg["p0"], cfg["range_multiple"])
        return PositionSpec.v3(cfg["notional"], cfg["p0"], rng.pa, rng.pb, kind)
    return PositionSpec.v3(cfg["notional"], cfg["p0"], cfg["pa"], cfg["pb"], kind)


def _grid(cfg: Dict) -> np.ndarray:
    if cfg["points"] < 1:
        raise UsageError("--points must be at least 1")
    if cfg["points"] == 1:
        return np.array([cfg["p_min"]])
    if not 0 < cfg["p_min"] < cfg["p_max"]:
        raise UsageError("need 0 < p_min < p_max")
    return np.linspace(cfg["p_min"], cfg["p_max"], cfg["points"])


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table_csv(columns: List[str], rows: List[List]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _emit(cfg: Dict, result: Dict, columns: Optional[List[str]] = None,
          rows: Optional[List[List]] = None, extra_files: Optional[Dict[str, str]] = None
          ) -> List[Path]:
    out = Path(cfg["out"])
    name = cfg["command"]
    doc = {"schema": f"ilhedge.{name}/v{SCHEMA_VERSION}", "config": cfg, **result}
    written = []
    if columns is not None:
        if cfg["format"] == "csv":
            path = out / f"{name}.csv"
            _atomic_write(path, _table_csv(columns, rows))
            doc["table"] = path.name
            written.append(path)
        else:
            doc["columns"] = columns
            doc["rows"] = rows
    for fname, text in (extra_files or {}).items():
        _atomic_write(out / fname, text)
        written.append(out / fname)
    path = out / f"{name}.json"
    _atomic_write(path, json.dumps(doc, indent=2, default=_json_default))
    written.append(path)
    return written


# -- commands ---------------------------------------------------------------------------

def cmd_position(cfg: Dict):
    spec = _spec(cfg)
    p = _grid(cfg)
    r = spec.reserves(p)
    x, y = np.broadcast_to(r.x, p.shape), np.broadcast_to(r.y, p.shape)
    v = np.asarray(amm.position_value(spec, p)).reshape(p.shape)
    rows = [[float(a), float(b), float(c), float(d)] for a, b, c, d in zip(p, x, y, v)]
    return dict(liquidity=spec.liquidity), ["p", "x", "y", "value"], rows


def cmd_il(cfg: Dict):
    p = _grid(cfg)
    ms = cfg.get("range_multiples")
    series = [(None, _spec(cfg))] if not ms else [
        (m, _spec(dict(cfg, protocol="v3", range_multiple=m))) for m in ms]
    rows = []
    for m, spec in series:
        pnl = np.atleast_1d(amm.pnl(spec, p))
        il = np.atleast_1d(amm.il(spec, p))
        for a, b, c in zip(p, pnl, il):
            rows.append(([m] if ms else []) + [float(a), float(b), float(c)])
    cols = (["m"] if ms else []) + ["p", "pnl", "il"]
    return {}, cols, rows


def cmd_replicate(cfg: Dict):
    spec = _spec(cfg)
    span = None
    if cfg.get("span_lo") is not None or cfg.get("span_hi") is not None:
        span = (cfg.get("span_lo") or spec.p0 / 2, cfg.get("span_hi") or 2 * spec.p0)
    chain = None
    if cfg.get("chain"):
        try:
            chain = replication.OptionChain.from_csv(cfg["chain"], cfg["maturity"])
        except OSError as e:
            raise UsageError(f"cannot read chain: {e}") from e
        ks = sorted({q.strike for q in chain.records})
        lo, hi = span or (spec.p0 / 2, 2 * spec.p0)
        span = (max(lo, ks[0]), min(hi, ks[-1]))
    port = replication.build_portfolio(spec, cfg["strike_width"], span)
    mx, res = replication.replication_residual(spec, port, _grid(cfg))
    p = _grid(cfg)
    result = dict(residual_max=mx, residual_argmax=float(p[int(np.argmax(np.abs(res)))]),
                  cash=port.cash, metadata=port.metadata)
    hedge = port if cfg["sign"] == "protection" else port.negated()
    if chain is not None:
        df = math.exp(-cfg["r"] * chain.maturity)
        result["cost"] = {side: replication.portfolio_cost(hedge, chain, side)
                          for side in ("mid", "ask")}
        result["cash_pv"] = df * hedge.cash
    return result, None, None, {"portfolio.csv": hedge.to_csv()}


def _logsv_params(cfg: Dict) -> logsv.LogSvParams:
    if cfg.get("logsv_params"):
        return logsv.LogSvParams.from_json(cfg["logsv_params"])
    return logsv.LogSvParams.from_dict(cfg)


def _price_one(cfg: Dict, spec: PositionSpec) -> Dict:
    tau = cfg["tau"]
    ctx = bsm.ValuationContext.for_spec(spec, tau)
    model, engine = cfg["model"], cfg["engine"]
    diag: Dict = {}
    if engine == "closed":
        pv = float(bsm.pv(spec, ctx, bsm.BsmParams(cfg["sigma"], cfg["r"], cfg["q"])))
    elif engine == "fourier":
        mgf_model = (fourier.BsmMgf(bsm.BsmParams(cfg["sigma"], cfg["r"], cfg["q"]))
                     if model == "bsm" else
                     logsv.LogSvMgf(_logsv_params(cfg), cfg["r"], cfg["q"]))
        if spec.protocol is amm.Protocol.V3:
            pv, res = fourier.pv_v3_mgf(mgf_model, spec, ctx, return_diagnostics=True)
            diag = dict(y_max=res.y_max, panels=res.panels, error=res.error,
                        tail_ratio=res.tail_ratio)
        else:
            pv = fourier.pv_v2_mgf(mgf_model, spec, ctx)
        pv = float(pv)
    else:
        mc = montecarlo.McConfig(cfg["paths"], cfg["steps"], cfg["seed"],
                                 workers=cfg["workers"])
        mu = cfg["r"] - cfg["q"]
        if model == "bsm":
            smp = montecarlo.sample_gbm_terminal(
                bsm.BsmParams(cfg["sigma"], cfg["r"], cfg["q"]), tau, mc)
        else:
            smp = montecarlo.sample_logsv_terminal(_logsv_params(cfg), mu, tau, mc)
        pv, se = montecarlo.mc_price(
            lambda x: amm.protection_payoff(spec, spec.p0 * np.exp(x)), smp, cfg["r"], tau)
        diag = dict(se=se, paths=cfg["paths"], steps=cfg["steps"] if model == "logsv" else 1)
    return dict(pv=pv, apr=pv / tau if tau > 0 else float("nan"), diagnostics=diag)


def cmd_price(cfg: Dict):
    if cfg["engine"] == "closed" and cfg["model"] != "bsm":
        raise UsageError("the closed engine supports only --model bsm")
    if not cfg["tau"] > 0:
        raise UsageError("--tau must be positive")
    ms = cfg.get("range_multiples")
    if not ms:
        return _price_one(cfg, _spec(cfg)), None, None
    rows = []
    for m in ms:
        out = _price_one(cfg, _spec(dict(cfg, protocol="v3", range_multiple=m)))
        rows.append([m, out["pv"], out["apr"], out["diagnostics"].get("se", float("nan"))])
    return {}, ["m", "pv", "apr", "se"], rows


def cmd_delta(cfg: Dict):
    spec = _spec(cfg)
    if not cfg["tau"] > 0:
        raise UsageError("--tau must be positive")
    params = bsm.BsmParams(cfg["sigma"], cfg["r"], cfg["q"])
    ctx0 = bsm.ValuationContext.for_spec(spec, cfg["tau"])
    delta_fn = bsm.delta_v3 if spec.protocol is amm.Protocol.V3 else bsm.delta_v2

    def pv_at(p):
        return float(bsm.pv(spec, ctx0.with_price(p, spec.p0), params))

    rows = []
    for p in _grid(cfg):
        h = cfg["fd_step"] * p
        fd = (pv_at(p + h) - pv_at(p - h)) / (2 * h)
        an = float(delta_fn(spec, ctx0.with_price(p, spec.p0), params))
        rows.append([float(p), an, fd, abs(an - fd)])
    result = dict(delta_at_p0=float(delta_fn(spec, ctx0, params)),
                  max_gap=max(r[3] for r in rows))
    return result, ["p", "delta", "delta_fd", "gap"], rows


COMMANDS = dict(position=cmd_position, il=cmd_il, replicate=cmd_replicate, price=cmd_price,
                delta=cmd_delta)


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = resolve_config(args)
        out = COMMANDS[args.command](cfg)
        result, cols, rows = out[:3]
        extra = out[3] if len(out) > 3 else None
        for path in _emit(cfg, result, cols, rows, extra):
            print(path)
        return EXIT_OK
    except (UsageError, replication.MissingStrikesError, ValueError, KeyError) as e:
        # ValueError here means a rejected input (bad range, grid, params)
        print(f"ilhedge: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (fourier.QuadratureError, logsv.OdeIntegrationError, FloatingPointError,
            ArithmeticError) as e:
        print(f"ilhedge: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
