"""Borrowed-position P&L against its 50-wide strike replication, with the residual."""

import numpy as np

from _common import parse_out, write_rows
from ilhedge import amm
from ilhedge.amm import PositionSpec
from ilhedge.replication import build_portfolio, portfolio_payoff, replication_residual


def main():
    out = parse_out(__doc__, "static_replication.csv")
    spec = PositionSpec.v3(1e6, 2000.0, 1500.0, 2500.0)
    port = build_portfolio(spec, 50.0)
    p = np.linspace(1000.0, 3000.0, 2001)
    pnl = amm.pnl(spec, p)
    hedge = -portfolio_payoff(port, p)
    mx, res = replication_residual(spec, port, p)
    print(f"max residual {mx:.4e} of notional")
    write_rows(out, ["p", "pnl", "replica", "residual"],
               np.column_stack([p, pnl, hedge, res]).tolist())
    out.with_name("static_replication_portfolio.csv").write_text(port.to_csv())


if __name__ == "__main__":
    main()
