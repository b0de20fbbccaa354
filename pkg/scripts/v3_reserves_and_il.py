"""Reserves and IL of a concentrated position on [1500, 2500] entered at 2000."""

import numpy as np

from _common import parse_out, write_rows
from ilhedge import amm
from ilhedge.amm import Kind, PositionSpec


def main():
    out = parse_out(__doc__, "v3_reserves_and_il.csv")
    p = np.linspace(1000.0, 3000.0, 401)
    spec = PositionSpec.v3(1e6, 2000.0, 1500.0, 2500.0)
    r = spec.reserves(p)
    x, y = np.broadcast_to(r.x, p.shape), np.broadcast_to(r.y, p.shape)
    il_f = amm.il(spec.with_kind(Kind.FUNDED), p)
    il_b = amm.il(spec, p)
    write_rows(out, ["p", "x", "y", "il_funded", "il_borrowed"],
               np.column_stack([p, x, y, il_f, il_b]).tolist())


if __name__ == "__main__":
    main()
