"""Reserves and IL of a constant-product position, funded and borrowed."""

import numpy as np

from _common import parse_out, write_rows
from ilhedge import amm
from ilhedge.amm import Kind, PositionSpec


def main():
    out = parse_out(__doc__, "v2_reserves_and_il.csv")
    p = np.linspace(500.0, 4000.0, 351)
    spec = PositionSpec.v2(1e6, 2000.0)
    r = spec.reserves(p)
    il_f = amm.il(spec.with_kind(Kind.FUNDED), p)
    il_b = amm.il(spec, p)
    write_rows(out, ["p", "x", "y", "il_funded", "il_borrowed"],
               np.column_stack([p, r.x, r.y, il_f, il_b]).tolist())


if __name__ == "__main__":
    main()
