"""BSM delta of the borrowed-position protection claim across the underlying price."""

import numpy as np

from _common import parse_out, write_rows
from ilhedge import bsm
from ilhedge.amm import PositionSpec

TAU = 14 / 365


def main():
    out = parse_out(__doc__, "bsm_delta_grid.csv")
    spec = PositionSpec.v3(1e6, 2000.0, 1500.0, 2500.0)
    ctx0 = bsm.ValuationContext.for_spec(spec, TAU)
    rows = []
    for p in np.linspace(1000.0, 3000.0, 201):
        row = [p]
        for sigma in (0.4, 0.6, 0.8, 1.0):
            d = bsm.delta_v3(spec, ctx0.with_price(p, spec.p0), bsm.BsmParams(sigma))
            row.append(spec.notional * float(d))  # token-1 units for the whole notional
        rows.append(row)
    write_rows(out, ["p", "delta_sigma_0.4", "delta_sigma_0.6", "delta_sigma_0.8",
                     "delta_sigma_1.0"], rows)


if __name__ == "__main__":
    main()
