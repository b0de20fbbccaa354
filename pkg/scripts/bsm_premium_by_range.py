"""Annualised BSM protection premium of a borrowed position against the range multiple."""

import math

import numpy as np

from _common import parse_out, write_rows
from ilhedge import bsm
from ilhedge.amm import PositionSpec

TAU = 14 / 365


def main():
    out = parse_out(__doc__, "bsm_premium_by_range.csv")
    rows = []
    for m in np.round(np.arange(0.05, 1.001, 0.05), 2):
        spec = PositionSpec.v3(1.0, 2000.0, 2000 * math.exp(-m), 2000 * math.exp(m))
        row = [m]
        for sigma in (0.4, 0.6, 0.8, 1.0):
            pv = bsm.pv(spec, bsm.ValuationContext.for_spec(spec, TAU), bsm.BsmParams(sigma))
            row.append(float(pv) / TAU)
        rows.append(row)
    write_rows(out, ["m", "apr_sigma_0.4", "apr_sigma_0.6", "apr_sigma_0.8", "apr_sigma_1.0"],
               rows)


if __name__ == "__main__":
    main()
