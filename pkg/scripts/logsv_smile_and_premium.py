"""Log-normal SV implied-vol smiles by vol-of-vol, and annualised premia by range multiple."""

import math

import numpy as np

from _common import parse_out, write_rows
from ilhedge import fourier, logsv
from ilhedge.amm import PositionSpec
from ilhedge.bsm import ValuationContext

TAU = 14 / 365
EPSILONS = (0.5, 1.0, 1.5)


def main():
    out = parse_out(__doc__, "logsv_smile.csv")
    models = {e: logsv.LogSvParams(**logsv.BASE_PARAMS, epsilon=e) for e in EPSILONS}
    strikes = np.exp(np.linspace(-0.3, 0.3, 25))
    ivs = [logsv.implied_vol_curve(models[e], TAU, strikes) for e in EPSILONS]
    write_rows(out, ["strike"] + [f"iv_eps_{e}" for e in EPSILONS],
               np.column_stack([strikes] + ivs).tolist())

    rows = []
    for m in np.round(np.arange(0.05, 1.001, 0.05), 2):
        spec = PositionSpec.v3(1.0, 2000.0, 2000 * math.exp(-m), 2000 * math.exp(m))
        ctx = ValuationContext.for_spec(spec, TAU)
        rows.append([m] + [fourier.pv_v3_mgf(logsv.LogSvMgf(models[e]), spec, ctx) / TAU
                           for e in EPSILONS])
    write_rows(out.with_name("logsv_premium_by_range.csv"),
               ["m"] + [f"apr_eps_{e}" for e in EPSILONS], rows)


if __name__ == "__main__":
    main()
