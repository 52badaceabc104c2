"""Bands ending at critical values: the eps path and its extrapolated limit.

    python3 scripts/critical_endpoints.py
"""

from __future__ import annotations

import argparse
import math
from dataclasses import dataclass

from levelband.band import Band, VerifyOptions, verify_band
from levelband.field import Window, builtin_field

SADDLE = 2 * math.exp(-4.0)


@dataclass
class EndpointConfig:
    res: int = 256


CASES = [
    ("paraboloid [0,1] (min at 0)", lambda: builtin_field("paraboloid"), 0.0, 1.0,
     2 * math.pi),
    ("gaussian [0.2,1] (max at 1)", lambda: builtin_field("gaussian"), 0.2, 1.0,
     -2 * math.pi * 0.8),
    ("two_bump [saddle,0.5]", lambda: builtin_field("two_bump", (2.0,), Window.square(5.0)),
     SADDLE, 0.5, -4 * math.pi * (0.5 - SADDLE)),
    ("two_bump [0.01,0.5] (saddle inside)",
     lambda: builtin_field("two_bump", (2.0,), Window.square(5.0)), 0.01, 0.5,
     -2 * math.pi * (SADDLE - 0.01) - 4 * math.pi * (0.5 - SADDLE)),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--res", type=int, default=EndpointConfig.res)
    cfg = EndpointConfig(ap.parse_args().res)
    for name, factory, a, b, exact in CASES:
        rep = verify_band(factory(), Band(a, b), options=VerifyOptions(res=cfg.res))
        print(f"{name}: case {rep.case}, exact {exact:.6f}")
        for lim in rep.limits:
            vals = " ".join(f"{v:.6f}" for v in lim.values_direct)
            print(f"  [{lim.band.a:.6g}, {lim.band.b:.6g}] end={lim.end.value}: {vals} "
                  f"-> {lim.limit_direct:.6f} (converged={lim.converged})")
        print(f"  lhs {rep.lhs_direct:.6f}  rhs {rep.rhs:.6f}  "
              f"rel.err vs exact {abs(rep.lhs_direct - exact) / abs(exact):.2e}")


if __name__ == "__main__":
    main()
