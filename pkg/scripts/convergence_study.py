"""Resolution sweep: band identity error (both methods) and total-curvature error.

    python3 scripts/convergence_study.py --res 64 128 256 512
"""

from __future__ import annotations

import argparse
import math
import time
from dataclasses import dataclass, field

from levelband.band import Band, VerifyOptions, rhs_prediction, run_band
from levelband.contour import contour_integral, contour_sigma, extract_level_set
from levelband.exprlang import field_from_text
from levelband.field import Window, builtin_field


@dataclass
class StudyConfig:
    resolutions: list[int] = field(default_factory=lambda: [64, 128, 256, 512])
    n_levels: int = 16
    subdiv_depth: int = 4


CASES = [
    ("paraboloid [1,4]", lambda: builtin_field("paraboloid"), 1.0, 4.0),
    ("gaussian [0.2,0.8]", lambda: builtin_field("gaussian"), 0.2, 0.8),
    ("-(x^2+y^2) [-4,-1]", lambda: field_from_text("-(x^2+y^2)"), -4.0, -1.0),
    ("two_bump [0.3,0.5]",
     lambda: builtin_field("two_bump", (2.0,), Window.square(5.0)), 0.3, 0.5),
    ("ellipse(2,1) [0.5,1.5]",
     lambda: builtin_field("ellipse_quadratic", (2.0, 1.0)), 0.5, 1.5),
]


def band_table(cfg: StudyConfig) -> None:
    print(f"{'case':26s} {'res':>5s} {'rel.err direct':>15s} {'rel.err coarea':>15s} "
          f"{'seconds':>8s}")
    for name, factory, a, b in CASES:
        f = factory()
        for res in cfg.resolutions:
            opts = VerifyOptions(res=res, n_levels=cfg.n_levels, subdiv_depth=cfg.subdiv_depth)
            t0 = time.perf_counter()
            run = run_band(f, Band(a, b), options=opts)
            dt = time.perf_counter() - t0
            rhs = rhs_prediction(run.components, run.band)
            print(f"{name:26s} {res:5d} {abs(run.lhs_direct - rhs) / abs(rhs):15.3e} "
                  f"{abs(run.lhs_coarea - rhs) / abs(rhs):15.3e} {dt:8.2f}")


def curvature_table(cfg: StudyConfig) -> None:
    print(f"\n{'total curvature at level':26s} {'res':>5s} {'|err|':>15s}")
    for name, factory, a, b in CASES:
        f = factory()
        t = 0.5 * (a + b)
        for res in cfg.resolutions:
            err = max(abs(contour_integral(f, c) - 2 * math.pi * contour_sigma(f, c))
                      for c in extract_level_set(f, t, res=res))
            print(f"{name.split()[0] + f' t={t:g}':26s} {res:5d} {err:15.3e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--res", type=int, nargs="+", default=StudyConfig().resolutions)
    ap.add_argument("--levels", type=int, default=StudyConfig.n_levels)
    ap.add_argument("--depth", type=int, default=StudyConfig.subdiv_depth)
    args = ap.parse_args()
    cfg = StudyConfig(args.res, args.levels, args.depth)
    band_table(cfg)
    curvature_table(cfg)


if __name__ == "__main__":
    main()
