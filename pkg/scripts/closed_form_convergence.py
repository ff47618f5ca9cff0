#!/usr/bin/env python3
"""Ratio of quadrature totals to the leading closed-form constants.

For each benchmark rectangle this prints total(u) / closed_form(u) over a
range of levels.  The ratios drift toward 1 as u grows; the script is the
quickest way to eyeball the convergence rate and the residual bias at
moderate levels (u ~ 4..8), which is much larger than people expect.

Usage:
    python3 scripts/closed_form_convergence.py [--levels 4:10:1] [--method both]
"""

import argparse
import math
import sys

from excursion_kit.field import CosineField
from excursion_kit.gauss import gauss_tail
from excursion_kit.geometry import RectDomain
from excursion_kit.mec import excursion_prob_mu, mean_euler_characteristic
from excursion_kit.quad import QuadSpec

PI = math.pi
S5 = math.sqrt(5.0)

BENCHMARKS = [
    # label, domain, reference constant c(u) so that total ~ c(u) as u -> inf
    ("[0,pi/2]^2      ", RectDomain([0, 0], [PI / 2, PI / 2]),
     lambda u: gauss_tail(u / math.sqrt(3))),
    ("[0,3pi/2]x[0,pi/2]", RectDomain([0, 0], [1.5 * PI, PI / 2]),
     lambda u: math.sqrt(2) * gauss_tail(u / 2)),
    ("[0,3pi/2]^2     ", RectDomain([0, 0], [1.5 * PI, 1.5 * PI]),
     lambda u: 2 * gauss_tail(u / S5)),
    ("[0,pi]^2        ", RectDomain([0, 0], [PI, PI]),
     lambda u: (3 + 2 * math.sqrt(2)) / 4 * gauss_tail(u / S5)),
    ("[0,3pi/2]x[0,pi]", RectDomain([0, 0], [1.5 * PI, PI]),
     lambda u: (2 + math.sqrt(2)) / 2 * gauss_tail(u / S5)),
]


def parse_levels(text):
    a, b, s = (float(x) for x in text.split(":"))
    out = []
    u = a
    while u <= b + 1e-9:
        out.append(u)
        u += s
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", default="4:10:1")
    ap.add_argument("--method", default="both", choices=["mu", "mean_ec", "both"])
    args = ap.parse_args(argv)
    levels = parse_levels(args.levels)
    spec = QuadSpec()
    model = CosineField()

    methods = []
    if args.method in ("mu", "both"):
        methods.append(("mu", lambda d, u: excursion_prob_mu(model, d, u, spec).total))
    if args.method in ("mean_ec", "both"):
        methods.append(
            ("mean_ec", lambda d, u: mean_euler_characteristic(model, d, u, spec).total)
        )

    for mname, fn in methods:
        print(f"\n== {mname}: total(u) / closed_form(u) ==")
        print("domain               " + "".join(f"  u={u:<6.3g}" for u in levels))
        for label, dom, ref in BENCHMARKS:
            ratios = [fn(dom, u) / ref(u) for u in levels]
            print(label + " " + "".join(f"  {r:8.5f}" for r in ratios))
    return 0


if __name__ == "__main__":
    sys.exit(main())
