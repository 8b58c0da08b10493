"""Commutator defect of the monodromy pair as a function of m.

Used to pick the non-commutativity threshold: integer m sits at rounding
level, everything else is O(0.1) or larger.

    python3 scripts/monodromy_calibration.py --lambdas 4
"""
import argparse
import time

import numpy as np

from qcis.elliptic import square_lattice
from qcis.monodromy import commutativity_scan, generic_lambdas


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lambdas", type=int, default=4)
    ap.add_argument("--ms", type=float, nargs="+",
                    default=[0, 0.25, 0.5, 0.75, 1, 1.25, 1.5, 2, 2.5, 3])
    args = ap.parse_args()

    lat = square_lattice()
    lams = generic_lambdas(args.lambdas)
    print(f"{'m':>6} {'min defect':>11} {'max defect':>11} {'min line':>10} {'max det':>9} {'max rel':>9}")
    for m in args.ms:
        t = time.perf_counter()
        rows = commutativity_scan(m, lams, lat)
        d = np.array([r["commutator_defect"] for r in rows])
        line = min(r["common_line_defect"] for r in rows)
        det = max(r["det_defect"] for r in rows)
        rel = max(r["relation_defect"] for r in rows)
        print(f"{m:6.2f} {d.min():11.2e} {d.max():11.2e} {line:10.2e} {det:9.1e} {rel:9.1e}"
              f"   [{time.perf_counter() - t:.0f}s]")


if __name__ == "__main__":
    main()
