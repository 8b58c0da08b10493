"""Higher Calogero-Moser integrals for n = 2, 3 and their commutator residuals.

    python3 scripts/cm_integrals.py --m 1 2
"""
import argparse

from qcis.cm import (AnsatzTooSmall, ReducibleIntegral, build_cm, cm_commutator, residual_on_lattices,
                     solve_higher_integral)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--samples", type=int, default=200)
    args = ap.parse_args()

    for m in args.m:
        for n in (2, 3):
            L1, L2 = build_cm(n, m)
            for j in range(2, n + 2):
                try:
                    Lj = solve_higher_integral(n, m, j)
                except ReducibleIntegral as exc:
                    print(f"n={n} m={m} j={j}: reducible, L^{j} = {exc.combination}")
                    continue
                except AnsatzTooSmall as exc:
                    # j > n: the ansatz also contains products with L^n, so the fit is not unique
                    print(f"n={n} m={m} j={j}: {exc}")
                    continue
                abs_res = residual_on_lattices(cm_commutator(L2, Lj), samples=args.samples)
                rel_res = residual_on_lattices(cm_commutator(L2, Lj), samples=args.samples, relative=True)
                print(f"n={n} m={m} j={j}: {Lj}")
                print(f"    [L2, L{j}] residual abs {abs_res:.1e} rel {rel_res:.1e}")


if __name__ == "__main__":
    main()
