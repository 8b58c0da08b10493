"""Spectral polynomials of L_m and a Hermite spot check of mu^2 = P(lambda).

    python3 scripts/lame_hierarchy.py --max-m 3 --seeds 3
"""
import argparse
import time

from qcis.commutant import find_commuting, spectral_polynomial
from qcis.elliptic import EllipticInvariants
from qcis.lame import build_lame, lattice_for, mu_on_eigenfunction, pi_residual, solve_bethe


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-m", type=int, default=3)
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()

    # g3 = 0 so the numeric lattice is the square one with the same invariants
    inv = EllipticInvariants(4, 0)
    lat = lattice_for(inv)
    for m in range(1, args.max_m + 1):
        t = time.perf_counter()
        L = build_lame(m, inv)
        Q = find_commuting(L, 2 * m + 1)
        P = spectral_polynomial(L, Q)
        print(f"m={m}  P(t) = {P}   [{time.perf_counter() - t:.1f}s]")
        for seed in range(args.seeds):
            pt = solve_bethe(m, lat, seed=seed)
            lam, res = pi_residual(pt.ansatz)
            mu = mu_on_eigenfunction(Q, pt.ansatz)
            val = sum(complex(c) * lam ** k for k, c in enumerate(P.coeffs))
            rel = abs(mu * mu - val) / max(1.0, abs(val))
            print(f"   seed {seed}: lambda = {lam:.10f}  pi residual {res:.1e}  |mu^2 - P| rel {rel:.1e}")


if __name__ == "__main__":
    main()
