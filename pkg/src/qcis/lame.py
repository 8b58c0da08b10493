"""The Lame operator ``D^2 - m(m+1) wp`` and its Hermite eigenfunctions.

For integer ``m`` the eigenfunctions are ``exp(int f)`` with ``f`` an elliptic
function having a simple pole of residue ``-m`` at the origin and ``m``
simple poles ``a_i`` of residue ``+1``:

    f(z) = c0 + sum_i zeta(z - a_i) - m zeta(z)

The Bethe conditions say that ``f(a_i + x) + f(a_i - x)`` vanishes at
``x = 0``.  On a solution, ``f^2 + f' - m(m+1) wp`` is the constant eigenvalue.

The pole conditions are indexed ``a_0 = 0, a_1, ..., a_m``; read literally,
the source statement indexes the last point as ``a_n``.  We take ``n = m``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .elliptic import EllipticInvariants, Lattice, NearPole, square_lattice, square_lattice_with_g2
from .opalg import DiffOp, EllipticRing
from .scalars import as_fraction
from .series import LaurentSeries, solve_log_derivative

_PLASTIC = 1.32471795724474602596


class NoConvergence(RuntimeError):
    def __init__(self, seed, residual):
        super().__init__(f"Bethe Newton iteration from seed {seed} stalled at residual {residual:.3e}")
        self.seed = seed
        self.residual = residual


def build_lame(m, inv: EllipticInvariants) -> DiffOp:
    """``L_m = D^2 - m(m+1) p`` over ``Q[p, p']``."""
    m = as_fraction(m)
    R = EllipticRing(inv)
    return DiffOp(R, [R.p() * (-m * (m + 1)), R.zero(), R.const(1)])


# --------------------------------------------------------------------------
# Hermite ansatz
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class HermiteAnsatz:
    m: int
    poles: tuple
    c0: complex
    lattice: Lattice
    residual: float = float("nan")

    def __post_init__(self):
        if len(self.poles) != self.m:
            raise ValueError(f"expected {self.m} poles, got {len(self.poles)}")
        lat = self.lattice
        pts = [0j] + [complex(a) for a in self.poles]
        for i in range(len(pts)):
            for j in range(i):
                if lat.distance_to_lattice(pts[i] - pts[j]) < 1e-6 * lat.rmin:
                    raise ValueError("poles must be pairwise distinct and distinct from 0 modulo the lattice")


@dataclass(frozen=True)
class SpectralPoint:
    lam: complex
    ansatz: HermiteAnsatz


def sigma(ans: HermiteAnsatz) -> HermiteAnsatz:
    """The involution ``f(x) -> -f(-x)``: negate every pole and ``c0``."""
    return replace(ans, poles=tuple(-complex(a) for a in ans.poles), c0=-ans.c0)


def _check_pole_distance(ans: HermiteAnsatz, z: complex, tol: float = 1e-9):
    lat = ans.lattice
    for a in (0j,) + tuple(ans.poles):
        if lat.distance_to_lattice(z - a) < tol * lat.rmin:
            raise NearPole(f"{z} is within {tol} of a pole of f")


def hermite_f(ans: HermiteAnsatz, z: complex) -> complex:
    _check_pole_distance(ans, z)
    lat = ans.lattice
    total = ans.c0 - ans.m * lat.zeta(z)
    for a in ans.poles:
        total += lat.zeta(z - a)
    return total


def hermite_f_prime(ans: HermiteAnsatz, z: complex) -> complex:
    _check_pole_distance(ans, z)
    lat = ans.lattice
    total = ans.m * lat.wp(z)
    for a in ans.poles:
        total -= lat.wp(z - a)
    return total


def bethe_values(ans: HermiteAnsatz) -> np.ndarray:
    """``[f(a_i + x) + f(a_i - x)]`` at ``x = 0`` for each nonzero pole.

    The ``1/x`` parts cancel and the odd part of ``zeta`` vanishes, leaving
    twice the regular part of ``f`` at ``a_i``.
    """
    lat = ans.lattice
    out = []
    for i, a in enumerate(ans.poles):
        reg = ans.c0 - ans.m * lat.zeta(a)
        for j, b in enumerate(ans.poles):
            if j != i:
                reg += lat.zeta(a - b)
        out.append(2 * reg)
    return np.array(out, dtype=complex)


def bethe_residual(ans: HermiteAnsatz) -> float:
    v = bethe_values(ans)
    return float(np.max(np.abs(v))) if v.size else 0.0


# --------------------------------------------------------------------------
# Newton solve for the Bethe equations
# --------------------------------------------------------------------------
def low_discrepancy(lat: Lattice, count: int, start: int = 0):
    """Points of the additive R2 sequence in the cell ``[-1/2, 1/2)^2`` of the periods."""
    alpha = np.array([1 / _PLASTIC, 1 / _PLASTIC ** 2])
    out = []
    for k in range(start, start + count):
        x, y = (0.5 + (k + 1) * alpha) % 1.0 - 0.5
        out.append(x * lat.omega1 + y * lat.omega2)
    return out


def seed_poles(m: int, lat: Lattice, seed: int, spacing: float = 0.05):
    """Deterministic initial poles for seed index ``seed``."""
    chosen = []
    k = seed * 997
    scale = spacing * abs(lat.omega1)
    while len(chosen) < m:
        z = low_discrepancy(lat, 1, k)[0]
        k += 1
        if lat.distance_to_lattice(z) < scale:
            continue
        if any(lat.distance_to_lattice(z - a) < scale or lat.distance_to_lattice(z + a) < scale
               for a in chosen):
            continue
        chosen.append(z)
    return chosen


def _bethe_system(m: int, lat: Lattice, a: np.ndarray):
    """Residuals and Jacobian with ``c0 = sum zeta(a_j)`` eliminated."""
    z = np.array([lat.zeta(x) for x in a])
    w = np.array([lat.wp(x) for x in a])
    c0 = z.sum()
    g = np.empty(m, dtype=complex)
    J = np.empty((m, m), dtype=complex)
    for i in range(m):
        val = c0 - m * z[i]
        for j in range(m):
            if j != i:
                val += lat.zeta(a[i] - a[j])
        g[i] = 2 * val
        for k in range(m):
            if k == i:
                d = -w[i] + m * w[i]
                for j in range(m):
                    if j != i:
                        d -= lat.wp(a[i] - a[j])
            else:
                d = -w[k] + lat.wp(a[i] - a[k])
            J[i, k] = 2 * d
    return g, J, c0


def solve_bethe(m: int, lat: Lattice | None = None, seed: int = 0, tol: float = 1e-10,
                maxiter: int = 60, poles=None) -> SpectralPoint:
    """Newton iteration on the poles; ``lam`` is read off from :func:`pi_residual`.

    The constant ``c0`` is eliminated through the condition at the origin
    (``c0 = sum zeta(a_j)``).  The equations have rank ``m - 1`` (their sum
    vanishes identically), so each step is a minimum-norm least-squares step.
    """
    if m < 1:
        raise ValueError("solve_bethe needs m >= 1")
    lat = square_lattice() if lat is None else lat
    a = np.array(seed_poles(m, lat, seed) if poles is None else poles, dtype=complex)
    res = np.inf
    for _ in range(maxiter):
        g, J, c0 = _bethe_system(m, lat, a)
        res = float(np.max(np.abs(g)))
        if res < tol:
            break
        step, *_ = np.linalg.lstsq(J, -g, rcond=None)
        # damp steps that would jump across the cell
        lim = 0.2 * lat.rmin
        nrm = np.max(np.abs(step))
        if nrm > lim:
            step *= lim / nrm
        a = a + step
        for i in range(m):
            a[i] = complex(lat.reduce(a[i])[0])
    else:
        raise NoConvergence(seed, res)
    g, _, c0 = _bethe_system(m, lat, a)
    res = float(np.max(np.abs(g)))
    if res >= tol:
        raise NoConvergence(seed, res)
    try:
        ans = HermiteAnsatz(m, tuple(complex(x) for x in a), complex(c0), lat, res)
    except ValueError as exc:
        raise NoConvergence(seed, res) from exc
    lam, _ = pi_residual(ans)
    return SpectralPoint(lam, ans)


def constant_ansatz(c0: complex, lat: Lattice | None = None) -> HermiteAnsatz:
    """The ``m = 0`` ansatz ``f = c0``."""
    return HermiteAnsatz(0, (), complex(c0), square_lattice() if lat is None else lat, 0.0)


# --------------------------------------------------------------------------
# Checks
# --------------------------------------------------------------------------
def sample_points(ans: HermiteAnsatz, count: int = 20, clearance: float = 0.05):
    """Quasi-random points of the period cell away from every pole."""
    lat = ans.lattice
    pts = []
    k = 0
    while len(pts) < count:
        z = low_discrepancy(lat, 1, 5000 + k)[0]
        k += 1
        near = min(lat.distance_to_lattice(z - a) for a in (0j,) + tuple(ans.poles))
        if near >= clearance * abs(lat.omega1):
            pts.append(z)
    return pts


def pi_values(ans: HermiteAnsatz, points) -> np.ndarray:
    lat = ans.lattice
    k = ans.m * (ans.m + 1)
    out = []
    for z in points:
        f = hermite_f(ans, z)
        out.append(f * f + hermite_f_prime(ans, z) - k * lat.wp(z))
    return np.array(out)


def pi_residual(ans: HermiteAnsatz, count: int = 20):
    """``(lam, residual)``: mean and max deviation of ``f^2 + f' - m(m+1) wp``."""
    vals = pi_values(ans, sample_points(ans, count))
    lam = complex(np.mean(vals))
    return lam, float(np.max(np.abs(vals - lam)))


def best_base_point(ans: HermiteAnsatz, grid: int = 24) -> complex:
    """Grid point of the period cell farthest from every pole of ``f``."""
    lat = ans.lattice
    best, dist = None, -1.0
    for i in range(grid):
        for j in range(grid):
            z = ((i + 0.5) / grid - 0.5) * lat.omega1 + ((j + 0.5) / grid - 0.5) * lat.omega2
            d = min(lat.distance_to_lattice(z - a) for a in (0j,) + tuple(ans.poles))
            if d > dist:
                best, dist = z, d
    return best


def cauchy_taylor(fn, x0: complex, radius: float, nterms: int, nodes: int = 128) -> np.ndarray:
    """Taylor coefficients of ``fn`` at ``x0`` by the trapezoid rule on a circle."""
    theta = 2 * np.pi * np.arange(nodes) / nodes
    vals = np.array([fn(x0 + radius * np.exp(1j * t)) for t in theta])
    c = np.fft.fft(vals) / nodes
    return np.array([c[n] / radius ** n for n in range(nterms)])


@dataclass(frozen=True)
class EigenCheck:
    residual: float
    x0: complex
    radius: float
    psi: LaurentSeries
    f_series: LaurentSeries


def local_solution(ans: HermiteAnsatz, trunc: int, x0: complex | None = None, radius: float | None = None):
    """Series of ``psi = exp(int f)`` at ``x0`` (normalized ``psi(x0) = 1``)."""
    lat = ans.lattice
    if x0 is None:
        x0 = best_base_point(ans)
    if radius is None:
        near = min(lat.distance_to_lattice(x0 - a) for a in (0j,) + tuple(ans.poles))
        radius = 0.5 * near
    fc = cauchy_taylor(lambda z: hermite_f(ans, z), x0, radius, trunc + 2)
    f_series = LaurentSeries(0, [complex(c) for c in fc], trunc + 2)
    rho, psi = solve_log_derivative(f_series, trunc + 2)
    return psi, f_series, x0, radius


def eigenfunction_check(ans: HermiteAnsatz, lam: complex, trunc: int = 15,
                        x0: complex | None = None) -> EigenCheck:
    """Apply ``L_m - lam`` to the local series of ``exp(int f)``.

    The residual is the largest coefficient of ``r^2 (L_m - lam) psi`` in the
    rescaled coordinate ``u / r`` through order ``trunc``, with ``r`` the
    Cauchy radius (half the distance from ``x0`` to the nearest pole).
    """
    lat = ans.lattice
    psi, f_series, x0, r = local_solution(ans, trunc, x0)
    wpc = cauchy_taylor(lat.wp, x0, r, trunc + 2)
    wps = LaurentSeries(0, [complex(c) for c in wpc], trunc + 2)
    k = ans.m * (ans.m + 1)
    res = psi.derive().derive() - (wps.scale(k) + lam) * psi
    worst = 0.0
    for n in range(min(trunc, res.trunc)):
        worst = max(worst, abs(complex(res[n])) * r ** (n + 2))
    return EigenCheck(worst, x0, r, psi, f_series)


def wronskian(ans1: HermiteAnsatz, ans2: HermiteAnsatz, x0: complex) -> complex:
    """Wronskian of ``exp(int f1)`` and ``exp(int f2)``, both normalized to 1 at ``x0``."""
    return hermite_f(ans2, x0) - hermite_f(ans1, x0)


def mu_on_eigenfunction(Q: DiffOp, ans: HermiteAnsatz, trunc: int = 12, x0: complex | None = None) -> complex:
    """Eigenvalue of the exact operator ``Q`` on ``exp(int f)``, evaluated at ``x0``.

    ``Q``'s coefficients in ``p, p'`` are evaluated at ``(wp(x0), wp'(x0))``;
    the lattice must carry the same invariants as ``Q``'s ring.
    """
    lat = ans.lattice
    psi, _, x0, _ = local_solution(ans, max(trunc, Q.order + 2), x0)
    p0, q0 = lat.wp_pair(x0)
    total = 0j
    fact = 1
    for j, b in enumerate(Q.coeffs):
        if j:
            fact *= j
        if b.is_zero():
            continue
        val = sum(complex(c) * p0 ** a * (q0 if bb else 1) for (a, bb), c in b.terms.items())
        total += val * fact * complex(psi[j])
    return total


def lattice_for(inv: EllipticInvariants) -> Lattice:
    """Square lattice matching ``inv`` when ``g3 = 0`` and ``g2 > 0``."""
    if inv.g3 != 0 or inv.g2 <= 0:
        raise ValueError("only square lattices (g3 = 0, g2 > 0) are constructed from invariants")
    return square_lattice_with_g2(float(inv.g2))


def poles_json(ans: HermiteAnsatz):
    return [[complex(a).real, complex(a).imag] for a in ans.poles]


def as_m(m) -> int:
    mf = Fraction(m)
    if mf.denominator != 1 or mf < 0:
        raise ValueError("Hermite ansatz needs a non-negative integer m")
    return int(mf)
