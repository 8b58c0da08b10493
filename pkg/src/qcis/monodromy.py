"""Monodromy of ``psi'' = (m(m+1) wp(z) + lam) psi`` on the punctured torus.

Solutions are continued along polylines with an adaptive embedded
Runge-Kutta pair (scipy's DOP853).  ``M_A`` and ``M_B`` come from the straight
paths ``b -> b + omega1`` and ``b -> b + omega2``; ``M_0`` from a small circle
around the puncture reached along the ray from ``b``.  A transport matrix is
the value at the path end of the fundamental matrix equal to the identity at
the start.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .elliptic import Lattice, square_lattice

RTOL = 1e-12
ATOL = 1e-12


class PathNearPole(ValueError):
    pass


class StepUnderflow(RuntimeError):
    pass


def _rhs_factory(k: float, lam: complex, lat: Lattice, za: complex, zb: complex):
    dz = zb - za

    def rhs(s, y):
        z = za + s * dz
        q = k * lat.wp(z) + lam
        # y = [psi1, psi1', psi2, psi2'] (two columns of the fundamental matrix)
        return np.array([y[1], q * y[0], y[3], q * y[2]], dtype=complex) * dz

    return rhs


def _pieces(path, piece: float):
    for za, zb in zip(path[:-1], path[1:]):
        length = abs(zb - za)
        count = max(1, int(np.ceil(length / piece)))
        for i in range(count):
            yield za + (zb - za) * i / count, za + (zb - za) * (i + 1) / count


def _segment_clearance(lat: Lattice, za: complex, zb: complex, samples: int = 64) -> float:
    s = np.linspace(0.0, 1.0, samples)
    z0, _, _ = lat.reduce(za + s * (zb - za))
    return float(np.min(np.abs(z0)))


def transport(m, lam: complex, lat: Lattice, path, rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    """Transport matrix of the solution basis along the polyline ``path``."""
    m = float(m)
    k = m * (m + 1)
    scale = abs(lat.omega1)
    path = [complex(z) for z in path]
    Y = np.eye(2, dtype=complex)
    for za, zb in _pieces(path, 0.1 * scale):
        clear = _segment_clearance(lat, za, zb)
        if clear < 0.02 * scale:
            raise PathNearPole(f"segment {za} -> {zb} passes within {clear:.3g} of a lattice point")
        length = abs(zb - za)
        # wp grows like distance^-2: cap the step near lattice points
        max_step = min(1.0, 0.01 * scale / length) if clear < 0.1 * scale else np.inf
        y0 = np.array([Y[0, 0], Y[1, 0], Y[0, 1], Y[1, 1]], dtype=complex)
        sol = solve_ivp(_rhs_factory(k, lam, lat, za, zb), (0.0, 1.0), y0, method="DOP853",
                        rtol=rtol, atol=atol, max_step=max_step)
        if sol.status != 0:
            raise StepUnderflow(sol.message)
        y = sol.y[:, -1]
        Y = np.array([[y[0], y[2]], [y[1], y[3]]])
    return Y


def loop_paths(lat: Lattice, basepoint: complex, circle_radius: float | None = None, circle_points: int = 48):
    """Polylines for the loops ``A``, ``B`` and the puncture loop ``0``."""
    b = complex(basepoint)
    w1, w2 = lat.omega1, lat.omega2
    r = 0.05 * abs(w1) if circle_radius is None else circle_radius
    start = r * b / abs(b)
    theta = np.angle(start) + np.linspace(0.0, 2 * np.pi, circle_points + 1)
    circle = [r * np.exp(1j * t) for t in theta]
    circle[-1] = start
    return {
        "A": [b, b + w1],
        "B": [b, b + w2],
        "0": [b] + circle + [b],
    }


def default_basepoint(lat: Lattice) -> complex:
    return -0.4 * lat.omega1 - 0.35 * lat.omega2


def _norm(M) -> float:
    return float(np.linalg.norm(M))


def commutator_defect(MA, MB) -> float:
    """``||[M_A, M_B]|| / (||M_A|| ||M_B||)``."""
    return _norm(MA @ MB - MB @ MA) / (_norm(MA) * _norm(MB))


def relation_defect(MA, MB, M0) -> float:
    """Smallest distance between a group commutator of ``M_A, M_B`` and ``M_0^(+-1)``."""
    iA, iB, i0 = np.linalg.inv(MA), np.linalg.inv(MB), np.linalg.inv(M0)
    comms = [MA @ MB @ iA @ iB, MB @ MA @ iB @ iA, iA @ iB @ MA @ MB, iB @ iA @ MB @ MA]
    return min(_norm(C - T) for C in comms for T in (M0, i0))


def _line_defect(v, w) -> float:
    nv, nw = np.linalg.norm(v), np.linalg.norm(w)
    if nw == 0:
        return 0.0
    return float(abs(v[0] * w[1] - v[1] * w[0]) / (nv * nw))


def line_defects(MA, MB, tol: float = 1e-8):
    """``sin`` of the angle between ``v`` and ``M_B v`` for each eigenline ``v`` of ``M_A``
    (and symmetrically).  A scalar matrix has every line as eigenline and
    contributes no constraint."""
    out = []
    for P, Q, name in ((MA, MB, "A"), (MB, MA, "B")):
        if _norm(P - P[0, 0] * np.eye(2)) < tol * max(1.0, _norm(P)):
            continue
        vals, vecs = np.linalg.eig(P)
        for i in range(2):
            v = vecs[:, i]
            out.append({"eigenline_of": name, "eigenvalue": complex(vals[i]),
                        "defect": _line_defect(v, Q @ v)})
    return out


@dataclass
class MonodromyResult:
    MA: np.ndarray
    MB: np.ndarray
    M0: np.ndarray
    lam: complex
    m: float
    basepoint: complex
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def mat(M):
            return [[[float(z.real), float(z.imag)] for z in row] for row in M]

        return {
            "lambda": [float(np.real(self.lam)), float(np.imag(self.lam))],
            "m": self.m,
            "basepoint": [self.basepoint.real, self.basepoint.imag],
            "M_A": mat(self.MA),
            "M_B": mat(self.MB),
            "M_0": mat(self.M0),
            "diagnostics": self.diagnostics,
        }


def irreducibility_probe(result: MonodromyResult) -> float:
    """Minimum over eigenlines of the line defect; ``0`` when a common line exists
    (including when both matrices are scalar)."""
    lines = line_defects(result.MA, result.MB)
    if not lines:
        return 0.0
    return min(d["defect"] for d in lines)


def monodromy_group(m, lam: complex, lat: Lattice | None = None, basepoint: complex | None = None) -> MonodromyResult:
    lat = square_lattice() if lat is None else lat
    b = default_basepoint(lat) if basepoint is None else complex(basepoint)
    paths = loop_paths(lat, b)
    MA = transport(m, lam, lat, paths["A"])
    MB = transport(m, lam, lat, paths["B"])
    M0 = transport(m, lam, lat, paths["0"])
    res = MonodromyResult(MA, MB, M0, complex(lam), float(m), b)
    lines = line_defects(MA, MB)
    res.diagnostics = {
        "det_defects": [float(abs(np.linalg.det(M) - 1)) for M in (MA, MB, M0)],
        "relation_defect": relation_defect(MA, MB, M0),
        "commutator_defect": commutator_defect(MA, MB),
        "common_line_defect": min((d["defect"] for d in lines), default=0.0),
        "traces": {"A": _cjson(np.trace(MA)), "B": _cjson(np.trace(MB)), "AB": _cjson(np.trace(MA @ MB)),
                   "0": _cjson(np.trace(M0))},
        "local_monodromy_defect": float(_norm(M0 - np.eye(2))),
    }
    if lines and res.diagnostics["common_line_defect"] < 1e-6 and res.diagnostics["commutator_defect"] < 1e-6:
        res.diagnostics["note"] = ("commuting pair: eigenlines of M_A are invariant under M_B, "
                                   "so the group is reducible; the lines themselves differ when eigenvalues do")
    return res


def _cjson(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def coalescing(MA, MB, tol: float = 1e-6) -> bool:
    """True when either generator has (numerically) a repeated eigenvalue, the
    signature of a branch point of the spectral curve."""
    return any(abs(np.trace(M) ** 2 - 4 * np.linalg.det(M)) < tol for M in (MA, MB))


def commutativity_scan(m, lambdas, lat: Lattice | None = None, basepoint: complex | None = None,
                       outlier_decades: float = 4.0):
    """One row per ``lam``; rows are flagged rather than dropped.

    ``coalescing`` marks repeated eigenvalues; ``outlier`` marks a commutator
    defect more than ``outlier_decades`` decades away from the median.
    """
    lat = square_lattice() if lat is None else lat
    rows = []
    for lam in lambdas:
        r = monodromy_group(m, lam, lat, basepoint)
        rows.append({
            "lambda": _cjson(lam),
            "commutator_defect": r.diagnostics["commutator_defect"],
            "det_defect": max(r.diagnostics["det_defects"]),
            "relation_defect": r.diagnostics["relation_defect"],
            "common_line_defect": r.diagnostics["common_line_defect"],
            "coalescing": coalescing(r.MA, r.MB),
        })
    logs = np.log10([max(row["commutator_defect"], 1e-300) for row in rows])
    med = float(np.median(logs)) if len(logs) else 0.0
    for row, lg in zip(rows, logs):
        row["outlier"] = bool(abs(lg - med) > outlier_decades)
        row["flagged"] = row["coalescing"] or row["outlier"]
    return rows


def generic_lambdas(count: int = 10, seed: int = 0):
    """Deterministic spectral parameters away from the real axis."""
    rng = np.random.default_rng(seed)
    return [complex(rng.uniform(-3, 3), rng.uniform(0.3, 2.0)) for _ in range(count)]
