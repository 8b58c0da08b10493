"""Exact Gauss-Jordan elimination over Q (or Q(i)).

Matrices are lists of rows.  Everything here is deterministic: pivots are
chosen left to right, first nonzero row wins.
"""
from __future__ import annotations

from fractions import Fraction


def rref(rows, ncols: int | None = None):
    """Reduced row echelon form; returns ``(R, pivot_columns)``."""
    M = [list(r) for r in rows]
    if not M:
        return [], []
    ncols = len(M[0]) if ncols is None else ncols
    pivots = []
    r = 0
    for c in range(ncols):
        piv = None
        for i in range(r, len(M)):
            if M[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][c] if not isinstance(M[r][c], int) else Fraction(1, M[r][c])
        M[r] = [x * inv for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == len(M):
            break
    return M[:r], pivots


def nullspace(rows, ncols: int):
    """Basis of ``{x : A x = 0}``, one vector per free column."""
    R, pivots = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, p in enumerate(pivots):
            v[p] = -R[i][f]
        basis.append(v)
    return basis


def solve_affine(rows, rhs, ncols: int):
    """Solve ``A x = b``.

    Returns ``(x, null)`` where ``x`` sets every free variable to zero, or
    ``(None, null)`` if the system is inconsistent.
    """
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    R, pivots = rref(aug, ncols + 1)
    if ncols in pivots:
        return None, nullspace(rows, ncols)
    x = [Fraction(0)] * ncols
    for i, p in enumerate(pivots):
        x[p] = R[i][ncols]
    return x, nullspace(rows, ncols)


def rank(rows, ncols: int) -> int:
    return len(rref(rows, ncols)[1])
