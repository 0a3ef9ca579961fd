"""Small exact integer linear algebra: unimodular row reduction, kernels, solves.

Smith invariants are delegated to sympy; the routines here exist because we
need the unimodular transform, which sympy's normal forms do not return.
"""
from __future__ import annotations

from fractions import Fraction

import sympy
from sympy.matrices.normalforms import invariant_factors


def row_reduce(A: list[list[int]]) -> tuple[list[list[int]], list[list[int]]]:
    """Return (H, U) with U unimodular and U·A = H in row echelon form."""
    H = [list(map(int, r)) for r in A]
    m = len(H)
    ncols = len(H[0]) if m else 0
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    row = 0
    for col in range(ncols):
        if row >= m:
            break
        while True:
            nz = [r for r in range(row, m) if H[r][col] != 0]
            if not nz:
                break
            piv = min(nz, key=lambda r: abs(H[r][col]))
            H[row], H[piv] = H[piv], H[row]
            U[row], U[piv] = U[piv], U[row]
            done = True
            for r in range(row + 1, m):
                q = H[r][col] // H[row][col]
                if q:
                    H[r] = [x - q * y for x, y in zip(H[r], H[row])]
                    U[r] = [x - q * y for x, y in zip(U[r], U[row])]
                if H[r][col] != 0:
                    done = False
            if done:
                break
        if any(H[r][col] for r in range(row, m)):
            row += 1
    return H, U


def left_kernel(A: list[list[int]]) -> list[list[int]]:
    """Z-basis of {y : y·A = 0}; the result is saturated."""
    H, U = row_reduce(A)
    return [U[r] for r in range(len(H)) if not any(H[r])]


def right_kernel(A: list[list[int]]) -> list[list[int]]:
    """Z-basis (as rows) of {x : A·x = 0}."""
    return left_kernel(transpose(A))


def transpose(A):
    return [list(r) for r in zip(*A)] if A else []


def matmul(A, B):
    Bt = transpose(B)
    return [[sum(a * b for a, b in zip(r, c)) for c in Bt] for r in A]


def solve_left(F: list[list[int]], G: list[list[int]]) -> list[list[Fraction]]:
    """Solve X·F = G for X, given F of full row rank."""
    Fm, Gm = sympy.Matrix(F), sympy.Matrix(G)
    X = Gm * Fm.T * (Fm * Fm.T).inv()
    if X * Fm != Gm:
        raise ValueError("G does not factor through F")
    return [[Fraction(int(x.p), int(x.q)) for x in X.row(i)] for i in range(X.rows)]


def as_int(M) -> list[list[int]]:
    out = []
    for row in M:
        r = []
        for x in row:
            x = Fraction(x)
            if x.denominator != 1:
                raise ValueError("matrix is not integral")
            r.append(int(x))
        out.append(r)
    return out


def smith_invariants(A: list[list[int]]) -> list[int]:
    """Nonzero invariant factors of the integer matrix A."""
    if not A or not A[0]:
        return []
    inv = invariant_factors(sympy.Matrix(A), domain=sympy.ZZ)
    return [abs(int(x)) for x in inv if int(x) != 0]


def cokernel_structure(A: list[list[int]], n: int) -> tuple[list[int], int]:
    """Z^n / rowspan(A) as (torsion invariants > 1, free rank)."""
    inv = smith_invariants(A) if A else []
    return [d for d in inv if d > 1], n - len(inv)
