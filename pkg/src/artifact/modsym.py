"""Weight-two modular symbols for Γ_0(N), N prime, via Manin symbols.

Used as the abelianization oracle of the split fixture: an element γ of
Γ_0(N) maps to the class of the path {0, γ0} in the plus (or minus) quotient
of integral cuspidal homology.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

from . import intlin


def _normalize(c: int, d: int, N: int) -> int:
    c, d = c % N, d % N
    if c:
        return d * pow(c, -1, N) % N
    if not d:
        raise ValueError("(0:0) is not a point of P^1")
    return N


def convergents(x: Fraction) -> list[tuple[int, int]]:
    """Continued-fraction convergents (p_j, q_j), j >= 0, of a rational."""
    x = Fraction(x)
    a, b = x.numerator, x.denominator
    out = []
    p0, q0, p1, q1 = 0, 1, 1, 0
    while b:
        k = a // b
        p0, q0, p1, q1 = p1, q1, k * p1 + p0, k * q1 + q0
        out.append((p1, q1))
        a, b = b, a - k * b
    return out


@dataclass
class ManinSpace:
    N: int

    @property
    def size(self) -> int:
        return self.N + 1

    def index(self, c: int, d: int) -> int:
        return _normalize(c, d, self.N)

    def symbol(self, k: int) -> tuple[int, int]:
        return (1, k) if k < self.N else (0, 1)

    @cached_property
    def relations(self) -> list[list[int]]:
        N, rows = self.N, []
        for k in range(self.size):
            c, d = self.symbol(k)
            r = [0] * self.size
            r[k] += 1
            r[self.index(d, -c)] += 1
            rows.append(r)
            r = [0] * self.size
            for cc, dd in ((c, d), (d, -c - d), (-c - d, c)):
                r[self.index(cc, dd)] += 1
            rows.append(r)
        return rows

    @cached_property
    def functionals(self) -> list[list[int]]:
        """Rows F with F·x the coordinates of x in the free part of the quotient."""
        return intlin.right_kernel(self.relations)

    @cached_property
    def boundary(self) -> list[list[int]]:
        """2 × k matrix (cusps ∞, 0) in functional coordinates."""
        raw = [[0] * self.size for _ in range(2)]
        for k in range(self.size):
            c, d = self.symbol(k)
            raw[0 if c % self.N == 0 else 1][k] += 1
            raw[0 if d % self.N == 0 else 1][k] -= 1
        return intlin.as_int(intlin.solve_left(self.functionals, raw))

    @cached_property
    def cuspidal(self) -> list[list[int]]:
        """Columns (stored as rows) spanning the integral cuspidal lattice."""
        return intlin.right_kernel(self.boundary)

    def _on_free(self, perm_or_mat) -> list[list[int]]:
        F = self.functionals
        G = intlin.matmul(F, perm_or_mat)
        return intlin.as_int(intlin.solve_left(F, G))

    @cached_property
    def star_full(self) -> list[list[int]]:
        M = [[0] * self.size for _ in range(self.size)]
        for k in range(self.size):
            c, d = self.symbol(k)
            M[self.index(c, -d)][k] += 1
        return M

    def heilbronn(self, ell: int) -> list[tuple[int, int, int, int]]:
        return _heilbronn(ell)

    def hecke_full(self, ell: int) -> list[list[int]]:
        """T_ell on Manin symbols; column k is the image of symbol k."""
        M = [[0] * self.size for _ in range(self.size)]
        for k in range(self.size):
            c, d = self.symbol(k)
            for a, b, cc, dd in _heilbronn(ell):
                u, v = c * a + d * cc, c * b + d * dd
                if u % self.N == 0 and v % self.N == 0:
                    continue
                M[self.index(u, v)][k] += 1
        return M

    def path_vector(self, alpha, beta) -> list[int]:
        """Manin-symbol vector of {alpha, beta}; None stands for ∞."""
        v = [0] * self.size
        for x, sgn in ((beta, 1), (alpha, -1)):
            if x is None:
                continue
            prev_q = 0
            for j, (_, q) in enumerate(convergents(Fraction(x))):
                v[self.index(q, (-1) ** (j - 1) * prev_q if j else -prev_q)] += sgn
                prev_q = q
        return v


@lru_cache(maxsize=None)
def _heilbronn(ell: int) -> tuple:
    out = []
    for a in range(1, ell + 1):
        for d in range(1, ell + 1):
            for b in range(0, a):
                rem = a * d - ell
                if rem < 0:
                    continue
                if b == 0:
                    if rem == 0:
                        out.extend((a, 0, c, d) for c in range(0, d))
                    continue
                if rem % b == 0:
                    c = rem // b
                    if 0 <= c < d:
                        out.append((a, b, c, d))
    return tuple(out)


class ManinOracle:
    """Γ_0(N) → ℍ, the ±-quotient of integral cuspidal homology."""

    def __init__(self, N: int, sign: int = 1):
        self.space = ManinSpace(N)
        self.sign = sign
        sp = self.space
        C = sp.cuspidal  # rows = basis vectors in functional coordinates
        self._C = C
        star_c = intlin.as_int(intlin.solve_left(C, intlin.matmul(C, intlin.transpose(self._star_free()))))
        # star_c acts on row-coordinates: x ↦ x·star_c
        A = [[star_c[i][j] - sign * int(i == j) for i in range(len(C))] for j in range(len(C))]
        # functionals y (in cusp coordinates) with y∘star = sign·y
        self._Y = intlin.right_kernel([list(r) for r in zip(*A)]) if A else []
        self._star_c = star_c

    def _star_free(self):
        return self.space._on_free(self.space.star_full)

    @property
    def rank(self) -> int:
        return len(self._Y)

    @cached_property
    def _projector(self) -> tuple[list[list[int]], int]:
        """Integer matrix L and denominator q with ℍ-coordinates = L·v / q on cuspidal vectors."""
        import sympy

        C = sympy.Matrix(self._C)
        P = C.T * (C * C.T).inv()
        L = sympy.Matrix(self._Y) * P.T * sympy.Matrix(self.space.functionals)
        q = int(sympy.ilcm(*[x.q for x in L])) if L else 1
        return [[int(x * q) for x in L.row(i)] for i in range(L.rows)], q

    def _project(self, v_full: list[int]) -> tuple:
        L, q = self._projector
        out = []
        for row in L:
            s = sum(a * x for a, x in zip(row, v_full))
            if s % q:
                raise ValueError("path is not cuspidal")
            out.append(s // q)
        return tuple(out)

    def image(self, g) -> tuple:
        """Class of γ = [[a,b],[c,d]] ∈ Γ_0(N) in ℍ."""
        (a, b), (c, d) = [[Fraction(x) for x in row] for row in g]
        if c % self.space.N != 0 or a * d - b * c != 1:
            raise ValueError("matrix is not in Γ_0(N)")
        return self._project(self.space.path_vector(Fraction(0), b / d))

    def path_image(self, alpha, beta) -> tuple:
        return self._project(self.space.path_vector(alpha, beta))

    @lru_cache(maxsize=None)
    def hecke(self, ell: int) -> tuple:
        """Matrix of T_ell on ℍ acting on coordinate columns."""
        sp = self.space
        T_free = sp._on_free(sp.hecke_full(ell))
        Ct = intlin.transpose(self._C)
        T_c = intlin.as_int(intlin.solve_left(self._C, intlin.transpose(intlin.matmul(T_free, Ct))))
        # ℍ coordinates of a cusp vector x are Y·x; T on ℍ satisfies Y·T_c^t = T_H·Y
        TY = intlin.matmul(self._Y, intlin.transpose(T_c))
        T_H = intlin.as_int(intlin.solve_left(self._Y, TY)) if self._Y else []
        return tuple(tuple(r) for r in T_H)

    def hecke_on_path(self, ell: int, alpha, beta) -> tuple:
        """T_ell{α, β} via the coset representatives [[1,k],[0,ell]] and [[ell,0],[0,1]]."""
        def move(x, a, b, d):
            return None if x is None else (a * Fraction(x) + b) / d

        total = [0] * self.space.size
        reps = [(1, k, ell) for k in range(ell)]
        if self.space.N % ell:
            reps.append((ell, 0, 1))
        for a, b, d in reps:
            v = self.space.path_vector(move(alpha, a, b, d), move(beta, a, b, d))
            total = [x + y for x, y in zip(total, v)]
        return self._project(total)
