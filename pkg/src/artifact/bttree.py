"""The Bruhat-Tits tree of PGL_2(Q_p).

A vertex is the homothety class of the lattice spanned by the columns of
[[p^n, m], [0, 1]], stored as (n, m) with m in Z[1/p] reduced to [0, p^n).
The edge e = (s, t) corresponds to the compact open U_e of ends lying on the
source side of e, so that e_* = (v_*, v_hat_*) gives U_{e_*} = Z_p.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .errors import ParseError, ResourceLimit
from .padic import vp

Matrix = tuple  # ((a, b), (c, d)) with Fraction entries

COVER_LIMIT = 3_000_000


def pmod(x, p: int, n: int) -> Fraction:
    """Canonical representative in Z[1/p] ∩ [0, p^n) of x modulo p^n Z_p."""
    x = Fraction(x)
    if x == 0:
        return Fraction(0)
    s = vp(x, p)
    if s >= n:
        return Fraction(0)
    u = x / Fraction(p) ** s
    k = n - s
    mod = p**k
    r = u.numerator * pow(u.denominator, -1, mod) % mod
    return Fraction(r) * Fraction(p) ** s


def _ivp(x: int, p: int) -> int:
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def _pmod_ratio(a: int, b: int, p: int, n: int) -> Fraction:
    """pmod(a/b, p, n) for integers a, b != 0."""
    if a == 0:
        return Fraction(0)
    al, be = 0, 0
    while a % p == 0:
        a //= p
        al += 1
    while b % p == 0:
        b //= p
        be += 1
    s = al - be
    if s >= n:
        return Fraction(0)
    mod = p ** (n - s)
    r = a * pow(b, -1, mod) % mod
    return Fraction(r * p**s) if s >= 0 else Fraction(r, p ** (-s))


def int_matrix(g) -> tuple:
    """A scalar multiple of g with integer entries."""
    (a, b), (c, d) = g
    if all(type(x) is int for x in (a, b, c, d)):
        return ((a, b), (c, d))
    fr = [Fraction(x) for x in (a, b, c, d)]
    den = math.lcm(*(f.denominator for f in fr))
    a, b, c, d = (int(f * den) for f in fr)
    return ((a, b), (c, d))


def mat(a, b, c, d) -> Matrix:
    return ((Fraction(a), Fraction(b)), (Fraction(c), Fraction(d)))


def mat_mul(g: Matrix, h: Matrix) -> Matrix:
    (a, b), (c, d) = g
    (e, f), (k, l) = h
    return ((a * e + b * k, a * f + b * l), (c * e + d * k, c * f + d * l))


def mat_det(g: Matrix):
    return g[0][0] * g[1][1] - g[0][1] * g[1][0]


def mat_inv(g: Matrix) -> Matrix:
    (a, b), (c, d) = g
    det = a * d - b * c
    return ((d / det, -b / det), (-c / det, a / det))


IDENTITY = mat(1, 0, 0, 1)


@dataclass(frozen=True, order=True)
class TreeVertex:
    p: int
    n: int
    m: Fraction

    @classmethod
    def make(cls, p: int, n: int, m) -> "TreeVertex":
        return cls(p, n, pmod(m, p, n))

    @classmethod
    def root(cls, p: int) -> "TreeVertex":
        return cls(p, 0, Fraction(0))

    @classmethod
    def root_hat(cls, p: int) -> "TreeVertex":
        return cls(p, -1, Fraction(0))

    def distance(self) -> int:
        k0 = min(self.n, 0)
        if self.m != 0:
            k0 = min(k0, vp(self.m, self.p))
        return self.n - 2 * k0

    @property
    def parity(self) -> int:
        return self.n % 2

    @property
    def is_even(self) -> bool:
        return self.n % 2 == 0

    def neighbors(self) -> list["TreeVertex"]:
        p, n, m = self.p, self.n, self.m
        out = [TreeVertex.make(p, n + 1, m + k * Fraction(p) ** n) for k in range(p)]
        out.append(TreeVertex.make(p, n - 1, m))
        return out

    def parent(self) -> "TreeVertex":
        if self.m == 0 and self.n <= 0:
            if self.n == 0:
                raise ValueError("v_* has no parent")
            return TreeVertex(self.p, self.n + 1, Fraction(0))
        return TreeVertex(self.p, self.n - 1, pmod(self.m, self.p, self.n - 1))

    def children(self) -> list["TreeVertex"]:
        d = self.distance()
        return [w for w in self.neighbors() if w.distance() == d + 1]

    def act(self, g: Matrix) -> "TreeVertex":
        return self.act_int(int_matrix(g))

    def act_int(self, G) -> "TreeVertex":
        """Action of an integral matrix G (a scalar multiple of g acts identically)."""
        p, n = self.p, self.n
        M, P = self.m.numerator, self.m.denominator
        s = _ivp(P, p) if P != 1 else 0
        k = max(0, -n, s)
        # lattice p^k·L has integral columns (p^(n+k), 0) and (M p^(k-s), p^k)
        c1 = p ** (n + k)
        c2a, c2b = M * p ** (k - s), p**k
        (a, b), (c, d) = G
        u1, u2 = a * c1, c * c1
        v1, v2 = a * c2a + b * c2b, c * c2a + d * c2b
        if v2 == 0 or (u2 != 0 and _ivp(u2, p) < _ivp(v2, p)):
            u1, u2, v1, v2 = v1, v2, u1, u2
        det = u1 * v2 - u2 * v1
        if det == 0:
            raise ValueError("singular matrix")
        n_new = _ivp(det, p) - 2 * _ivp(v2, p)
        return TreeVertex(p, n_new, _pmod_ratio(v1, v2, p, n_new))

    def literal(self) -> str:
        return f"[v:({self.n},{self.m})]"

    def __str__(self):
        return self.literal()


@dataclass(frozen=True, order=True)
class Ball:
    """center + p^r Z_p (complement=False) or its complement in P^1(Q_p)."""

    p: int
    center: Fraction
    r: int
    complement: bool = False

    @classmethod
    def make(cls, p: int, center, r: int, complement: bool = False) -> "Ball":
        return cls(p, pmod(center, p, r), r, complement)

    def contains_point(self, x) -> bool:
        """x is a Fraction (or int) or None for the point at infinity."""
        if x is None:
            return self.complement
        diff = Fraction(x) - self.center
        inside = diff == 0 or vp(diff, self.p) >= self.r
        return inside != self.complement

    def sample_point(self):
        return None if self.complement else self.center

    def _core(self) -> "Ball":
        return Ball(self.p, self.center, self.r, False)

    def contains(self, other: "Ball") -> bool:
        if not self.complement and not other.complement:
            return other.r >= self.r and pmod(other.center - self.center, self.p, self.r) == 0
        if self.complement and not other.complement:
            return self._core().disjoint(other)
        if self.complement and other.complement:
            return other._core().contains(self._core())
        return False

    def disjoint(self, other: "Ball") -> bool:
        if not self.complement and not other.complement:
            return not (self.contains(other) or other.contains(self))
        if self.complement and other.complement:
            return False
        a, b = (self, other) if other.complement else (other, self)
        return b._core().contains(a)

    def complement_ball(self) -> "Ball":
        return Ball(self.p, self.center, self.r, not self.complement)

    def literal(self) -> str:
        core = f"{self.center} + O({self.p}^{self.r})"
        return f"!({core})" if self.complement else core

    def __str__(self):
        return self.literal()

    @classmethod
    def parse(cls, p: int, text: str) -> "Ball":
        text = text.strip()
        comp = text.startswith("!(")
        if comp:
            text = text[2:-1]
        mm = re.fullmatch(r"(-?\d+(?:/\d+)?) \+ O\((\d+)\^(-?\d+)\)", text)
        if not mm or int(mm.group(2)) != p:
            raise ParseError(f"bad ball literal {text!r}")
        return cls.make(p, Fraction(mm.group(1)), int(mm.group(3)), comp)


def shadow(v: TreeVertex) -> Ball:
    """Ends of the tree whose ray from v_* passes through v (v != v_*)."""
    if v.m == 0 and v.n < 0:
        return Ball(v.p, Fraction(0), v.n + 1, True)
    return Ball(v.p, v.m, v.n, False)


@dataclass(frozen=True, order=True)
class TreeEdge:
    source: TreeVertex
    target: TreeVertex

    @property
    def p(self) -> int:
        return self.source.p

    @classmethod
    def e_star(cls, p: int) -> "TreeEdge":
        return cls(TreeVertex.root(p), TreeVertex.root_hat(p))

    def reverse(self) -> "TreeEdge":
        return TreeEdge(self.target, self.source)

    @property
    def is_even(self) -> bool:
        return self.source.is_even

    @property
    def parity(self) -> int:
        return self.source.parity

    def points_inward(self) -> bool:
        """True when the target is closer to v_* than the source."""
        return self.target.distance() < self.source.distance()

    def distance(self) -> int:
        """Distance of the far endpoint from v_*."""
        return max(self.source.distance(), self.target.distance())

    def act(self, g: Matrix) -> "TreeEdge":
        G = int_matrix(g)
        return TreeEdge(self.source.act_int(G), self.target.act_int(G))

    def literal(self) -> str:
        return f"{self.source.literal()}->{self.target.literal()}"

    def __str__(self):
        return self.literal()

    @classmethod
    def parse(cls, p: int, text: str) -> "TreeEdge":
        mm = re.fullmatch(r"\s*\[v:\((-?\d+),(-?\d+(?:/\d+)?)\)\]->\[v:\((-?\d+),(-?\d+(?:/\d+)?)\)\]\s*", text)
        if not mm:
            raise ParseError(f"bad edge literal {text!r}")
        s = TreeVertex.make(p, int(mm.group(1)), Fraction(mm.group(2)))
        t = TreeVertex.make(p, int(mm.group(3)), Fraction(mm.group(4)))
        if t not in s.neighbors():
            raise ParseError("edge endpoints are not adjacent")
        return cls(s, t)

    def edges_out_of_target(self) -> list["TreeEdge"]:
        """Edges leaving the target other than the reverse of self."""
        return [TreeEdge(self.target, w) for w in self.target.neighbors() if w != self.source]


def edges_out(v: TreeVertex) -> list[TreeEdge]:
    return [TreeEdge(v, w) for w in v.neighbors()]


def edge_to_ball(e: TreeEdge) -> Ball:
    if e.points_inward():
        return shadow(e.source)
    return shadow(e.target).complement_ball()


def ball_to_edge(b: Ball) -> TreeEdge:
    p = b.p
    core = b._core()
    if not (core.center == 0 and core.r <= 0):
        w = TreeVertex.make(p, core.r, core.center)
        e = TreeEdge(w, w.parent())
    else:
        w = TreeVertex(p, core.r - 1, Fraction(0))
        e = TreeEdge(w.parent(), w)
    return e.reverse() if b.complement else e


def act_ball(g: Matrix, b: Ball) -> Ball:
    return edge_to_ball(ball_to_edge(b).act(g))


def act_point(g: Matrix, x):
    """Moebius action on P^1(Q) (None is infinity)."""
    (a, b), (c, d) = g
    if x is None:
        return None if c == 0 else a / c
    x = Fraction(x)
    den = c * x + d
    if den == 0:
        return None
    return (a * x + b) / den


# ---------------------------------------------------------------------------
# depth-n covers, indexed by P^1(Z/p^n)


def cover_size(p: int, n: int) -> int:
    return (p + 1) * p ** (n - 1)


@lru_cache(maxsize=None)
def _index_vertex(p: int, n: int, k: int) -> TreeVertex:
    P = p**n
    if k < P:
        return TreeVertex.make(p, n, k)
    w = k - P
    if w == 0:
        return TreeVertex(p, -n, Fraction(0))
    b = p * w
    v = vp(b, p)
    return TreeVertex.make(p, n - 2 * v, Fraction(1, b))


def cover_edge(p: int, n: int, k: int) -> TreeEdge:
    """The k-th edge of cover(n): affine balls k + p^n Z_p first, then the infinity side."""
    s = _index_vertex(p, n, k)
    return TreeEdge(s, s.parent())


def cover(p: int, n: int, limit: int = COVER_LIMIT) -> list[TreeEdge]:
    if n < 1:
        raise ValueError("depth must be positive")
    size = cover_size(p, n)
    if size > limit:
        raise ResourceLimit(f"cover of size {size} exceeds {limit}")
    return [cover_edge(p, n, k) for k in range(size)]


def point_index(p: int, n: int, x) -> int:
    """Index of the depth-n cover ball containing x (Fraction or None for infinity)."""
    P = p**n
    if x is None:
        return P
    x = Fraction(x)
    if x == 0 or vp(x, p) >= 0:
        return int(pmod(x, p, n))
    y = 1 / x
    return P + int(pmod(y, p, n)) // p


def edge_index(e: TreeEdge) -> int:
    """Index of an inward edge at distance n within cover(n)."""
    p, n = e.p, e.source.distance()
    return point_index(p, n, edge_to_ball(e).sample_point())
