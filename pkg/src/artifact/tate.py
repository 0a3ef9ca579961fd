"""Tate curves, period lattices and the logarithm log_A at dimension one.

E_q : y² + xy = x³ + a4(q) x + a6(q) with the classical q-series, the
analytic map u ↦ (X(u, q), Y(u, q)), the q-killing logarithm, homothety of
period lattices and the isogeny u ↦ Φ(uⁿ).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import intlin
from .errors import DivisionByZero, ExpOutOfRange, PrecisionExhausted
from .padic import PAdicScalar, QuadFieldElement, exp_p, is_quadratic_residue, iwasawa_log, vec_log_units


def _sigma(k: int, n: int) -> int:
    return sum(d**k for d in range(1, n + 1) if n % d == 0)


def default_nonresidue(p: int) -> int:
    return next(x for x in range(2, 4 * p) if not is_quadratic_residue(x, p))


def as_kp(x, d: int, prec: int | None = None) -> QuadFieldElement:
    """Coerce a PAdicScalar, rational or K_p element into K_p = Q_p(sqrt d)."""
    if isinstance(x, QuadFieldElement):
        return x
    if isinstance(x, PAdicScalar):
        return QuadFieldElement.from_pair(x, 0, x.p, d, x.prec)
    raise TypeError("expected a p-adic element")


def _ord(x) -> int:
    if x.valuation is None:
        raise DivisionByZero("valuation of zero")
    return x.valuation


Point = tuple | None  # affine (x, y); None is the identity


@dataclass
class TateCurve:
    """Split multiplicative curve with Tate period q over Q_p, points over K_p."""

    p: int
    q: PAdicScalar
    N: int
    d: int | None = None

    def __post_init__(self):
        if self.q.valuation is None or self.q.valuation < 1:
            raise ValueError("Tate period must have positive valuation")
        if self.d is None:
            self.d = default_nonresidue(self.p)
        self.terms = self.N // self.q.valuation + 2  # q-adic truncation order
        self.kappa = 0

    @cached_property
    def qk(self) -> QuadFieldElement:
        return as_kp(self.q, self.d).with_prec(min(self.q.prec, self.N + 2 * self.q.valuation))

    def _series(self, coeffs) -> QuadFieldElement:
        out = QuadFieldElement.zero(self.p, self.d, self.N)
        qn = QuadFieldElement.one(self.p, self.d, self.N + 2 * self.q.valuation)
        for m in range(1, self.terms + 1):
            qn = qn * self.qk
            c = coeffs(m)
            if c:
                out = out + qn * c
        return out

    @cached_property
    def s1(self):
        return self._series(lambda m: _sigma(1, m))

    @cached_property
    def a4(self):
        return self._series(lambda m: -5 * _sigma(3, m))

    @cached_property
    def a6(self):
        return self._series(lambda m: -(5 * _sigma(3, m) + 7 * _sigma(5, m)) // 12)

    @cached_property
    def discriminant(self) -> QuadFieldElement:
        b2, b4, b6 = 1, self.a4 * 2, self.a6 * 4
        b8 = self.a6 - self.a4 * self.a4
        return -(b8) - (b4 * b4 * b4) * 8 - (b6 * b6) * 27 + b4 * b6 * 9 * b2

    @cached_property
    def j(self) -> QuadFieldElement:
        c4 = 1 - self.a4 * 48
        return c4 * c4 * c4 / self.discriminant

    # analytic map ---------------------------------------------------------------
    def _normalize(self, u: QuadFieldElement) -> QuadFieldElement:
        k = _ord(u) // self.q.valuation
        return u * self.qk ** (-k) if k else u

    def point(self, u) -> Point:
        """Φ_Tate(u) as an affine point, or None for the identity."""
        u = self._normalize(as_kp(u, self.d))
        one = QuadFieldElement.one(self.p, self.d, self.N)
        if (u - one).is_zero():
            return None
        X = self.s1 * (-2)
        Y = self.s1

        def xterm(v):
            return v / ((one - v) * (one - v))

        def yterm(v):
            return (v * v) / ((one - v) * (one - v) * (one - v))

        X = X + xterm(u)
        Y = Y + yterm(u)
        qn = QuadFieldElement.one(self.p, self.d, self.N + 2 * self.q.valuation)
        uinv = u.inverse()
        for _ in range(1, self.terms + 1):
            qn = qn * self.qk
            v, w = qn * u, qn * uinv
            X = X + xterm(v) + xterm(w)
            Y = Y + yterm(v) - w / ((one - w) * (one - w) * (one - w))
        prec = min(X.prec, Y.prec)
        self.kappa = max(self.kappa, self.N - prec)
        return (X, Y)

    def residual(self, P: Point) -> float:
        """Valuation of y² + xy - x³ - a4 x - a6 at P."""
        if P is None:
            return float("inf")
        x, y = P
        r = y * y + x * y - x * x * x - self.a4 * x - self.a6
        return float("inf") if r.is_zero() else r.valuation

    # group law --------------------------------------------------------------------
    def _is_zero(self, x: QuadFieldElement, slack: int = 0) -> bool:
        return x.is_zero() or x.valuation >= self.N - self.kappa - slack

    def neg(self, P: Point) -> Point:
        if P is None:
            return None
        x, y = P
        return (x, -y - x)

    def add(self, P: Point, Q: Point) -> Point:
        if P is None:
            return Q
        if Q is None:
            return P
        (x1, y1), (x2, y2) = P, Q
        if self._is_zero(x1 - x2):
            if self._is_zero(y1 + y2 + x2):
                return None
            lam = (x1 * x1 * 3 + self.a4 - y1) / (y1 * 2 + x1)
        else:
            lam = (y2 - y1) / (x2 - x1)
        nu = y1 - lam * x1
        x3 = lam * lam + lam - x1 - x2
        y3 = -(lam + 1) * x3 - nu
        return (x3, y3)

    def mul(self, k: int, P: Point) -> Point:
        if k < 0:
            return self.mul(-k, self.neg(P))
        out, base = None, P
        while k:
            if k & 1:
                out = self.add(out, base)
            base = self.add(base, base)
            k >>= 1
        return out

    # formal group ------------------------------------------------------------
    def formal_log(self, P: Point, terms: int | None = None) -> QuadFieldElement:
        """Formal-group logarithm at P, for P reducing to the identity."""
        if P is None:
            return QuadFieldElement.zero(self.p, self.d, self.N)
        x, y = P
        z = -(x / y)
        if z.is_zero() or z.valuation < 1:
            raise PrecisionExhausted("point does not lie in the formal group")
        K = terms or (self.N + 4) * 2
        coeffs = _invariant_differential(self.a4, self.a6, K, self.p, self.N + 8)
        out = QuadFieldElement.zero(self.p, self.d, self.N)
        zk = QuadFieldElement.one(self.p, self.d, z.prec)
        for k, c in enumerate(coeffs):
            zk = zk * z
            if c:
                out = out + zk * Fraction(c, k + 1)
        return out


def _ps_mul(a, b, K, mod):
    out = [0] * K
    for i, x in enumerate(a):
        if x:
            for j in range(K - i):
                out[i + j] = (out[i + j] + x * b[j]) % mod
    return out


def _invariant_differential(a4: QuadFieldElement, a6: QuadFieldElement, K: int, p: int, M: int) -> list[int]:
    """Coefficients c_k with ω = Σ c_k z^k dz for y² + xy = x³ + a4 x + a6 (a4, a6 in Z_p)."""
    mod = p**M
    A4, _ = a4.residues(min(M, a4.prec)) if not a4.is_zero() else (0, 0)
    A6, _ = a6.residues(min(M, a6.prec)) if not a6.is_zero() else (0, 0)
    L = K + 6
    # w(z) = z³ + z w + A4 z w² + A6 w³
    w = [0] * L
    for _ in range(L):
        w2 = _ps_mul(w, w, L, mod)
        w3 = _ps_mul(w2, w, L, mod)
        new = [0] * L
        new[3] = 1
        for i in range(L - 1):
            new[i + 1] = (new[i + 1] + w[i] + A4 * w2[i]) % mod
        for i in range(L):
            new[i] = (new[i] + A6 * w3[i]) % mod
        if new == w:
            break
        w = new
    # w = z³ (1 + h);  x = z/w = z^{-2} (1+h)^{-1}, y = -1/w = -z^{-3}(1+h)^{-1}
    h = w[3:] + [0, 0, 0]
    inv = [0] * L
    inv[0] = 1
    for k in range(1, L):
        inv[k] = -sum(h[i] * inv[k - i] for i in range(1, k + 1)) % mod
    # ω = dx / (2y + x) with x = z^{-2} I(z), y = -z^{-3} I(z)
    # dx/dz = z^{-3}(z I' - 2 I);  2y + x = z^{-3}(z I - 2 I) -> ω = (z I' - 2 I)/((z - 2) I) dz
    dI = [(k + 1) * inv[k + 1] for k in range(L - 1)] + [0]
    num = [(-2 * inv[k] + (dI[k - 1] if k else 0)) % mod for k in range(L)]
    den = _ps_mul([-2, 1] + [0] * (L - 2), inv, L, mod)
    den_inv = [0] * L
    d0inv = pow(den[0], -1, mod)
    den_inv[0] = d0inv
    for k in range(1, L):
        den_inv[k] = -d0inv * sum(den[i] * den_inv[k - i] for i in range(1, k + 1)) % mod
    om = _ps_mul(num, den_inv, L, mod)
    return [(c if c <= mod // 2 else c - mod) for c in om[:K]]


# ---------------------------------------------------------------------------
# logarithms


def log_q(E: TateCurve, u) -> QuadFieldElement:
    """iwasawa_log(u) - (ord u / ord q) iwasawa_log(q); kills q exactly."""
    u = as_kp(u, E.d)
    lu = iwasawa_log(u)
    k = Fraction(_ord(u), E.q.valuation)
    if k == 0:
        return lu
    return lu - iwasawa_log(as_kp(E.q, E.d)) * k


def branch_log(u, L) -> QuadFieldElement:
    """Another branch: iwasawa_log(u) + L · ord(u)."""
    return iwasawa_log(u) + L * _ord(u)


def tate_psi(E: TateCurve, n: int = 1):
    """Ψ_A = log_q(·ⁿ) restricted to units (array form for darmon_integral)."""

    def psi(a, b, p, d, m):
        la, lb = vec_log_units(a, b, p, d, m)
        mod = p**m
        return np.asarray(la, dtype=object) * n % mod, np.asarray(lb, dtype=object) * n % mod

    return psi


def scalar_psi(fn):
    """Array Ψ from a scalar function on K_p^× (slow path, any branch)."""

    def psi(a, b, p, d, m):
        outa, outb = [], []
        for x, y in zip(a, b):
            r = fn(QuadFieldElement.make(p, d, int(x), int(y), 0, m))
            ra, rb = r.residues(m) if not r.is_zero() else (0, 0)
            outa.append(ra)
            outb.append(rb)
        return np.array(outa, dtype=object), np.array(outb, dtype=object)

    return psi


# ---------------------------------------------------------------------------
# period lattices


@dataclass
class PeriodLattice:
    """Lattice in (K_p^×)^d spanned by the rows of gens (d vectors of length d)."""

    gens: list

    @property
    def rank(self) -> int:
        return len(self.gens)

    def valuations(self) -> list[list[int]]:
        return [[_ord(x) for x in row] for row in self.gens]

    def is_discrete(self) -> bool:
        V = self.valuations()
        return len(intlin.smith_invariants(V)) == self.rank


@dataclass
class NotHomothetic:
    reason: str

    def __bool__(self):
        return False


def _unit_part(x):
    x = as_kp(x, default_nonresidue(x.p)) if isinstance(x, PAdicScalar) else x
    return QuadFieldElement(x.p, x.d, 0, x.a, x.b, x.rel_prec)


def _torsion_order(w: QuadFieldElement, prec: int) -> int | None:
    p = w.p
    one = QuadFieldElement.one(p, w.d, prec)
    for k in range(1, p * p):
        if (p * p - 1) % k == 0 and (w**k).equals(one, prec):
            return k
    return None


def homothety_index(L1: PeriodLattice, L2: PeriodLattice, prec: int | None = None):
    """([L1 : L1∩L2], [L2 : L1∩L2]) or NotHomothetic."""
    if L1.rank != L2.rank:
        return NotHomothetic("ranks differ")
    if not (L1.is_discrete() and L2.is_discrete()):
        return NotHomothetic("a lattice is not discrete")
    d = L1.rank
    V1, V2 = L1.valuations(), L2.valuations()
    ker = intlin.left_kernel(V1 + [[-x for x in row] for row in V2])
    if len(ker) != d:
        return NotHomothetic("valuation lattices are not commensurable")
    A = [row[:d] for row in ker]
    B = [row[d:] for row in ker]
    det1 = abs(int(np.round(float(_det(V1)))))
    det2 = abs(int(np.round(float(_det(V2)))))
    C = intlin.matmul(A, V1)
    detC = abs(_det(C))
    order = 1
    for a, b in zip(A, B):
        x1 = _power_product(L1.gens, a)
        x2 = _power_product(L2.gens, b)
        for u1, u2 in zip(x1, x2):
            w = _unit_part(u1) / _unit_part(u2)
            k = _torsion_order(w, prec or min(w.prec, 6))
            if k is None:
                return NotHomothetic("unit parts are not torsion-compatible")
            order = _lcm(order, k)
    return (int(detC // det1) * order, int(detC // det2) * order)


def _lcm(a, b):
    from math import gcd

    return a * b // gcd(a, b)


def _det(M) -> int:
    import sympy

    return int(sympy.Matrix(M).det())


def _power_product(gens, exps):
    d = len(gens[0])
    out = [None] * d
    for g, e in zip(gens, exps):
        for j in range(d):
            term = g[j] ** e
            out[j] = term if out[j] is None else out[j] * term
    return out


# ---------------------------------------------------------------------------
# the isogeny and points on A


def phi_A(E: TateCurve, u, n: int) -> Point:
    """u ↦ Φ_Tate(uⁿ)."""
    return E.point(as_kp(u, E.d) ** n)


@dataclass
class APoint:
    log: list
    point: Point | None = None
    note: str = ""
    extra: dict = field(default_factory=dict)


def darmon_point_on_A(result, E: TateCurve, n: int = 1, f: int = 1, exponentiate: bool = True) -> APoint:
    """log_A(f P) = f · value; the point itself when exp converges."""
    logs = [v * f for v in result.value]
    out = APoint(logs)
    if not exponentiate:
        return out
    try:
        v = logs[0]
        if not v.is_zero() and v.valuation < 1:
            raise ExpOutOfRange(f"valuation {v.valuation} is below the convergence bound 1")
        u = exp_p(v.with_prec(min(v.prec, E.N)))
        out.point = E.point(u)
    except ExpOutOfRange as exc:
        out.note = str(exc)
    return out
