"""Fixed-precision arithmetic in Q_p and in the unramified quadratic extension K_p.

Elements carry an absolute precision N (known modulo p^N).  Precision
propagates pessimistically: sums keep the smaller precision, products and
inverses keep the smaller relative precision.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DivisionByZero, ParseError, PrecisionExhausted, RamifiedRoot


def vp(x, p: int) -> int | None:
    """p-adic valuation of a nonzero integer or Fraction (None for zero)."""
    if x == 0:
        return None
    if isinstance(x, Fraction):
        return vp(x.numerator, p) - vp(x.denominator, p)
    x = abs(int(x))
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def rational_to_residue(x, p: int, k: int) -> int:
    """Reduce a p-integral rational modulo p^k."""
    x = Fraction(x)
    mod = p**k
    if x.denominator % p == 0:
        raise ValueError(f"{x} is not {p}-integral")
    return x.numerator * pow(x.denominator, -1, mod) % mod


def is_quadratic_residue(a: int, p: int) -> bool:
    a %= p
    return a != 0 and pow(a, (p - 1) // 2, p) == 1


def _sqrt_mod_pk(a: int, p: int, k: int) -> int:
    """Square root of a unit quadratic residue modulo p^k by Hensel lifting."""
    if not is_quadratic_residue(a, p):
        raise ValueError("not a quadratic residue")
    r = next(x for x in range(1, p) if x * x % p == a % p)
    mod = p
    for _ in range(1, k):
        mod *= p
        r = (r - (r * r - a) * pow(2 * r, -1, mod)) % mod
    return r % p**k


def _log_terms(p: int, m: int) -> tuple[int, int]:
    """Series length K and guard digits E for log(1+x), v(x) >= 1, modulo p^m."""
    K = 1
    while True:
        if all(k - int(math.log(k, p) + 1e-9) >= m for k in range(K + 1, K + 4 * p + 2)):
            break
        K += 1
    E = int(math.log(max(K, 1), p) + 1e-9) + 1
    return K, E


# ---------------------------------------------------------------------------
# Q_p


@dataclass(frozen=True)
class PAdicScalar:
    p: int
    valuation: int | None
    unit: int
    prec: int

    def __post_init__(self):
        if self.valuation is None:
            if self.unit != 0:
                raise ValueError("zero marker must have unit 0")
            return
        rel = self.prec - self.valuation
        if rel <= 0:
            raise PrecisionExhausted("no significant digits")
        if self.unit % self.p == 0 or not 0 <= self.unit < self.p**rel:
            raise ValueError("non-canonical unit part")

    # construction -------------------------------------------------------
    @classmethod
    def make(cls, p: int, value: int, shift: int, prec: int) -> "PAdicScalar":
        """The element p^shift * value known modulo p^prec."""
        if value == 0 or shift >= prec:
            return cls(p, None, 0, prec)
        v = vp(value, p)
        if shift + v >= prec:
            return cls(p, None, 0, prec)
        v_total = shift + v
        unit = (value // p**v) % p ** (prec - v_total)
        return cls(p, v_total, unit, prec)

    @classmethod
    def from_rational(cls, x, p: int, prec: int) -> "PAdicScalar":
        x = Fraction(x)
        if x == 0:
            return cls(p, None, 0, prec)
        v = vp(x, p)
        if v >= prec:
            return cls(p, None, 0, prec)
        u = x / Fraction(p) ** v
        return cls(p, v, rational_to_residue(u, p, prec - v), prec)

    @classmethod
    def zero(cls, p: int, prec: int) -> "PAdicScalar":
        return cls(p, None, 0, prec)

    # basic queries -----------------------------------------------------------
    def is_zero(self) -> bool:
        return self.valuation is None

    @property
    def rel_prec(self) -> int:
        return 0 if self.valuation is None else self.prec - self.valuation

    def residue(self, k: int | None = None) -> int:
        """Integer representative modulo p^k (k defaults to prec); needs v >= 0."""
        k = self.prec if k is None else k
        if k > self.prec:
            raise PrecisionExhausted("residue beyond known precision")
        if self.valuation is None:
            return 0
        if self.valuation < 0:
            raise ValueError("element is not integral")
        return self.unit * self.p**self.valuation % self.p**k

    def to_fraction(self) -> Fraction:
        """Canonical rational representative p^v * unit."""
        if self.valuation is None:
            return Fraction(0)
        return Fraction(self.unit) * Fraction(self.p) ** self.valuation

    def with_prec(self, prec: int) -> "PAdicScalar":
        if prec > self.prec:
            raise PrecisionExhausted("cannot raise precision")
        if self.valuation is None:
            return PAdicScalar(self.p, None, 0, prec)
        return PAdicScalar.make(self.p, self.unit, self.valuation, prec)

    # arithmetic --------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, PAdicScalar):
            if other.p != self.p:
                raise ValueError("mismatched primes")
            return other
        if isinstance(other, (int, Fraction)):
            return PAdicScalar.from_rational(other, self.p, self.prec + max(0, vp(other, self.p) or 0) + 64)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        p, prec = self.p, min(self.prec, other.prec)
        vals = [x.valuation for x in (self, other) if x.valuation is not None]
        if not vals:
            return PAdicScalar(p, None, 0, prec)
        base = min(vals + [prec])
        tot = 0
        for x in (self, other):
            if x.valuation is not None:
                tot += x.unit * p ** (x.valuation - base)
        return PAdicScalar.make(p, tot % p ** (prec - base), base, prec)

    __radd__ = __add__

    def __neg__(self):
        if self.valuation is None:
            return self
        return PAdicScalar(self.p, self.valuation, (-self.unit) % self.p**self.rel_prec, self.prec)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        p = self.p
        if self.valuation is None or other.valuation is None:
            prec = min(
                self.prec + (other.valuation or 0) if other.valuation is not None else self.prec + other.prec,
                other.prec + (self.valuation or 0) if self.valuation is not None else self.prec + other.prec,
            )
            if self.valuation is None and other.valuation is None:
                prec = self.prec + other.prec
            return PAdicScalar(p, None, 0, prec)
        v = self.valuation + other.valuation
        rel = min(self.rel_prec, other.rel_prec)
        return PAdicScalar(p, v, self.unit * other.unit % p**rel, v + rel)

    __rmul__ = __mul__

    def inverse(self) -> "PAdicScalar":
        if self.valuation is None:
            raise DivisionByZero("inverse of zero")
        rel = self.rel_prec
        return PAdicScalar(self.p, -self.valuation, pow(self.unit, -1, self.p**rel), rel - self.valuation)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        if self.valuation is None:
            return self if k else PAdicScalar.make(self.p, 1, 0, self.prec)
        rel = self.rel_prec
        return PAdicScalar(self.p, self.valuation * k, pow(self.unit, k, self.p**rel), self.valuation * k + rel)

    def equals(self, other: "PAdicScalar", prec: int | None = None) -> bool:
        """Equality modulo p^prec (default: the common precision)."""
        d = self - other
        k = d.prec if prec is None else prec
        if k > d.prec:
            raise PrecisionExhausted("comparison beyond known precision")
        return d.valuation is None or d.valuation >= k

    def __eq__(self, other):
        if not isinstance(other, PAdicScalar):
            return NotImplemented
        return (self.p, self.valuation, self.unit, self.prec) == (other.p, other.valuation, other.unit, other.prec)

    def __hash__(self):
        return hash((self.p, self.valuation, self.unit, self.prec))

    # serialization -------------------------------------------------------
    def __str__(self):
        p = self.p
        if self.valuation is None:
            return f"0 + O({p}^{self.prec})"
        digits, u = [], self.unit
        for _ in range(self.rel_prec):
            digits.append(u % p)
            u //= p
        body = " + ".join(f"{d}" if i == 0 else (f"{d}*{p}" if i == 1 else f"{d}*{p}^{i}") for i, d in enumerate(digits))
        return f"{p}^{self.valuation} * ({body}) + O({p}^{self.prec})"

    __repr__ = __str__

    @classmethod
    def parse(cls, text: str) -> "PAdicScalar":
        text = text.strip()
        m = re.fullmatch(r"0 \+ O\((\d+)\^(-?\d+)\)", text)
        if m:
            return cls(int(m.group(1)), None, 0, int(m.group(2)))
        m = re.fullmatch(r"(\d+)\^(-?\d+) \* \((.*)\) \+ O\((\d+)\^(-?\d+)\)", text)
        if not m:
            raise ParseError(f"cannot parse p-adic scalar: {text!r}")
        p, v, body, N = int(m.group(1)), int(m.group(2)), m.group(3), int(m.group(5))
        unit = 0
        for i, term in enumerate(body.split(" + ")):
            unit += int(term.split("*")[0]) * p**i
        return cls(p, v, unit, N)


# ---------------------------------------------------------------------------
# K_p = Q_p(sqrt d)


def _qmul(a, b, c, e, d, mod):
    return (a * c + b * e * d) % mod, (a * e + b * c) % mod


def _qpow(a, b, k, d, mod):
    ra, rb = 1, 0
    while k:
        if k & 1:
            ra, rb = _qmul(ra, rb, a, b, d, mod)
        a, b = _qmul(a, b, a, b, d, mod)
        k >>= 1
    return ra, rb


@dataclass(frozen=True)
class QuadFieldElement:
    """p^v * (a + b*sqrt(d)) with (a, b) not both divisible by p, known modulo p^prec."""

    p: int
    d: int
    valuation: int | None
    a: int
    b: int
    prec: int

    def __post_init__(self):
        if is_quadratic_residue(self.d, self.p) or self.d % self.p == 0:
            raise ValueError(f"{self.d} must be a non-residue modulo {self.p}")
        if self.valuation is None:
            return
        rel = self.prec - self.valuation
        if rel <= 0:
            raise PrecisionExhausted("no significant digits")
        mod = self.p**rel
        if not (0 <= self.a < mod and 0 <= self.b < mod) or (self.a % self.p == 0 and self.b % self.p == 0):
            raise ValueError("non-canonical quadratic element")

    @classmethod
    def make(cls, p: int, d: int, a: int, b: int, shift: int, prec: int) -> "QuadFieldElement":
        if shift >= prec or (a % p**(prec - shift) == 0 and b % p**(prec - shift) == 0):
            return cls(p, d, None, 0, 0, prec)
        va = vp(a, p) if a else 10**9
        vb = vp(b, p) if b else 10**9
        v = min(va, vb)
        if shift + v >= prec:
            return cls(p, d, None, 0, 0, prec)
        mod = p ** (prec - shift - v)
        return cls(p, d, shift + v, (a // p**v) % mod, (b // p**v) % mod, prec)

    @classmethod
    def from_pair(cls, a, b, p: int, d: int, prec: int) -> "QuadFieldElement":
        """Build a + b*sqrt(d) from rationals or PAdicScalars."""
        sa = a if isinstance(a, PAdicScalar) else PAdicScalar.from_rational(a, p, prec)
        sb = b if isinstance(b, PAdicScalar) else PAdicScalar.from_rational(b, p, prec)
        prec = min(sa.prec, sb.prec)
        vals = [x.valuation for x in (sa, sb) if x.valuation is not None]
        if not vals:
            return cls(p, d, None, 0, 0, prec)
        base = min(min(vals), prec)
        ia = sa.unit * p ** (sa.valuation - base) if sa.valuation is not None else 0
        ib = sb.unit * p ** (sb.valuation - base) if sb.valuation is not None else 0
        mod = p ** (prec - base)
        return cls.make(p, d, ia % mod, ib % mod, base, prec)

    @classmethod
    def one(cls, p: int, d: int, prec: int) -> "QuadFieldElement":
        return cls(p, d, 0, 1, 0, prec)

    @classmethod
    def zero(cls, p: int, d: int, prec: int) -> "QuadFieldElement":
        return cls(p, d, None, 0, 0, prec)

    @classmethod
    def sqrt_d(cls, p: int, d: int, prec: int) -> "QuadFieldElement":
        return cls(p, d, 0, 0, 1, prec)

    # queries -----------------------------------------------------------------
    def is_zero(self) -> bool:
        return self.valuation is None

    @property
    def rel_prec(self) -> int:
        return 0 if self.valuation is None else self.prec - self.valuation

    def coords(self) -> tuple[PAdicScalar, PAdicScalar]:
        if self.valuation is None:
            z = PAdicScalar.zero(self.p, self.prec)
            return z, z
        return (
            PAdicScalar.make(self.p, self.a, self.valuation, self.prec),
            PAdicScalar.make(self.p, self.b, self.valuation, self.prec),
        )

    def residues(self, k: int | None = None) -> tuple[int, int]:
        """Integer coordinates modulo p^k for an integral element."""
        k = self.prec if k is None else k
        if k > self.prec:
            raise PrecisionExhausted("residue beyond known precision")
        if self.valuation is None:
            return 0, 0
        if self.valuation < 0:
            raise ValueError("element is not integral")
        s, mod = self.p**self.valuation, self.p**k
        return self.a * s % mod, self.b * s % mod

    def is_rational(self) -> bool:
        return self.valuation is None or self.b == 0

    # arithmetic --------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, QuadFieldElement):
            if (other.p, other.d) != (self.p, self.d):
                raise ValueError("mismatched fields")
            return other
        if isinstance(other, PAdicScalar):
            return QuadFieldElement.from_pair(other, 0, self.p, self.d, other.prec)
        if isinstance(other, (int, Fraction)):
            extra = max(0, vp(other, self.p) or 0)
            return QuadFieldElement.from_pair(other, 0, self.p, self.d, self.prec + extra + 64)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        p, d, prec = self.p, self.d, min(self.prec, other.prec)
        vals = [x.valuation for x in (self, other) if x.valuation is not None]
        if not vals:
            return QuadFieldElement(p, d, None, 0, 0, prec)
        base = min(vals + [prec])
        ta = tb = 0
        for x in (self, other):
            if x.valuation is not None:
                s = p ** (x.valuation - base)
                ta += x.a * s
                tb += x.b * s
        mod = p ** (prec - base)
        return QuadFieldElement.make(p, d, ta % mod, tb % mod, base, prec)

    __radd__ = __add__

    def __neg__(self):
        if self.valuation is None:
            return self
        mod = self.p**self.rel_prec
        return QuadFieldElement(self.p, self.d, self.valuation, (-self.a) % mod, (-self.b) % mod, self.prec)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        p, d = self.p, self.d
        if self.valuation is None or other.valuation is None:
            if self.valuation is None and other.valuation is None:
                prec = self.prec + other.prec
            elif self.valuation is None:
                prec = self.prec + other.valuation
            else:
                prec = other.prec + self.valuation
            return QuadFieldElement(p, d, None, 0, 0, prec)
        rel = min(self.rel_prec, other.rel_prec)
        a, b = _qmul(self.a, self.b, other.a, other.b, d, p**rel)
        v = self.valuation + other.valuation
        return QuadFieldElement(p, d, v, a, b, v + rel)

    __rmul__ = __mul__

    def conj(self) -> "QuadFieldElement":
        if self.valuation is None:
            return self
        mod = self.p**self.rel_prec
        return QuadFieldElement(self.p, self.d, self.valuation, self.a, (-self.b) % mod, self.prec)

    def norm(self) -> PAdicScalar:
        if self.valuation is None:
            return PAdicScalar.zero(self.p, self.prec)
        rel = self.rel_prec
        n = (self.a * self.a - self.d * self.b * self.b) % self.p**rel
        return PAdicScalar(self.p, 2 * self.valuation, n, 2 * self.valuation + rel)

    def trace(self) -> PAdicScalar:
        return PAdicScalar.make(self.p, 2 * self.a, self.valuation, self.prec) if self.valuation is not None else PAdicScalar.zero(self.p, self.prec)

    def inverse(self) -> "QuadFieldElement":
        if self.valuation is None:
            raise DivisionByZero("inverse of zero")
        rel = self.rel_prec
        mod = self.p**rel
        n_inv = pow((self.a * self.a - self.d * self.b * self.b) % mod, -1, mod)
        return QuadFieldElement(
            self.p, self.d, -self.valuation, self.a * n_inv % mod, (-self.b) * n_inv % mod, rel - self.valuation
        )

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        if self.valuation is None:
            return self if k else QuadFieldElement.one(self.p, self.d, self.prec)
        rel = self.rel_prec
        a, b = _qpow(self.a, self.b, k, self.d, self.p**rel)
        return QuadFieldElement(self.p, self.d, self.valuation * k, a, b, self.valuation * k + rel)

    def with_prec(self, prec: int) -> "QuadFieldElement":
        if prec > self.prec:
            raise PrecisionExhausted("cannot raise precision")
        if self.valuation is None:
            return QuadFieldElement(self.p, self.d, None, 0, 0, prec)
        return QuadFieldElement.make(self.p, self.d, self.a, self.b, self.valuation, prec)

    def equals(self, other, prec: int | None = None) -> bool:
        diff = self - other
        k = diff.prec if prec is None else prec
        if k > diff.prec:
            raise PrecisionExhausted("comparison beyond known precision")
        return diff.valuation is None or diff.valuation >= k

    def diff_valuation(self, other) -> float:
        """Valuation of self - other (inf when zero to the known precision)."""
        diff = self - other
        return math.inf if diff.valuation is None else diff.valuation

    def __eq__(self, other):
        if not isinstance(other, QuadFieldElement):
            return NotImplemented
        return (self.p, self.d, self.valuation, self.a, self.b, self.prec) == (
            other.p, other.d, other.valuation, other.a, other.b, other.prec)

    def __hash__(self):
        return hash((self.p, self.d, self.valuation, self.a, self.b, self.prec))

    def __str__(self):
        a, b = self.coords()
        return f"({a}) + ({b})*sqrt({self.d})"

    __repr__ = __str__

    @classmethod
    def parse(cls, text: str) -> "QuadFieldElement":
        m = re.fullmatch(r"\s*\((.*)\) \+ \((.*)\)\*sqrt\((-?\d+)\)\s*", text)
        if not m:
            raise ParseError(f"cannot parse K_p element: {text!r}")
        a, b = PAdicScalar.parse(m.group(1)), PAdicScalar.parse(m.group(2))
        return cls.from_pair(a, b, a.p, int(m.group(3)), min(a.prec, b.prec))


# ---------------------------------------------------------------------------
# logarithm and square roots


def _log_unit_pair(a: int, b: int, p: int, d: int, m: int) -> tuple[int, int]:
    """Iwasawa log of the unit a + b sqrt(d) (integers mod p^m), result mod p^m."""
    K, E = _log_terms(p, m)
    mod = p ** (m + E)
    order = p * p - 1
    ya, yb = _qpow(a, b, order, d, mod)
    xa, xb = (ya - 1) % mod, yb % mod
    sa = sb = 0
    pa, pb = 1, 0
    for k in range(1, K + 1):
        pa, pb = _qmul(pa, pb, xa, xb, d, mod)
        vk = vp(k, p)
        kk = k // p**vk
        inv = pow(kk, -1, mod)
        ta = (pa // p**vk) * inv
        tb = (pb // p**vk) * inv
        if k % 2:
            sa += ta
            sb += tb
        else:
            sa -= ta
            sb -= tb
    out = p**m
    inv_o = pow(order, -1, out)
    return sa * inv_o % out, sb * inv_o % out


def iwasawa_log(u):
    """Iwasawa branch of the p-adic logarithm (log p = 0) on Q_p^x or K_p^x."""
    if isinstance(u, PAdicScalar):
        if u.valuation is None:
            raise DivisionByZero("log of zero")
        d = next(x for x in range(2, 4 * u.p) if not is_quadratic_residue(x, u.p))
        r = iwasawa_log(QuadFieldElement(u.p, d, u.valuation, u.unit, 0, u.prec))
        return r.coords()[0]
    if u.valuation is None:
        raise DivisionByZero("log of zero")
    m = u.rel_prec
    la, lb = _log_unit_pair(u.a, u.b, u.p, u.d, m)
    return QuadFieldElement.make(u.p, u.d, la, lb, 0, m)


def teichmuller(u: QuadFieldElement) -> QuadFieldElement:
    """Root of unity congruent to the unit part of u modulo p."""
    p, m = u.p, u.rel_prec
    mod = p**m
    a, b = u.a % p, u.b % p
    for _ in range(m + 1):
        a, b = _qpow(a, b, p * p, u.d, mod)
    return QuadFieldElement.make(p, u.d, a, b, 0, m)


def exp_p(x: QuadFieldElement) -> QuadFieldElement:
    """p-adic exponential on p*O_{K_p} (p odd)."""
    if x.valuation is None:
        return QuadFieldElement.one(x.p, x.d, x.prec)
    if x.valuation < 1:
        raise PrecisionExhausted("exp diverges outside p*O")
    p, N = x.p, x.prec
    K = N + 2
    extra = K // (p - 1) + 1
    mod = p ** (N + extra)
    xa, xb = x.residues(N)
    sa, sb, ta, tb, fact = 1, 0, 1, 0, 1
    for k in range(1, K + 1):
        ta, tb = _qmul(ta, tb, xa, xb, x.d, mod)
        fact *= k
        vf = vp(fact, p)
        uf = fact // p**vf
        inv = pow(uf, -1, mod)
        sa += (ta // p**vf) * inv
        sb += (tb // p**vf) * inv
    out = p**N
    return QuadFieldElement.make(p, x.d, sa % out, sb % out, 0, N)


def sqrt_in_Kp(x: PAdicScalar, d: int) -> QuadFieldElement:
    """Canonical square root of a nonzero p-adic scalar inside K_p = Q_p(sqrt d)."""
    p = x.p
    if x.valuation is None:
        raise DivisionByZero("sqrt of zero is not normalized")
    if x.valuation % 2:
        raise RamifiedRoot("odd valuation has no root in an unramified extension")
    rel = x.rel_prec
    half = (p - 1) // 2
    if is_quadratic_residue(x.unit, p):
        r = _sqrt_mod_pk(x.unit, p, rel)
        if r % p > half:
            r = (-r) % p**rel
        return QuadFieldElement(p, d, x.valuation // 2, r, 0, x.valuation // 2 + rel)
    mod = p**rel
    t = x.unit * pow(d, -1, mod) % mod
    r = _sqrt_mod_pk(t, p, rel)
    if r % p > half:
        r = (-r) % mod
    return QuadFieldElement(p, d, x.valuation // 2, 0, r, x.valuation // 2 + rel)


# ---------------------------------------------------------------------------
# vectorised helpers used by the integration kernels


def _vec_dtype(p: int, k: int):
    return np.int64 if p ** (2 * k) < 2**62 // 8 else object


def vec_qmul(a, b, c, e, d, mod):
    return (a * c + (b * e % mod) * d) % mod, (a * e + b * c) % mod


def vec_log_units(a, b, p: int, d: int, m: int):
    """Iwasawa log of arrays of units a + b sqrt(d) modulo p^m (coordinatewise)."""
    K, E = _log_terms(p, m)
    mod = p ** (m + E)
    dt = _vec_dtype(p, m + E)
    a = np.asarray(a, dtype=dt) % mod
    b = np.asarray(b, dtype=dt) % mod
    order = p * p - 1
    ya = np.ones_like(a)
    yb = np.zeros_like(b)
    ba, bb, k = a.copy(), b.copy(), order
    while k:
        if k & 1:
            ya, yb = vec_qmul(ya, yb, ba, bb, d, mod)
        ba, bb = vec_qmul(ba, bb, ba, bb, d, mod)
        k >>= 1
    xa, xb = (ya - 1) % mod, yb
    sa = np.zeros_like(a)
    sb = np.zeros_like(b)
    pa, pb = np.ones_like(a), np.zeros_like(b)
    for k in range(1, K + 1):
        pa, pb = vec_qmul(pa, pb, xa, xb, d, mod)
        vk = vp(k, p)
        inv = pow(k // p**vk, -1, mod)
        sign = 1 if k % 2 else -1
        sa = (sa + sign * ((pa // p**vk) * inv % mod)) % mod
        sb = (sb + sign * ((pb // p**vk) * inv % mod)) % mod
    out = p**m
    inv_o = pow(order, -1, out)
    return sa % out * inv_o % out, sb % out * inv_o % out
