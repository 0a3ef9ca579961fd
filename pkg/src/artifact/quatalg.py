"""Quaternion algebras, Eichler-order data and the group datum.

The datum describes Γ_0 (norm-one units of R_0), Γ_1 (norm-one units of the
Eichler order R_1), ω_p, the splitting i_p at p, and an oracle for the
coefficient quotient ℍ of Γ_1^ab.
"""
from __future__ import annotations

import hashlib
import math
import json
import re
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

from .errors import InvariantViolation, OracleUnavailable, ParseError, WordProblemUnavailable
from .padic import vp

Word = tuple  # tuple of (generator index, ±1)


def _normalize_q(num, den) -> tuple:
    g = math.gcd(den, *num)
    if den < 0:
        g = -g
    return tuple(n // g for n in num), den // g


@dataclass(frozen=True, eq=False)
class QuaternionElement:
    """(n0 + n1 i + n2 j + n3 ij) / den with i^2 = a, j^2 = b (a, b integers)."""

    num: tuple
    den: int
    a: int
    b: int

    @classmethod
    def make(cls, coords, a, b) -> "QuaternionElement":
        fr = [Fraction(c) for c in coords]
        a, b = Fraction(a), Fraction(b)
        if a.denominator != 1 or b.denominator != 1:
            raise ParseError("algebra parameters a, b must be integers")
        den = math.lcm(*(f.denominator for f in fr))
        num, den = _normalize_q(tuple(int(f * den) for f in fr), den)
        return cls(num, den, int(a), int(b))

    @cached_property
    def x(self) -> tuple:
        return tuple(Fraction(n, self.den) for n in self.num)

    @property
    def key(self) -> tuple:
        return self.num + (self.den,)

    def __eq__(self, other):
        return isinstance(other, QuaternionElement) and self.key == other.key and (self.a, self.b) == (other.a, other.b)

    def __hash__(self):
        return hash(self.key)

    def _new(self, num, den) -> "QuaternionElement":
        num, den = _normalize_q(num, den)
        return QuaternionElement(num, den, self.a, self.b)

    def __mul__(self, other: "QuaternionElement") -> "QuaternionElement":
        a, b = self.a, self.b
        x0, x1, x2, x3 = self.num
        y0, y1, y2, y3 = other.num
        return self._new(
            (
                x0 * y0 + a * x1 * y1 + b * x2 * y2 - a * b * x3 * y3,
                x0 * y1 + x1 * y0 - b * x2 * y3 + b * x3 * y2,
                x0 * y2 + x2 * y0 + a * x1 * y3 - a * x3 * y1,
                x0 * y3 + x3 * y0 + x1 * y2 - x2 * y1,
            ),
            self.den * other.den,
        )

    def __add__(self, other):
        return self._new(tuple(s * other.den + t * self.den for s, t in zip(self.num, other.num)), self.den * other.den)

    def __sub__(self, other):
        return self._new(tuple(s * other.den - t * self.den for s, t in zip(self.num, other.num)), self.den * other.den)

    def scale(self, c) -> "QuaternionElement":
        c = Fraction(c)
        return self._new(tuple(n * c.numerator for n in self.num), self.den * c.denominator)

    def conj(self) -> "QuaternionElement":
        x0, x1, x2, x3 = self.num
        return QuaternionElement((x0, -x1, -x2, -x3), self.den, self.a, self.b)

    def _norm_num(self) -> int:
        x0, x1, x2, x3 = self.num
        a, b = self.a, self.b
        return x0 * x0 - a * x1 * x1 - b * x2 * x2 + a * b * x3 * x3

    def norm(self) -> Fraction:
        return Fraction(self._norm_num(), self.den * self.den)

    def trace(self) -> Fraction:
        return Fraction(2 * self.num[0], self.den)

    def inverse(self) -> "QuaternionElement":
        n = self._norm_num()
        if n == 0:
            raise ZeroDivisionError("zero divisor")
        x0, x1, x2, x3 = self.num
        d = self.den
        return self._new((x0 * d, -x1 * d, -x2 * d, -x3 * d), n)

    def is_one(self) -> bool:
        return self.den == 1 and self.num == (1, 0, 0, 0)

    def to_json(self) -> list:
        return [str(c) for c in self.x]


def qone(a, b) -> QuaternionElement:
    return QuaternionElement.make((1, 0, 0, 0), a, b)


def _frac(s) -> Fraction:
    try:
        return Fraction(str(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad rational {s!r}") from exc


def _mat(rows) -> tuple:
    return tuple(tuple(_frac(x) for x in row) for row in rows)


def _mm(g, h):
    return tuple(tuple(sum(g[i][k] * h[k][j] for k in range(2)) for j in range(2)) for i in range(2))


def _solve4(M, v):
    """Solve c·M = v for a 4×4 rational matrix M (rows are basis vectors)."""
    n = 4
    A = [[M[r][c] for r in range(n)] + [v[c]] for c in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            raise InvariantViolation("order-basis", "basis is singular")
        A[col], A[piv] = A[piv], A[col]
        inv = 1 / A[col][col]
        A[col] = [x * inv for x in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [A[r][n] for r in range(n)]


@lru_cache(maxsize=16)
def _basis_inverse(basis) -> tuple:
    """Integer matrix N and denominator q with coords = x·N / q when rows of B are the basis vectors."""
    rows = [_solve4(basis, [Fraction(int(k == j)) for j in range(4)]) for k in range(4)]
    den = math.lcm(*(x.denominator for row in rows for x in row))
    return tuple(tuple(int(x * den) for x in row) for row in rows), den


# ---------------------------------------------------------------------------
# words


def parse_word(text: str, names: list[str]) -> Word:
    """Parse 'S^2*U^-3' style words; '1' is the empty word."""
    text = text.replace(" ", "")
    if text in ("", "1"):
        return ()
    out = []
    for tok in text.split("*"):
        mm = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)(?:\^(-?\d+))?", tok)
        if not mm or mm.group(1) not in names:
            raise ParseError(f"bad word token {tok!r}")
        g = names.index(mm.group(1))
        k = int(mm.group(2) or 1)
        out.extend([(g, 1 if k > 0 else -1)] * abs(k))
    return free_reduce(out)


def free_reduce(word) -> Word:
    out: list = []
    for letter in word:
        if out and out[-1][0] == letter[0] and out[-1][1] == -letter[1]:
            out.pop()
        else:
            out.append(tuple(letter))
    return tuple(out)


def word_inverse(word: Word) -> Word:
    return tuple((g, -e) for g, e in reversed(word))


def format_word(word: Word, names: list[str]) -> str:
    if not word:
        return "1"
    parts, i = [], 0
    while i < len(word):
        g, e = word[i]
        k = 1
        while i + k < len(word) and word[i + k] == (g, e):
            k += 1
        parts.append(f"{names[g]}^{e * k}" if e * k != 1 else names[g])
        i += k
    return "*".join(parts)


# ---------------------------------------------------------------------------
# SL_2(Z) word oracle


def sl2z_letters(M) -> list:
    """Write an integral determinant-one matrix as a product of S, S^-1, T^k letters."""
    (a, b), (c, d) = [[int(x) for x in row] for row in M]
    if a * d - b * c != 1:
        raise WordProblemUnavailable("matrix is not in SL_2(Z)")
    letters = []
    while c != 0:
        q = a // c
        if q:
            letters.append(("T", q))
            a, b = a - q * c, b - q * d
        letters.append(("S", 1))
        a, b, c, d = c, d, -a, -b
    if a == -1:
        letters.append(("S", 2))
        a, b, d = 1, -b, 1
    if b:
        letters.append(("T", b))
    return letters


# ---------------------------------------------------------------------------
# group datum


@dataclass
class GroupDatum:
    p: int
    D: int
    M: int
    a: Fraction
    b: Fraction
    R0_basis: tuple
    R1_basis: tuple
    omega_p: QuaternionElement
    gamma0_generators: tuple
    generator_names: list
    ip_I: tuple
    ip_J: tuple
    ip_precision: int | None
    H_rank: int
    H_oracle: str
    H_sign: int = 1
    gamma0_relations: tuple = ()
    word_oracle: str | None = None
    hecke: dict = field(default_factory=dict)
    abelian_table: list = field(default_factory=list)
    raw: dict = field(default_factory=dict, repr=False)

    # algebra -------------------------------------------------------------
    def quat(self, coords) -> QuaternionElement:
        return QuaternionElement.make(coords, self.a, self.b)

    @cached_property
    def one(self) -> QuaternionElement:
        return qone(self.a, self.b)

    @cached_property
    def _IJ(self):
        return _mm(self.ip_I, self.ip_J)

    @cached_property
    def _embed_int(self):
        basis = [((1, 0), (0, 1)), self.ip_I, self.ip_J, self._IJ]
        den = math.lcm(*(Fraction(x).denominator for B in basis for row in B for x in row))
        return [[[int(Fraction(B[r][c]) * den) for B in basis] for c in range(2)] for r in range(2)], den

    def embed_p(self, q: QuaternionElement) -> tuple:
        """i_p(q) as a 2×2 matrix of rationals (exact for exact splittings)."""
        E, den = self._embed_int
        n0, n1, n2, n3 = q.num
        dd = den * q.den
        return tuple(
            tuple(Fraction(e[0] * n0 + e[1] * n1 + e[2] * n2 + e[3] * n3, dd) for e in row) for row in E
        )

    def from_matrix(self, Mx) -> QuaternionElement:
        """Inverse of i_p on 2×2 rational matrices (exact splittings only)."""
        if self.ip_precision is not None:
            raise OracleUnavailable("i_p is only known p-adically")
        basis = [((1, 0), (0, 1)), self.ip_I, self.ip_J, self._IJ]
        rows = [[Fraction(B[r][c]) for r in range(2) for c in range(2)] for B in basis]
        v = [Fraction(Mx[r][c]) for r in range(2) for c in range(2)]
        return self.quat(_solve4(rows, v))

    def _coords_int(self, q: QuaternionElement, basis) -> tuple[list[int], int]:
        inv, den = _basis_inverse(tuple(basis))
        num = q.num
        return [sum(num[r] * inv[r][c] for r in range(4)) for c in range(4)], den * q.den

    def coords_in(self, q: QuaternionElement, basis) -> list:
        nums, den = self._coords_int(q, basis)
        return [Fraction(x, den) for x in nums]

    def in_order(self, q, basis) -> bool:
        nums, den = self._coords_int(q, basis)
        return all(x % den == 0 for x in nums)

    def is_in_gamma0(self, q) -> bool:
        return q.norm() == 1 and self.in_order(q, self.R0_basis)

    def is_in_gamma1(self, q) -> bool:
        return q.norm() == 1 and self.in_order(q, self.R1_basis)

    def is_in_gamma0_hat(self, q) -> bool:
        w = self.omega_p
        return self.is_in_gamma0(w.inverse() * q * w)

    def is_in_gamma(self, q) -> bool:
        """Ihara's group: norm-one units of R_0[1/p]."""
        if q.norm() != 1:
            return False
        nums, den = self._coords_int(q, self.R0_basis)
        for x in nums:
            g = den // math.gcd(x, den)
            while g % self.p == 0:
                g //= self.p
            if g != 1:
                return False
        return True

    # words ---------------------------------------------------------------
    def eval_word(self, word: Word) -> QuaternionElement:
        out = self.one
        gens = self.gamma0_generators
        for g, e in word:
            out = out * (gens[g] if e > 0 else gens[g].inverse())
        return out

    @cached_property
    def relations(self) -> tuple:
        return tuple(parse_word(r, self.generator_names) for r in self.gamma0_relations)

    def word_for(self, q: QuaternionElement) -> Word:
        """A word in the Γ_0 generators representing q."""
        if self.word_oracle != "sl2z":
            raise WordProblemUnavailable("datum has no word oracle")
        S, U = self._sl2z_gens()
        out = []
        for name, k in sl2z_letters(self.embed_p(q)):
            if name == "S":
                out.extend([(S, 1 if k > 0 else -1)] * abs(k))
            else:
                piece = [(S, -1), (U, 1)] if k > 0 else [(U, -1), (S, 1)]
                out.extend(piece * abs(k))
        word = free_reduce(out)
        if self.eval_word(word) != q:
            raise WordProblemUnavailable("word oracle failed to reproduce the element")
        return word

    @cached_property
    def _sl2z_index(self):
        mats = [self.embed_p(g) for g in self.gamma0_generators]
        S = ((0, -1), (1, 0))
        U = ((0, -1), (1, 1))
        try:
            return mats.index(S), mats.index(U)
        except ValueError as exc:
            raise WordProblemUnavailable("sl2z oracle needs generators S and U = ST") from exc

    def _sl2z_gens(self):
        return self._sl2z_index

    # abelianization oracle -------------------------------------------------
    @cached_property
    def oracle(self):
        if self.H_oracle.startswith("manin-symbols:"):
            from .modsym import ManinOracle

            return ManinOracle(int(self.H_oracle.split(":")[1]), self.H_sign)
        if self.H_oracle == "table":
            return _TableOracle(self.abelian_table)
        raise OracleUnavailable(f"unknown oracle {self.H_oracle!r}")

    def abelianization_image(self, q: QuaternionElement) -> tuple:
        if not self.is_in_gamma1(q):
            raise InvariantViolation("gamma1-membership", "element is not in Γ_1")
        if self.H_oracle.startswith("manin-symbols:"):
            return self.oracle.image(self.embed_p(q))
        return self.oracle.image(q)

    # serialization -------------------------------------------------------
    def to_json(self) -> dict:
        return self.raw

    def hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def hecke_reps(self, r: int) -> list:
        from .errors import MissingHeckeData

        if r not in self.hecke:
            raise MissingHeckeData(f"no Hecke representatives for r = {r}")
        return self.hecke[r]


class _TableOracle:
    def __init__(self, table):
        self.table = {q.key: tuple(v) for q, v in table}

    def image(self, q):
        key = q.key
        if q.is_one():
            return None
        if key in self.table:
            return self.table[key]
        raise OracleUnavailable("element not listed in the abelianization table")


def _squarefree(n: int) -> bool:
    k = 2
    while k * k <= n:
        if n % (k * k) == 0:
            return False
        k += 1
    return True


def datum_from_json(raw: dict) -> GroupDatum:
    try:
        a, b = _frac(raw["algebra"]["a"]), _frac(raw["algebra"]["b"])
        q = lambda c: QuaternionElement.make([_frac(x) for x in c], a, b)  # noqa: E731
        names = raw.get("generator_names") or [f"g{k}" for k in range(len(raw["gamma0_generators"]))]
        hecke = {int(r): tuple(q(c) for c in reps) for r, reps in raw.get("hecke", {}).items()}
        table = [(q(c), tuple(v)) for c, v in raw.get("H", {}).get("table", [])]
        datum = GroupDatum(
            p=int(raw["p"]),
            D=int(raw["D"]),
            M=int(raw["M"]),
            a=a,
            b=b,
            R0_basis=tuple(tuple(_frac(x) for x in row) for row in raw["R0_basis"]),
            R1_basis=tuple(tuple(_frac(x) for x in row) for row in raw["R1_basis"]),
            omega_p=q(raw["omega_p"]),
            gamma0_generators=tuple(q(c) for c in raw["gamma0_generators"]),
            generator_names=list(names),
            ip_I=_mat(raw["ip"]["I"]),
            ip_J=_mat(raw["ip"]["J"]),
            ip_precision=raw["ip"].get("precision"),
            H_rank=int(raw["H"]["rank"]),
            H_oracle=str(raw["H"]["oracle"]),
            H_sign=int(raw["H"].get("sign", 1)),
            gamma0_relations=tuple(raw.get("gamma0_relations", ())),
            word_oracle=raw.get("word_oracle"),
            hecke=hecke,
            abelian_table=table,
            raw=raw,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed datum: {exc}") from exc
    validate_datum(datum)
    return datum


def load_datum(path) -> GroupDatum:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return datum_from_json(raw)


def save_datum(datum_or_raw, path) -> None:
    raw = datum_or_raw.raw if isinstance(datum_or_raw, GroupDatum) else datum_or_raw
    with open(path, "w") as fh:
        json.dump(raw, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _padic_integral(x: Fraction, p: int) -> bool:
    return x == 0 or vp(x, p) >= 0


def validate_datum(d: GroupDatum) -> None:
    """Check every datum invariant, raising InvariantViolation with the check name."""
    p = d.p
    if p < 3 or any(p % k == 0 for k in range(2, int(p**0.5) + 1)):
        raise InvariantViolation("p-prime", f"p = {p}")
    if (d.M * d.D) % p == 0:
        raise InvariantViolation("p-coprime", "p divides MD")
    if not _squarefree(d.D):
        raise InvariantViolation("D-squarefree")
    I, J = d.ip_I, d.ip_J
    mod = None if d.ip_precision is None else p ** int(d.ip_precision)

    def same(X, Y):
        for r in range(2):
            for c in range(2):
                diff = Fraction(X[r][c]) - Fraction(Y[r][c])
                if diff == 0:
                    continue
                if mod is None or vp(diff, p) < int(d.ip_precision):
                    return False
        return True

    aId = ((d.a, 0), (0, d.a))
    bId = ((d.b, 0), (0, d.b))
    IJ, JI = _mm(I, J), _mm(J, I)
    if not (same(_mm(I, I), aId) and same(_mm(J, J), bId) and same(IJ, tuple(tuple(-x for x in row) for row in JI))):
        raise InvariantViolation("ip-relations", "i_p(i), i_p(j) do not satisfy the quaternion relations")
    for row in d.R0_basis:
        Mx = d.embed_p(d.quat(row))
        if not all(_padic_integral(x, p) for r in Mx for x in r):
            raise InvariantViolation("R0-integral", "i_p(R_0) is not in M_2(Z_p)")
    for row in d.R1_basis:
        Mx = d.embed_p(d.quat(row))
        if not all(_padic_integral(x, p) for r in Mx for x in r) or (Mx[1][0] != 0 and vp(Mx[1][0], p) < 1):
            raise InvariantViolation("R1-upper", "i_p(R_1) is not upper triangular modulo p")
    if d.omega_p.norm() != p:
        raise InvariantViolation("omega-norm", f"n(ω_p) = {d.omega_p.norm()} ≠ {p}")
    for k, g in enumerate(d.gamma0_generators):
        if g.norm() != 1:
            raise InvariantViolation("generator-norm", f"generator {k} has norm {g.norm()}")
        if not d.in_order(g, d.R0_basis):
            raise InvariantViolation("generator-order", f"generator {k} is not in R_0")
    for rel in d.relations:
        if not d.eval_word(rel).is_one():
            raise InvariantViolation("relations", f"relation {format_word(rel, d.generator_names)} is not trivial")
    for r, reps in d.hecke.items():
        if len(reps) != r + 1 or any(x.norm() != r for x in reps):
            raise InvariantViolation("hecke-reps", f"bad representatives for r = {r}")
    if d.H_rank < 1:
        raise InvariantViolation("H-rank", "coefficient quotient has rank 0")
    if d.D == 1:
        warnings.warn("D = 1: split matrix fixture admitted for testing only", stacklevel=3)


# ---------------------------------------------------------------------------
# split fixture: B = M_2(Q), R_0 = M_2(Z), Γ_1 = Γ_0(p)


def _m2q(Mx) -> list[str]:
    """Coordinates of a 2×2 matrix in the basis 1, i, j, ij of M_2(Q) with a = b = 1."""
    (al, be), (ga, de) = [[Fraction(x) for x in row] for row in Mx]
    return [str(c) for c in ((al + de) / 2, (al - de) / 2, (be + ga) / 2, (be - ga) / 2)]


def split_fixture(p: int = 11, hecke_primes=(2, 3)) -> dict:
    """Raw JSON datum for the D = 1 matrix fixture at level p."""
    half = Fraction(1, 2)
    R0 = [(half, half, 0, 0), (half, -half, 0, 0), (0, 0, half, half), (0, 0, half, -half)]
    R1 = R0[:3] + [(0, 0, p * half, -p * half)]
    hecke = {}
    for r in hecke_primes:
        reps = [((r, 0), (0, 1))] + [((1, 0), (k, r)) for k in range(r)]
        hecke[str(r)] = [_m2q(Mx) for Mx in reps]
    return {
        "p": p,
        "D": 1,
        "M": 1,
        "algebra": {"a": "1", "b": "1"},
        "R0_basis": [[str(Fraction(x)) for x in row] for row in R0],
        "R1_basis": [[str(Fraction(x)) for x in row] for row in R1],
        "omega_p": _m2q(((0, -1), (p, 0))),
        "generator_names": ["S", "U"],
        "gamma0_generators": [_m2q(((0, -1), (1, 0))), _m2q(((0, -1), (1, 1)))],
        "gamma0_relations": ["S^4", "U^6", "S^2*U^-3"],
        "word_oracle": "sl2z",
        "ip": {"I": [["1", "0"], ["0", "-1"]], "J": [["0", "1"], ["1", "0"]], "precision": None},
        "H": {"rank": 1, "oracle": f"manin-symbols:{p}", "sign": 1},
        "hecke": hecke,
    }


def fixture_datum(p: int = 11) -> GroupDatum:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return datum_from_json(split_fixture(p))
