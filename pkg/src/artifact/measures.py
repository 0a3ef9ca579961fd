"""Boundary measures on P^1(Q_p) and measures on primitive vectors X ⊂ Z_p^2.

P1Measure keeps the values on the depth-n cover; coarser edges are obtained by
summing children, so additivity holds by construction.

XMeasure stores measures that are invariant under the Teichmüller scalars
mu_{p-1}.  A depth-n ball B(a, b, n) in X is written λ·s_t with t a point of
P^1(Z/p^n), s_t its section vector and λ a unit; the class of B modulo
mu_{p-1} is indexed by (t, λ/ω(λ)).  Scalars commute with every matrix
action, and any lift can be averaged over mu_{p-1} (p - 1 is a unit), so
nothing is lost by this normal form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .bttree import Ball, TreeEdge, cover_edge, cover_size, edge_index, edge_to_ball, point_index, act_ball, ball_to_edge
from .errors import DepthLoss, ParseError


# ---------------------------------------------------------------------------
# P^1 side


def parent_index(p: int, k: int) -> np.ndarray:
    """Map cover(k) indices to the cover(k-1) index of the containing ball."""
    P, Q = p**k, p ** (k - 1)
    idx = np.arange(cover_size(p, k))
    out = np.empty_like(idx)
    aff = idx < P
    out[aff] = idx[aff] % Q
    w = idx[~aff] - P
    out[~aff] = Q + (w % max(Q // p, 1) if k > 1 else 0)
    return out


@dataclass
class P1Measure:
    """Values nu(U) on the depth-n cover, shape (cover_size, m); modulus None means Z."""

    p: int
    n: int
    values: np.ndarray
    modulus: int | None = None
    harmonic: bool = False
    _levels: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=object if self.modulus is None else np.int64)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.shape[0] != cover_size(self.p, self.n):
            raise ValueError("value array does not match the depth-n cover")
        if self.modulus is not None:
            self.values %= self.modulus

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @classmethod
    def zero(cls, p: int, n: int, m: int, modulus: int | None = None) -> "P1Measure":
        return cls(p, n, np.zeros((cover_size(p, n), m), dtype=object if modulus is None else np.int64), modulus, True)

    def level(self, k: int) -> np.ndarray:
        """Values on cover(k) for 1 <= k <= n."""
        if k > self.n or k < 1:
            raise DepthLoss(f"depth {k} outside stored range 1..{self.n}")
        if k == self.n:
            return self.values
        if k not in self._levels:
            fine = self.level(k + 1)
            out = np.zeros((cover_size(self.p, k), self.m), dtype=fine.dtype)
            np.add.at(out, parent_index(self.p, k + 1), fine)
            if self.modulus is not None:
                out %= self.modulus
            self._levels[k] = out
        return self._levels[k]

    def edge_value(self, e: TreeEdge) -> np.ndarray:
        """c(e) for any edge within distance n of v_*."""
        k = e.distance()
        if k > self.n:
            raise DepthLoss("edge beyond stored depth")
        inward = e if e.points_inward() else e.reverse()
        val = self.level(k)[edge_index(inward)]
        if e.points_inward():
            return val
        # the complement ball; equals -val when the mass is zero
        out = self.total_mass() - val
        return out % self.modulus if self.modulus is not None else out

    def ball_value(self, b: Ball) -> np.ndarray:
        return self.edge_value(ball_to_edge(b))

    def total_mass(self) -> np.ndarray:
        s = self.values.sum(axis=0)
        return s % self.modulus if self.modulus is not None else s

    def check_harmonic(self) -> bool:
        return not np.any(self.total_mass() != 0)

    def __add__(self, other: "P1Measure") -> "P1Measure":
        self._check_compatible(other)
        return P1Measure(self.p, self.n, self.values + other.values, self.modulus, self.harmonic and other.harmonic)

    def __sub__(self, other: "P1Measure") -> "P1Measure":
        self._check_compatible(other)
        return P1Measure(self.p, self.n, self.values - other.values, self.modulus, self.harmonic and other.harmonic)

    def __neg__(self):
        return P1Measure(self.p, self.n, -self.values, self.modulus, self.harmonic)

    def scale(self, k: int) -> "P1Measure":
        return P1Measure(self.p, self.n, self.values * k, self.modulus, self.harmonic)

    def _check_compatible(self, other):
        if (self.p, self.n, self.modulus, self.m) != (other.p, other.n, other.modulus, other.m):
            raise ValueError("incompatible measures")

    def reduce(self, modulus: int) -> "P1Measure":
        vals = np.array([[int(x) % modulus for x in row] for row in self.values], dtype=np.int64)
        return P1Measure(self.p, self.n, vals, modulus, self.harmonic)

    def equals(self, other: "P1Measure") -> bool:
        self._check_compatible(other)
        return bool(np.all(self.values == other.values))

    def truncate(self, k: int) -> "P1Measure":
        return P1Measure(self.p, k, self.level(k).copy(), self.modulus, self.harmonic)


def p1_permutation(g, p: int, n: int) -> np.ndarray:
    """perm[k] = index of g·U_k in cover(n) for g preserving v_* (GL_2(Z_p) up to scalars)."""
    return _p1_perm_cached(_mat_key(g), p, n)


def _mat_key(g):
    return tuple(Fraction(x) for row in g for x in row)


@lru_cache(maxsize=4096)
def _p1_perm_cached(key, p, n):
    g = ((key[0], key[1]), (key[2], key[3]))
    out = np.empty(cover_size(p, n), dtype=np.int64)
    for k in range(cover_size(p, n)):
        out[k] = edge_index(cover_edge(p, n, k).act(g))
    return out


def act_p1(g, nu: P1Measure) -> P1Measure:
    """(g·nu)(U) = nu(g^{-1} U)."""
    from .padic import vp

    det = g[0][0] * g[1][1] - g[0][1] * g[1][0]
    scale_ok = all(x == 0 or (vp(x, nu.p) or 0) >= 0 for row in g for x in row) and vp(det, nu.p) == 0
    if scale_ok:
        perm = p1_permutation(g, nu.p, nu.n)
        out = np.empty_like(nu.values)
        out[perm] = nu.values
        return P1Measure(nu.p, nu.n, out, nu.modulus, nu.harmonic)
    # general g: pull each ball back and read it if still within depth
    from .bttree import mat_inv

    ginv = mat_inv(g)
    rows = []
    for k in range(cover_size(nu.p, nu.n)):
        e = cover_edge(nu.p, nu.n, k).act(ginv)
        rows.append(nu.edge_value(e))
    return P1Measure(nu.p, nu.n, np.array(rows), nu.modulus, nu.harmonic)


# ---------------------------------------------------------------------------
# X side


PERM_CACHE_ENTRIES = 100_000_000  # total cached permutation length


class XGrid:
    """Indexing of depth-n ball classes of X modulo Teichmüller scalars."""

    def __init__(self, p: int, n: int):
        self.p, self.n = p, n
        self.P = p**n
        self.Q = p ** (n - 1)
        self.n_points = cover_size(p, n)
        self.size = self.n_points * self.Q
        cls = np.arange(self.size, dtype=np.int64)
        self.t_of = cls // self.Q
        lam = 1 + p * (cls % self.Q)
        t = self.t_of
        aff = t < self.P
        a = np.where(aff, lam * t % self.P, lam)
        b = np.where(aff, lam, lam * (p * (t - self.P)) % self.P)
        small = np.int32 if self.size < 2**31 else np.int64
        self.t_of = self.t_of.astype(small)
        self.rep_a = a.astype(small)
        self.rep_b = b.astype(small)
        self._perm_cache: dict = {}

    # modular helpers -----------------------------------------------------
    def _pow(self, x, k):
        r = np.ones_like(x)
        x = x % self.P
        while k:
            if k & 1:
                r = r * x % self.P
            x = x * x % self.P
            k >>= 1
        return r

    def _inv(self, u):
        phi = self.P - self.Q
        return self._pow(u, phi - 1)

    def class_of(self, a, b) -> np.ndarray:
        """Class index of primitive vectors (a, b) mod p^n; -1 for non-primitive."""
        p, P, Q = self.p, self.P, self.Q
        a = np.asarray(a, dtype=np.int64) % P
        b = np.asarray(b, dtype=np.int64) % P
        bunit = b % p != 0
        aunit = a % p != 0
        u = np.where(bunit, b, np.where(aunit, a, 1))
        uinv = self._inv(u)
        t = np.where(bunit, a * uinv % P, P + (b * uinv % P) // p)
        omega = self._pow(u, Q)
        lam = u * self._inv(omega) % P
        j = (lam - 1) // p
        out = t * Q + j
        return np.where(bunit | aunit, out, -1)

    def permutation(self, g) -> np.ndarray:
        """perm[c] = class of g·rep(c) for an integral matrix g (entries reduced mod p^n)."""
        key = tuple(int(Fraction(x).numerator * pow(Fraction(x).denominator, -1, self.P)) % self.P for row in g for x in row)
        if key not in self._perm_cache:
            a0, b0, c0, d0 = key
            perm = np.empty(self.size, dtype=np.int32 if self.size < 2**31 else np.int64)
            step = 1 << 21
            for s in range(0, self.size, step):
                ra = self.rep_a[s : s + step].astype(np.int64)
                rb = self.rep_b[s : s + step].astype(np.int64)
                perm[s : s + step] = self.class_of((a0 * ra + b0 * rb) % self.P, (c0 * ra + d0 * rb) % self.P)
            if len(self._perm_cache) * self.size > PERM_CACHE_ENTRIES:
                self._perm_cache.clear()
            self._perm_cache[key] = perm
        return self._perm_cache[key]

    def fiber_index(self) -> np.ndarray:
        return self.t_of

    def is_x_infinity(self) -> np.ndarray:
        """Classes inside X_inf = Z_p^x × pZ_p (b divisible by p)."""
        return self.rep_b % self.p == 0


@lru_cache(maxsize=8)
def xgrid(p: int, n: int) -> XGrid:
    return XGrid(p, n)


@dataclass
class XMeasure:
    """Per-ball values (mod p^N) on the classes of an XGrid, shape (size, m)."""

    p: int
    n: int
    N: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64) % self.p**self.N
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.shape[0] != xgrid(self.p, self.n).size:
            raise ValueError("value array does not match the depth-n grid")

    @property
    def grid(self) -> XGrid:
        return xgrid(self.p, self.n)

    @property
    def modulus(self) -> int:
        return self.p**self.N

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @classmethod
    def zero(cls, p, n, N, m) -> "XMeasure":
        return cls(p, n, N, np.zeros((xgrid(p, n).size, m), dtype=np.int64))

    def ball_value(self, a: int, b: int) -> np.ndarray:
        c = int(self.grid.class_of(np.array([a]), np.array([b]))[0])
        if c < 0:
            return np.zeros(self.m, dtype=np.int64)
        return self.values[c]

    def __add__(self, other):
        return XMeasure(self.p, self.n, self.N, self.values + other.values)

    def __sub__(self, other):
        return XMeasure(self.p, self.n, self.N, self.values - other.values)

    def __neg__(self):
        return XMeasure(self.p, self.n, self.N, -self.values)

    def scale(self, k: int):
        return XMeasure(self.p, self.n, self.N, self.values * (k % self.modulus))

    def equals(self, other) -> bool:
        return bool(np.all(self.values == other.values))

    def total_mass(self) -> np.ndarray:
        return (self.p - 1) * self.values.sum(axis=0) % self.modulus

    def restrict(self, mask: np.ndarray) -> "XMeasure":
        return XMeasure(self.p, self.n, self.N, np.where(mask[:, None], self.values, 0))


def act_x(g, mu: XMeasure) -> XMeasure:
    """Push-forward along (x, y) -> g(x, y) for g in M_2(Z_p) ∩ GL_2(Q_p)."""
    grid = mu.grid
    perm = grid.permutation(g)
    bad = perm < 0
    if np.any(bad):
        if np.any(mu.values[bad] != 0):
            raise DepthLoss("image leaves the primitive vectors")
    out = np.zeros_like(mu.values)
    good = ~bad
    if _unimodular(g, mu.p) and not np.any(bad):
        out[perm] = mu.values  # a bijection of classes
    else:
        np.add.at(out, perm[good], mu.values[good])
    return XMeasure(mu.p, mu.n, mu.N, out)


def _unimodular(g, p: int) -> bool:
    (a, b), (c, d) = g
    det = Fraction(a) * Fraction(d) - Fraction(b) * Fraction(c)
    return det != 0 and det.numerator % p != 0


def pushforward_pi(mu: XMeasure) -> P1Measure:
    grid = mu.grid
    out = np.zeros((grid.n_points, mu.m), dtype=np.int64)
    np.add.at(out, grid.t_of, mu.values)
    out = out * (mu.p - 1) % mu.modulus
    return P1Measure(mu.p, mu.n, out, mu.modulus, True)


def total_mass(mu) -> np.ndarray:
    return mu.total_mass()


# ---------------------------------------------------------------------------
# measure files


def write_measure(path, mu, kind: str | None = None) -> None:
    lines = []
    if isinstance(mu, P1Measure):
        N = "inf" if mu.modulus is None else str(_log_p(mu.modulus, mu.p))
        lines.append(f"p={mu.p} m={mu.m} n={mu.n} N={N} kind={kind or 'p1'}")
        order = sorted(range(cover_size(mu.p, mu.n)), key=lambda k: edge_to_ball(cover_edge(mu.p, mu.n, k)).literal())
        for k in order:
            ball = edge_to_ball(cover_edge(mu.p, mu.n, k))
            lines.append(f"{ball.literal()} -> " + " ".join(str(int(x)) for x in mu.values[k]))
    else:
        lines.append(f"p={mu.p} m={mu.m} n={mu.n} N={mu.N} kind={kind or 'x'}")
        grid = mu.grid
        nz = np.nonzero(np.any(mu.values != 0, axis=1))[0]
        entries = []
        roots = _teichmuller_roots(mu.p, mu.n)
        for c in nz:
            for z in roots:
                a, b = int(grid.rep_a[c]) * z % grid.P, int(grid.rep_b[c]) * z % grid.P
                entries.append((a, b, c))
        entries.sort()
        for a, b, c in entries:
            lines.append(f"({a}, {b}) + O({mu.p}^{mu.n}) -> " + " ".join(str(int(x)) for x in mu.values[c]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_measure(path):
    with open(path) as fh:
        rows = [ln.rstrip("\n") for ln in fh if ln.strip()]
    try:
        header = dict(tok.split("=") for tok in rows[0].split())
        p, m, n = int(header["p"]), int(header["m"]), int(header["n"])
    except (KeyError, ValueError, IndexError) as exc:
        raise ParseError(f"bad measure header in {path}") from exc
    if header["kind"].lower().startswith("x"):
        N = int(header["N"])
        grid = xgrid(p, n)
        vals = np.zeros((grid.size, m), dtype=np.int64)
        for ln in rows[1:]:
            lhs, rhs = ln.split(" -> ")
            a, b = lhs.split(" + ")[0].strip("()").split(", ")
            c = int(grid.class_of(np.array([int(a)]), np.array([int(b)]))[0])
            vals[c] = [int(x) for x in rhs.split()]
        return XMeasure(p, n, N, vals)
    modulus = None if header["N"] == "inf" else p ** int(header["N"])
    vals = np.zeros((cover_size(p, n), m), dtype=object if modulus is None else np.int64)
    for ln in rows[1:]:
        lhs, rhs = ln.split(" -> ")
        ball = Ball.parse(p, lhs)
        vals[point_index(p, n, ball.sample_point())] = [int(x) for x in rhs.split()]
    return P1Measure(p, n, vals, modulus, header["kind"] != "p1-nonharmonic")


def _log_p(modulus: int, p: int) -> int:
    k = 0
    while modulus > 1:
        modulus //= p
        k += 1
    return k


@lru_cache(maxsize=None)
def _teichmuller_roots(p: int, n: int) -> tuple:
    P = p**n
    return tuple(sorted(pow(g, p ** (n - 1), P) for g in range(1, p)))
