"""Darmon points through the integral formula over X.

Optimal embeddings of the real quadratic order O_c into R_0, the fixed point
z_ψ, the unit ε_c and γ_ψ, multiplicative integrals of boundary measures, the
2-cocycle d_z, and the evaluation Ψ(P) = -t · ∫_X Ψ(x - z_ψ y) dμ̃_{γ_ψ}.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np
from sympy import factorint

from . import __version__
from .bttree import cover_size
from .errors import (
    DegenerateForm,
    InvariantViolation,
    NoneFound,
    PrecisionExhausted,
    ResourceLimit,
    SamplePoleCollision,
)
from .measures import P1Measure, xgrid
from .padic import QuadFieldElement, is_quadratic_residue, vec_log_units
from .quatalg import GroupDatum, QuaternionElement


# ---------------------------------------------------------------------------
# arithmetic of the real quadratic order


def kronecker(d: int, ell: int) -> int:
    """Kronecker symbol (d / ell) for a prime ell."""
    if ell == 2:
        if d % 2 == 0:
            return 0
        return 1 if d % 8 in (1, 7) else -1
    if d % ell == 0:
        return 0
    return 1 if is_quadratic_residue(d, ell) else -1


def is_fundamental_discriminant(d: int) -> bool:
    if d <= 1 or math.isqrt(d) ** 2 == d:
        return False
    if d % 4 == 1:
        return all(e == 1 for e in factorint(d).values())
    if d % 4 != 0:
        return False
    m = d // 4
    return m % 4 in (2, 3) and all(e == 1 for e in factorint(m).values())


@dataclass(frozen=True)
class QuadraticUnit:
    """ε = (X + Y sqrt(Δ)) / 2 with Δ = c² d_K and X² - Δ Y² = 4."""

    X: int
    Y: int
    d_K: int
    c: int

    @property
    def disc(self) -> int:
        return self.c * self.c * self.d_K

    def coords(self) -> tuple[Fraction, Fraction]:
        """(u, v) with ε = u + v sqrt(d_K)."""
        return Fraction(self.X, 2), Fraction(self.Y * self.c, 2)

    def norm(self) -> Fraction:
        u, v = self.coords()
        return u * u - self.d_K * v * v

    def real(self) -> float:
        u, v = self.coords()
        return float(u) + float(v) * math.sqrt(self.d_K)

    def __mul__(self, other: "QuadraticUnit") -> "QuadraticUnit":
        D = self.disc
        return QuadraticUnit(
            (self.X * other.X + D * self.Y * other.Y) // 2, (self.X * other.Y + self.Y * other.X) // 2, self.d_K, self.c
        )


def fundamental_unit(d_K: int, c: int = 1, limit: int = 10**7) -> QuadraticUnit:
    """Generator > 1 of the norm-one units of O_c, found by a search on Y."""
    D = c * c * d_K
    for Y in range(1, limit + 1):
        X2 = D * Y * Y + 4
        X = math.isqrt(X2)
        if X * X == X2 and (X - D * Y) % 2 == 0:
            return QuadraticUnit(X, Y, d_K, c)
    raise ResourceLimit(f"no norm-one unit with Y <= {limit}")


# ---------------------------------------------------------------------------
# optimal embeddings


def _omega(disc: int) -> tuple[Fraction, Fraction]:
    """ω = (Δ + sqrt Δ)/2 as (rational part, coefficient of sqrt Δ)."""
    return Fraction(disc, 2), Fraction(1, 2)


@dataclass(frozen=True)
class OptimalEmbedding:
    """ψ: O_c -> R_0, recorded by x = ψ(ω_c) with ω_c = (Δ + sqrt Δ)/2."""

    d_K: int
    c: int
    omega_image: QuaternionElement

    @property
    def disc(self) -> int:
        return self.c * self.c * self.d_K

    def sqrt_disc(self) -> QuaternionElement:
        """ψ(sqrt Δ) = 2x - Δ."""
        x = self.omega_image
        return x.scale(2) - _scalar(x, self.disc)

    def sqrt_dK(self) -> QuaternionElement:
        return self.sqrt_disc().scale(Fraction(1, self.c))

    def matrix(self, datum: GroupDatum) -> tuple:
        """i_p(ψ(sqrt d_K)) = [[a, b], [c', -a]]."""
        return datum.embed_p(self.sqrt_dK())

    def image(self, u, v) -> QuaternionElement:
        """ψ(u + v sqrt(d_K))."""
        return _scalar(self.omega_image, u) + self.sqrt_dK().scale(Fraction(v))

    def conjugate(self, g: QuaternionElement) -> "OptimalEmbedding":
        return OptimalEmbedding(self.d_K, self.c, g * self.omega_image * g.inverse())

    def conductor(self, datum: GroupDatum) -> int:
        """Conductor f of the order ψ(K) ∩ R_0 = O_f (f divides c since ψ(O_c) ⊂ R_0)."""
        f = self.c
        for ell, e in factorint(self.c).items():
            for _ in range(e):
                g = f // ell
                if not datum.in_order(self._omega_at(g), datum.R0_basis):
                    break
                f = g
        return f

    def _omega_at(self, g: int) -> QuaternionElement:
        """ψ(ω_g) for g | c, expressed through ψ(sqrt d_K)."""
        return _scalar(self.omega_image, Fraction(g * g * self.d_K, 2)) + self.sqrt_dK().scale(Fraction(g, 2))

    def check(self, datum: GroupDatum) -> None:
        s = self.sqrt_dK()
        if s.trace() != 0:
            raise InvariantViolation("embedding-trace", "ψ(sqrt d_K) must have trace 0")
        if s.norm() != -self.d_K:
            raise InvariantViolation("embedding-norm", f"ψ(sqrt d_K) must have norm {-self.d_K}")
        if not datum.in_order(self.omega_image, datum.R0_basis):
            raise InvariantViolation("embedding-integral", "ψ(O_c) is not contained in R_0")
        if self.conductor(datum) != self.c:
            raise InvariantViolation("embedding-optimal", "ψ(K) ∩ R_0 is larger than ψ(O_c)")
        check_field_conditions(datum, self.d_K, self.c)

    def to_json(self) -> dict:
        return {"d_K": self.d_K, "c": self.c, "omega_image": self.omega_image.to_json()}

    def label(self, datum: GroupDatum) -> str:
        (a, b), (cc, _) = self.matrix(datum)
        return f"[[{a},{b}],[{cc},{-a}]]"


def _scalar(like: QuaternionElement, c) -> QuaternionElement:
    c = Fraction(c)
    return QuaternionElement.make((c, 0, 0, 0), like.a, like.b)


def check_field_conditions(datum: GroupDatum, d_K: int, c: int) -> None:
    """Primes of Dp inert in K, primes of M split, gcd(c, M D d_K p) = 1."""
    for ell in list(factorint(datum.D * datum.p)):
        if kronecker(d_K, ell) != -1:
            raise InvariantViolation("inert", f"{ell} is not inert in Q(sqrt {d_K})")
    for ell in list(factorint(datum.M)) if datum.M > 1 else []:
        if kronecker(d_K, ell) != 1:
            raise InvariantViolation("split", f"{ell} does not split in Q(sqrt {d_K})")
    if math.gcd(c, datum.M * datum.D * d_K * datum.p) != 1:
        raise InvariantViolation("conductor", f"c = {c} is not prime to M D d_K p")


def embedding_from_matrix(datum: GroupDatum, d_K: int, c: int, Mx) -> OptimalEmbedding:
    """Embedding with i_p(ψ(sqrt d_K)) equal to the given trace-zero matrix."""
    s = datum.from_matrix(Mx)
    x = _scalar(s, Fraction(c * c * d_K, 2)) + s.scale(Fraction(c, 2))
    emb = OptimalEmbedding(d_K, c, x)
    emb.check(datum)
    return emb


def find_embeddings(datum: GroupDatum, d_K: int, c: int = 1, search_bound: int = 6, conj_length: int = 2) -> list[OptimalEmbedding]:
    """Bounded search over R_0 coordinates; one embedding per conjugacy orbit found."""
    check_field_conditions(datum, d_K, c)
    disc = c * c * d_K
    basis = [datum.quat(row) for row in datum.R0_basis]
    traces = [int(b.trace()) if b.trace().denominator == 1 else None for b in basis]
    if None in traces:
        raise InvariantViolation("R0-integral", "basis element with non-integral trace")
    j = next((i for i, t in enumerate(traces) if t), None)
    if j is None:
        raise NoneFound("order has no element of nonzero trace")
    target_norm = Fraction(disc * disc - disc, 4)
    rng = range(-search_bound, search_bound + 1)
    found = []
    for rest in product(rng, repeat=3):
        coeffs = list(rest[:j]) + [0] + list(rest[j:])
        partial = sum(a * t for a, t in zip(coeffs, traces))
        if (disc - partial) % traces[j]:
            continue
        coeffs[j] = (disc - partial) // traces[j]
        x = basis[0].scale(0)
        for a, b in zip(coeffs, basis):
            if a:
                x = x + b.scale(a)
        if x.norm() != target_norm:
            continue
        emb = OptimalEmbedding(d_K, c, x)
        if emb.conductor(datum) == c:
            found.append(emb)
    if not found:
        raise NoneFound(f"no optimal embedding within coordinate bound {search_bound}")
    found.sort(key=lambda e: (_height(e.sqrt_dK()), e.sqrt_dK().key))
    return _dedupe(datum, found, conj_length)


def _height(q: QuaternionElement) -> Fraction:
    return max(abs(x) for x in q.x)


def _short_words(datum: GroupDatum, length: int) -> list[QuaternionElement]:
    letters = []
    for g in datum.gamma0_generators:
        letters.extend([g, g.inverse()])
    out, layer = [], [datum.one]
    for _ in range(length):
        layer = [w * l for w in layer for l in letters]
        out.extend(layer)
    return out


def _dedupe(datum: GroupDatum, embs: list[OptimalEmbedding], length: int) -> list[OptimalEmbedding]:
    words = _short_words(datum, length)
    reps: list[OptimalEmbedding] = []
    seen: set = set()
    for e in embs:
        if e.omega_image.key in seen:
            continue
        reps.append(e)
        seen.add(e.omega_image.key)
        for g in words:
            seen.add(e.conjugate(g).omega_image.key)
    return reps


# ---------------------------------------------------------------------------
# fixed points and γ_ψ


def fixed_point(datum: GroupDatum, emb: OptimalEmbedding, prec: int) -> tuple[QuadFieldElement, QuadFieldElement]:
    """(z_ψ, z̄_ψ) with ψ(α)(z_ψ, 1)ᵀ = α (z_ψ, 1)ᵀ."""
    (a, b), (cc, _) = emb.matrix(datum)
    a, b, cc = Fraction(a), Fraction(b), Fraction(cc)
    if cc == 0:
        raise DegenerateForm("lower-left entry vanishes; z_ψ is the point at infinity")
    p, d = datum.p, emb.d_K
    z = QuadFieldElement.from_pair(a / cc, 1 / cc, p, d, prec)
    zbar = z.conj()
    root = QuadFieldElement.sqrt_d(p, d, prec)
    r1 = z * a + b - root * z
    r2 = z * cc - a - root
    for r in (r1, r2):
        if not r.is_zero() and r.valuation < prec - 1:
            raise InvariantViolation("eigenvector", "fixed point fails the eigenvector condition")
    return z, zbar


def gamma_psi(datum: GroupDatum, emb: OptimalEmbedding, eps: QuadraticUnit | None = None) -> QuaternionElement:
    """ψ(ε_c) = (X - YΔ)/2 + Y ψ(ω_c)."""
    eps = eps or fundamental_unit(emb.d_K, emb.c)
    if eps.c != emb.c or eps.d_K != emb.d_K:
        raise ValueError("unit and embedding belong to different orders")
    x = emb.omega_image
    g = _scalar(x, Fraction(eps.X - eps.Y * emb.disc, 2)) + x.scale(eps.Y)
    if not datum.is_in_gamma0(g):
        raise InvariantViolation("gamma-psi", "ψ(ε_c) is not a norm-one unit of R_0")
    return g


def mobius(g, z: QuadFieldElement) -> QuadFieldElement:
    """Fractional linear action of a 2x2 matrix with rational entries on K_p."""
    (a, b), (c, d) = g
    return (z * Fraction(a) + Fraction(b)) / (z * Fraction(c) + Fraction(d))


# ---------------------------------------------------------------------------
# multiplicative integrals on P^1(Q_p)


def sample_points(p: int, n: int, rng: random.Random | None = None) -> list:
    """One point per depth-n cover ball (None is ∞); canonical centers unless rng given."""
    P = p**n
    out = []
    for k in range(cover_size(p, n)):
        if k < P:
            out.append(Fraction(k + (P * rng.randrange(1, 10**6) if rng else 0)))
            continue
        w = k - P
        y = p * w + (P * rng.randrange(1, 10**6) if rng else 0)
        out.append(None if y == 0 else Fraction(1, y))
    return out


def mult_integral(nu: P1Measure, z1, z2, rng: random.Random | None = None, f=None) -> list[QuadFieldElement]:
    """Riemann product ∏_U f(t_U)^{ν(U)} with f(t) = (t - z1)/(t - z2) by default.

    f, when given, is any callable on sample points (None meaning ∞) with the same divisor.
    """
    if nu.modulus is not None:
        raise ValueError("multiplicative integrals need integer-valued measures")
    ref = z1 if z1 is not None else z2
    if f is None:
        for z in (z1, z2):
            if z.is_rational():
                raise SamplePoleCollision("divisor point lies in P^1(Q_p)")

        def f(t):
            if t is None:
                return QuadFieldElement.one(ref.p, ref.d, ref.prec)
            return (z1 - t) / (z2 - t)

    pts = sample_points(nu.p, nu.n, rng)
    out = [QuadFieldElement.one(ref.p, ref.d, ref.prec) for _ in range(nu.m)]
    for k, t in enumerate(pts):
        row = nu.values[k]
        if not any(row):
            continue
        fv = f(t)
        if fv.is_zero():
            raise SamplePoleCollision("integrand vanishes at a sample point")
        for j in range(nu.m):
            e = int(row[j])
            if e:
                out[j] = out[j] * fv**e
    return out


def two_cocycle_dz(mu, z: QuadFieldElement, g1: QuaternionElement, g2: QuaternionElement, n: int | None = None) -> list[QuadFieldElement]:
    """d_z(γ1, γ2) = ×∫ (s - γ1⁻¹z)/(s - z) dμ_{γ2}."""
    datum = mu.datum
    z1 = mobius(datum.embed_p(g1.inverse()), z)
    return mult_integral(mu.value(g2, n), z1, z)


def nu_coboundary(datum: GroupDatum, m: P1Measure, z: QuadFieldElement, g: QuaternionElement) -> list[QuadFieldElement]:
    """ν(γ) = ×∫ (s - γ⁻¹z)/(s - z) dm."""
    return mult_integral(m, mobius(datum.embed_p(g.inverse()), z), z)


# ---------------------------------------------------------------------------
# the integral over X


def iwasawa_psi(a, b, p: int, d: int, m: int):
    """Default Ψ on arrays of units a + b sqrt(d): Iwasawa logarithm mod p^m."""
    return vec_log_units(a, b, p, d, m)


@dataclass
class DarmonResult:
    value: list  # QuadFieldElement per coordinate of ℍ
    precision: int  # certified absolute digits
    metadata: dict = field(default_factory=dict)

    def conj(self) -> "DarmonResult":
        return DarmonResult([v.conj() for v in self.value], self.precision, dict(self.metadata))

    def agreement(self, other: "DarmonResult") -> float:
        """Minimal valuation of the coordinatewise difference."""
        return min(a.diff_valuation(b) for a, b in zip(self.value, other.value))

    def to_json(self) -> dict:
        return {
            "value": [str(v) for v in self.value],
            "precision": self.precision,
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "DarmonResult":
        return cls([QuadFieldElement.parse(s) for s in raw["value"]], raw["precision"], raw.get("metadata", {}))


CHUNK = 1 << 20


def darmon_integral(
    L, g_psi: QuaternionElement, z: QuadFieldElement, t: int, psi=iwasawa_psi, measure=None, rng=None, workers: int = 1
) -> DarmonResult:
    """-t · Σ_B Ψ(a - z b) μ̃_{γ_ψ}(B) over depth-n balls of X.

    Each stored class stands for p - 1 balls differing by roots of unity, on
    which Ψ takes the same value.  With rng (a numpy Generator) the sample
    point of each ball is drawn at random instead of the canonical center.
    The sum runs over fixed chunks; workers > 1 evaluates chunks in threads
    and combines them in chunk order, so the output does not depend on it.
    """
    p, n, N = L.p, L.n, L.N
    mu = measure if measure is not None else L.value(g_psi)
    grid = xgrid(p, n)
    mod = p**N
    if z.is_zero() or z.valuation < 0 or z.prec < N:
        raise PrecisionExhausted("z_ψ must be integral and known to the working precision")
    za, zb = z.residues(N)
    nz = np.nonzero(np.any(mu.values != 0, axis=1))[0]
    dt = np.int64 if mod * mod * CHUNK < 2**62 else object
    chunks = []
    for start in range(0, len(nz), CHUNK):
        idx = nz[start : start + CHUNK]
        ra = grid.rep_a[idx].astype(np.int64)
        rb = grid.rep_b[idx].astype(np.int64)
        if rng is not None:
            ra = ra + grid.P * rng.integers(0, p ** max(N - n, 0) or 1, size=len(idx))
            rb = rb + grid.P * rng.integers(0, p ** max(N - n, 0) or 1, size=len(idx))
        chunks.append((idx, ra, rb))

    def partial(chunk):
        idx, ra, rb = chunk
        ua = (ra - za * rb) % mod
        ub = (-zb * rb) % mod
        if np.any((ua % p == 0) & (ub % p == 0)):
            raise InvariantViolation("integrand-unit", "x - z_ψ y is not a unit on some ball")
        la, lb = psi(ua, ub, p, z.d, N)
        la = np.asarray(la, dtype=dt) % mod
        lb = np.asarray(lb, dtype=dt) % mod
        w = mu.values[idx].astype(dt)
        return [(int((la * w[:, j] % mod).sum()), int((lb * w[:, j] % mod).sum())) for j in range(mu.m)]

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(partial, chunks))
    else:
        parts = [partial(c) for c in chunks]
    sums = [[sum(part[j][0] for part in parts), sum(part[j][1] for part in parts)] for j in range(mu.m)]
    scale = (-t * (p - 1)) % mod
    out = [QuadFieldElement.make(p, z.d, sa * scale % mod, sb * scale % mod, 0, N) for sa, sb in sums]
    meta = {"depth": n, "N": N, "t": t, "seed": L.seed, "lift_method": L.method}
    return DarmonResult(out, min(n, N), meta)


# ---------------------------------------------------------------------------
# the pipeline


@dataclass
class DarmonParams:
    n: int = 3
    N: int = 6
    r: int | None = None
    seed: int = 0
    fill: str = "zero"
    radial_seed: int | None = None
    twist: int = 0
    lift_method: str = "auto"


def pipeline_cocycle(datum: GroupDatum, params: DarmonParams, shift=None):
    """Stabilized cocycle at depth n (optionally shifted by a coboundary m)."""
    from .cocycle import ShiftedCocycle, UniversalCocycle, build_radial, default_r, hecke_stabilize

    radial = build_radial(datum, params.n, seed=params.radial_seed, twist=params.twist)
    r = params.r if params.r is not None else default_r(datum)
    mu = hecke_stabilize(UniversalCocycle(datum, radial, params.n), r)
    if shift is not None:
        mu = ShiftedCocycle(mu, shift)
    return radial, r, mu


def darmon_point(datum: GroupDatum, emb: OptimalEmbedding, params: DarmonParams | None = None, psi=iwasawa_psi, shift=None, cache: dict | None = None, workers: int = 1) -> DarmonResult:
    """cocycle -> stabilize -> restrict -> lift -> integrate, with metadata attached.

    cache, if given, keeps the lift between calls that share (datum, params, shift).
    """
    from .cocycle import exponent_t
    from .lift import lift_cocycle

    params = params or DarmonParams()
    key = (datum.hash(), _params_key(params), id(shift))
    if cache is not None and key in cache:
        L, t, r = cache[key]
    else:
        radial, r, mu = pipeline_cocycle(datum, params, shift)
        gens = {i: mu.value(g, params.n) for i, g in enumerate(datum.gamma0_generators)}
        L = lift_cocycle(datum, gens, params.n, params.N, seed=params.seed, fill=params.fill, method=params.lift_method)
        t = exponent_t(datum, radial)
        if cache is not None:
            cache[key] = (L, t, r)
    emb.check(datum)
    z, _ = fixed_point(datum, emb, params.N)
    g = gamma_psi(datum, emb)
    res = darmon_integral(L, g, z, t, psi, workers=workers)
    res.metadata.update(
        {
            "version": __version__,
            "datum": datum.hash(),
            "embedding": emb.label(datum),
            "d_K": emb.d_K,
            "c": emb.c,
            "r": r,
            "params": asdict(params),
            "params_hash": _params_key(params),
        }
    )
    return res


def _params_key(params: DarmonParams) -> str:
    return hashlib.sha256(json.dumps(asdict(params), sort_keys=True).encode()).hexdigest()[:16]
