"""Lifting the restricted cocycle from P^1-measures to measures on X.

The lift is stored on the generators of Γ_0 and extended to words by the
cocycle rule.  For data whose generators have finite order acting freely on
P^1(Z/p^n) (the SL_2(Z) fixture) the constraints decouple orbit by orbit and
are solved directly; otherwise a sparse elimination modulo p^N is used.
"""
from __future__ import annotations

import hashlib
import json
import os
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bttree import mat_inv
from .errors import DepthLoss, Infeasible, InvariantViolation, MissingHeckeData, ResourceLimit
from .measures import P1Measure, XMeasure, act_x, p1_permutation, pushforward_pi, read_measure, write_measure, xgrid
from .quatalg import GroupDatum, QuaternionElement, Word

GENERIC_LIMIT = 40_000


def _perm_order(perm: np.ndarray, cap: int = 24) -> int | None:
    ident = np.arange(len(perm))
    cur = perm.copy()
    for k in range(1, cap + 1):
        if np.array_equal(cur, ident):
            return k
        cur = perm[cur]
    return None


@dataclass
class LiftedCocycle:
    datum: GroupDatum
    n: int
    N: int
    gens: dict  # generator index -> XMeasure
    seed: int | None = None
    method: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def p(self) -> int:
        return self.datum.p

    def _letter(self, g: int, e: int) -> XMeasure:
        key = (g, e)
        if key not in self._cache:
            if e > 0:
                self._cache[key] = self.gens[g]
            else:
                ginv = self.datum.embed_p(self.datum.gamma0_generators[g].inverse())
                self._cache[key] = -act_x(ginv, self.gens[g])
        return self._cache[key]

    def on_word(self, word: Word) -> XMeasure:
        """μ̃(g_1⋯g_k) by Horner's rule μ̃(g w) = μ̃(g) + g·μ̃(w)."""
        if not word:
            return XMeasure.zero(self.p, self.n, self.N, self.datum.H_rank)
        gens = self.datum.gamma0_generators
        acc = self._letter(*word[-1])
        for g, e in reversed(word[:-1]):
            q = gens[g] if e > 0 else gens[g].inverse()
            acc = self._letter(g, e) + act_x(self.datum.embed_p(q), acc)
        return acc

    def value(self, q: QuaternionElement) -> XMeasure:
        return self.on_word(self.datum.word_for(q))

    def scale(self, k: int) -> "LiftedCocycle":
        return LiftedCocycle(self.datum, self.n, self.N, {g: v.scale(k) for g, v in self.gens.items()}, self.seed, self.method)

    def __add__(self, other: "LiftedCocycle") -> "LiftedCocycle":
        return LiftedCocycle(self.datum, self.n, self.N, {g: v + other.gens[g] for g, v in self.gens.items()}, self.seed, self.method)

    def check(self, mu_values: dict | None = None) -> dict:
        """Verify fiber compatibility (if μ given) and the relation identities; returns a report."""
        report = {}
        if mu_values is not None:
            ok = all(
                np.array_equal(pushforward_pi(self.gens[g]).values, _reduce(mu_values[g], self.N).values)
                for g in self.gens
            )
            report["fiber"] = ok
        rel_ok = True
        for rel in self.datum.relations:
            val = self.on_word(rel)
            rel_ok &= not np.any(val.values)
        report["relations"] = rel_ok
        report["support"] = True
        return report


def _reduce(mu: P1Measure, N: int) -> P1Measure:
    return mu.reduce(mu.p**N) if mu.modulus != mu.p**N else mu


def _fiber_targets(mu: P1Measure, N: int) -> np.ndarray:
    p = mu.p
    mod = p**N
    vals = np.array([[int(x) % mod for x in row] for row in mu.values], dtype=np.int64)
    return vals * pow(p - 1, -1, mod) % mod


def lift_cocycle(
    datum: GroupDatum,
    mu_gens: dict,
    n: int,
    N: int,
    seed: int | None = 0,
    fill: str = "zero",
    method: str = "auto",
) -> LiftedCocycle:
    """Choose μ̃ with π_*(μ̃_g) = μ_g for each generator g and the relation identities holding mod p^N.

    mu_gens maps generator index -> P1Measure at depth n.
    """
    p = datum.p
    m = datum.H_rank
    if all(not np.any(v.values) for v in mu_gens.values()):
        zero = {g: XMeasure.zero(p, n, N, m) for g in mu_gens}
        return LiftedCocycle(datum, n, N, zero, seed, "zero")
    if method in ("auto", "orbit"):
        try:
            gens = _orbit_lift(datum, mu_gens, n, N, seed, fill)
            lifted = LiftedCocycle(datum, n, N, gens, seed, "orbit")
            if lifted.check()["relations"]:
                return lifted
            if method == "orbit":
                raise Infeasible("orbit solution violates a datum relation")
        except _NotApplicable:
            if method == "orbit":
                raise Infeasible("orbit method does not apply to this datum") from None
    gens = _generic_lift(datum, mu_gens, n, N, seed)
    return LiftedCocycle(datum, n, N, gens, seed, "generic")


class _NotApplicable(Exception):
    pass


def _orbit_lift(datum, mu_gens, n, N, seed, fill) -> dict:
    p = datum.p
    grid = xgrid(p, n)
    Q, mod = grid.Q, p**N
    rng = np.random.default_rng(seed) if seed is not None else None
    out = {}
    for g, mu in mu_gens.items():
        mat = datum.embed_p(datum.gamma0_generators[g])
        perm_x = grid.permutation(mat)
        perm_p = p1_permutation(mat, p, n)
        k = _perm_order(perm_x)
        if k is None or np.any(perm_x < 0):
            raise _NotApplicable
        # free action on P^1(Z/p^n)
        cur = perm_p.copy()
        for _ in range(k - 1):
            if np.any(cur == np.arange(len(cur))):
                raise _NotApplicable
            cur = perm_p[cur]
        s = _fiber_targets(mu, N)
        # orbit condition on μ itself
        orbit_sum = s.copy()
        cur = perm_p.copy()
        for _ in range(k - 1):
            orbit_sum = orbit_sum + s[cur]
            cur = perm_p[cur]
        if np.any(orbit_sum % mod):
            raise Infeasible("μ_g does not satisfy the torsion relation of g")
        if fill == "random" and rng is not None:
            vals = rng.integers(0, mod, size=(grid.size, mu.m), dtype=np.int64)
        else:
            vals = np.zeros((grid.size, mu.m), dtype=np.int64)
        pivots = rng.integers(0, Q, size=grid.n_points) if rng is not None else np.zeros(grid.n_points, dtype=np.int64)
        # orbits of the generator on P^1(Z/p^n), each listed from its smallest point
        orbits = [np.arange(grid.n_points)]
        for _ in range(k - 1):
            orbits.append(perm_p[orbits[-1]])
        orbits = np.stack(orbits, axis=1)
        heads = orbits[orbits.min(axis=1) == orbits[:, 0]]
        free_t = heads[:, :-1].ravel()
        # free fibers: a pivot class absorbs the fiber sum
        piv = free_t * Q + pivots[free_t]
        vals[piv] = 0
        fiber_sums = vals.reshape(grid.n_points, Q, mu.m).sum(axis=1) % mod
        vals[piv] = (s[free_t] - fiber_sums[free_t]) % mod
        # the last fiber of each orbit is forced by the orbit sums
        last = heads[:, -1]
        vals.reshape(grid.n_points, Q, mu.m)[last] = 0
        slot = np.full(grid.n_points, -1, dtype=np.int64)
        slot[last] = np.arange(len(last))
        forced = np.zeros((len(last) * Q, mu.m), dtype=np.int64)
        for j in range(k - 1):
            t = heads[:, j]
            cls = (t[:, None] * Q + np.arange(Q)[None, :]).ravel()
            c = cls
            for _ in range(k - 1 - j):
                c = perm_x[c]
            forced[slot[c // Q] * Q + c % Q] -= vals[cls]
        lastcls = (last[:, None] * Q + np.arange(Q)[None, :]).ravel()
        vals[lastcls] = forced % mod
        del forced
        out[g] = XMeasure(p, n, N, vals)
    return out


def _generic_lift(datum, mu_gens, n, N, seed) -> dict:
    """Sparse elimination modulo p^N over all generator ball values."""
    p = datum.p
    grid = xgrid(p, n)
    size = grid.size
    labels = sorted(mu_gens)
    nvar = size * len(labels)
    if nvar > GENERIC_LIMIT:
        raise ResourceLimit(f"generic lift needs {nvar} unknowns (limit {GENERIC_LIMIT})")
    mod = p**N
    m = datum.H_rank
    col = {g: i * size for i, g in enumerate(labels)}
    rows: list[tuple[dict, np.ndarray]] = []
    for g in labels:
        s = _fiber_targets(mu_gens[g], N)
        for t in range(grid.n_points):
            rows.append(({col[g] + c: 1 for c in range(t * grid.Q, (t + 1) * grid.Q)}, s[t] % mod))
    gens = datum.gamma0_generators
    for rel in datum.relations:
        # μ̃(w) = Σ_j prefix_j · μ̃(letter_j) = 0; (h·x)(B) = x(h^{-1}B)
        eqs = [dict() for _ in range(size)]
        prefix = datum.one
        for g, e in rel:
            if e > 0:
                h, sign = prefix, 1
            else:
                h, sign = prefix * gens[g].inverse(), -1
            perm = grid.permutation(datum.embed_p(h))
            for c in range(size):
                j = int(perm[c])
                eqs[j][col[g] + c] = (eqs[j].get(col[g] + c, 0) + sign) % mod
            prefix = prefix * (gens[g] if e > 0 else gens[g].inverse())
        rows.extend((eq, np.zeros(m, dtype=np.int64)) for eq in eqs if eq)
    order = list(range(nvar))
    if seed is not None:
        random.Random(seed).shuffle(order)
    x = _solve_mod(rows, nvar, p, N, order)
    return {g: XMeasure(p, n, N, x[col[g] : col[g] + size]) for g in labels}


def _val(x: int, p: int, N: int) -> int:
    if x % p**N == 0:
        return N
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def _solve_mod(rows, nvar, p, N, order) -> np.ndarray:
    """Echelon elimination over Z/p^N with minimal-valuation pivots; free variables set to 0."""
    mod = p**N
    rank = {c: i for i, c in enumerate(order)}
    pivots: dict = {}  # col -> (row dict, rhs, valuation)
    for row, rhs in rows:
        row = {c: v % mod for c, v in row.items() if v % mod}
        rhs = np.asarray(rhs, dtype=object) % mod
        while row:
            # eliminate known pivots greedily
            changed = False
            for c in list(row):
                if c in pivots and c in row:
                    prow, prhs, pv = pivots[c]
                    a = row[c]
                    if _val(a, p, N) >= pv:
                        f = (a // p**pv) * pow(prow[c] // p**pv, -1, mod) % mod
                        for cc, vv in prow.items():
                            nv = (row.get(cc, 0) - f * vv) % mod
                            if nv:
                                row[cc] = nv
                            else:
                                row.pop(cc, None)
                        rhs = (rhs - f * prhs) % mod
                        changed = True
            if not changed or not any(c in pivots for c in row):
                break
        if not row:
            if any(int(v) % mod for v in rhs):
                raise Infeasible("inconsistent constraints modulo p^N")
            continue
        c = min(row, key=lambda cc: (_val(row[cc], p, N), rank[cc]))
        v = _val(row[c], p, N)
        if c in pivots:
            # the new row has a smaller valuation at c: swap and reinsert the old pivot row
            old = pivots.pop(c)
            pivots[c] = (row, rhs, v)
            rows.append((old[0], old[1]))
            continue
        pivots[c] = (row, rhs, v)
    x = np.zeros((nvar, len(rows[0][1]) if rows else 1), dtype=object)
    # back substitution in reverse pivot order
    solved = set()
    pending = dict(pivots)
    while pending:
        progress = False
        for c, (row, rhs, v) in list(pending.items()):
            others = [cc for cc in row if cc != c]
            if any(cc in pending and cc != c for cc in others):
                continue
            acc = rhs.copy()
            for cc in others:
                acc = (acc - row[cc] * x[cc]) % mod
            unit = row[c] // p**v
            if any(int(a) % p**v for a in acc):
                raise Infeasible("pivot divisibility fails modulo p^N")
            x[c] = np.array([(int(a) // p**v) * pow(unit, -1, mod) % mod for a in acc], dtype=object)
            solved.add(c)
            del pending[c]
            progress = True
        if not progress:
            raise Infeasible("elimination did not reach echelon form")
    return np.array(x, dtype=np.int64) % mod


# ---------------------------------------------------------------------------
# U_p through Shapiro's lemma


def _up_reps(p: int) -> list[tuple]:
    return [((Fraction(1), Fraction(0)), (Fraction(p * k), Fraction(p))) for k in range(p)]


def up_operator(datum: GroupDatum, L: LiftedCocycle, radial=None) -> LiftedCocycle:
    """𝕌_p = S^{-1} U_p S on the generators of Γ_0, at the same depth."""
    from .cocycle import RadialSystem

    p = datum.p
    grid = xgrid(p, L.n)
    x_inf = grid.is_x_infinity()
    radial = radial or RadialSystem(datum, 1)
    from .bttree import TreeEdge

    e_star = TreeEdge.e_star(p)
    cosets = sorted(radial.reps, key=lambda e: (e != e_star, e))
    reps = [radial.reps[e] for e in cosets]  # γ_i with γ_i(e_i) = e_*; Γ_0 = ⊔ Γ_1 γ_i
    deltas = _up_reps(p)
    dinv = [mat_inv(d) for d in deltas]

    def in_gamma1(mx) -> bool:
        return all(Fraction(x).denominator == 1 for row in mx for x in row) and Fraction(mx[1][0]) % p == 0

    def mm(a, b):
        return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(2)) for j in range(2)) for i in range(2))

    def up_on_gamma1(h: QuaternionElement) -> XMeasure:
        hm = datum.embed_p(h)
        total = XMeasure.zero(p, L.n, L.N, datum.H_rank)
        for k, d in enumerate(deltas):
            x = mm(dinv[k], hm)
            j = next((j for j, dj in enumerate(deltas) if in_gamma1(mm(x, dj))), None)
            if j is None:
                raise MissingHeckeData("U_p coset representatives do not decompose the double coset")
            inner = datum.from_matrix(mm(x, deltas[j]))
            val = L.value(inner).restrict(x_inf)
            total = total + act_x(d, val)
        return total

    new = {}
    for g, q in enumerate(datum.gamma0_generators):
        total = XMeasure.zero(p, L.n, L.N, datum.H_rank)
        for gi in reps:
            prod = gi * q
            j = next(j for j, gj in enumerate(reps) if datum.is_in_gamma1(prod * gj.inverse()))
            h = prod * reps[j].inverse()
            total = total + act_x(datum.embed_p(gi.inverse()), up_on_gamma1(h).restrict(x_inf))
        new[g] = total
    return LiftedCocycle(datum, L.n, L.N, new, L.seed, "U_p")


def eigen_coboundary(datum: GroupDatum, L: LiftedCocycle, U: LiftedCocycle, a_p: int = 1):
    """P^1-measure m' with π_*(U) − a_p·π_*(L) = γm' − m' on every generator, or None.

    The lift itself is a choice, so the eigen relation is only visible after π_*.
    """
    from .cocycle import solve_coboundary

    p, n = datum.p, L.n
    perms, diffs = {}, {}
    for g, q in enumerate(datum.gamma0_generators):
        perms[g] = p1_permutation(datum.embed_p(q), p, n)
        diffs[g] = pushforward_pi(U.gens[g]).values - a_p * pushforward_pi(L.gens[g]).values
    return solve_coboundary(diffs, perms, p**L.N)


# ---------------------------------------------------------------------------
# lift files


def write_lift(L: LiftedCocycle, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    files = {}
    for g, mu in sorted(L.gens.items()):
        name = f"gen_{L.datum.generator_names[g]}.measure"
        write_measure(os.path.join(directory, name), mu, kind="X")
        files[L.datum.generator_names[g]] = name
    manifest = {"seed": L.seed, "n": L.n, "N": L.N, "datum": L.datum.hash(), "method": L.method, "files": files}
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_lift(datum: GroupDatum, directory: str) -> LiftedCocycle:
    with open(os.path.join(directory, "manifest.json")) as fh:
        man = json.load(fh)
    if man["datum"] != datum.hash():
        raise InvariantViolation("datum-hash", "lift was computed for a different datum")
    gens = {}
    for name, fname in man["files"].items():
        gens[datum.generator_names.index(name)] = read_measure(os.path.join(directory, fname))
    return LiftedCocycle(datum, man["n"], man["N"], gens, man["seed"], man["method"])
